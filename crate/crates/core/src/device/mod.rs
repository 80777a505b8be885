//! The 100 Hz device control loop.
//!
//! Each tick, per station: inverse kinematics on the requested tactor
//! targets, collision arbitration (upper mechanism has priority), a PID per
//! motor driving a simulated plant at 1 kHz, and forward kinematics on the
//! quantised sensor readings to publish the tactor positions.

pub mod arbitration;
pub mod motor;
pub mod pid;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::linkage::JointAngles;
use crate::patterns::{object_sync_targets, SyncMapping, TactorPair};
use crate::station::{Finger, Station};

pub use arbitration::{arbitrate_collision, Arbitration, ArbitrationError, ArbitrationParams};
pub use motor::{MotorParams, MotorPlant};
pub use pid::{PidController, PidGains};

/// Fixed control period, s.
pub const CONTROL_PERIOD_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceParams {
    pub motor: MotorParams,
    pub pid: PidGains,
    pub arbitration: ArbitrationParams,
    /// Plant and PID updates per control tick.
    pub substeps: u32,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            motor: MotorParams::default(),
            pid: PidGains::default(),
            arbitration: ArbitrationParams::default(),
            substeps: 10,
        }
    }
}

/// Published state of one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationState {
    pub finger: Finger,
    /// θ1, θ2 (lower) and θ3, θ4 (upper) commanded, rad.
    pub target_angles: [f64; 4],
    /// Same joints as sensed, rad.
    pub actual_angles: [f64; 4],
    pub upper: Point2,
    pub lower: Point2,
    pub arbitration_active: bool,
    /// Lower mechanism parked because no clear target existed.
    pub parked: bool,
    /// Requested targets were not reachable; the previous ones were kept.
    pub target_rejected: bool,
    /// Link clearance of the sensed configuration, mm.
    pub clearance: f64,
    /// Last motor command, V.
    pub voltages: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub tick: u64,
    pub t: f64,
    pub stations: [StationState; 2],
}

impl DeviceState {
    pub fn station(&self, finger: Finger) -> &StationState {
        &self.stations[finger_slot(finger)]
    }

    pub fn write_csv_header<W: Write>(mut out: W) -> io::Result<()> {
        write!(out, "t_s")?;
        for finger in Finger::ALL {
            let f = finger.as_str();
            for k in 1..=4 {
                write!(out, ",{f}_theta{k}_target_deg")?;
            }
            for k in 1..=4 {
                write!(out, ",{f}_theta{k}_act_deg")?;
            }
            write!(
                out,
                ",{f}_up_x_mm,{f}_up_y_mm,{f}_lo_x_mm,{f}_lo_y_mm,{f}_arbitration_active,{f}_clearance_mm"
            )?;
        }
        writeln!(out)
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "{:.2}", self.t)?;
        for s in &self.stations {
            for a in s.target_angles {
                write!(out, ",{:.4}", a.to_degrees())?;
            }
            for a in s.actual_angles {
                write!(out, ",{:.4}", a.to_degrees())?;
            }
            write!(
                out,
                ",{:.4},{:.4},{:.4},{:.4},{},{:.4}",
                s.upper.x, s.upper.y, s.lower.x, s.lower.y, s.arbitration_active as u8, s.clearance
            )?;
        }
        writeln!(out)
    }
}

fn finger_slot(finger: Finger) -> usize {
    match finger {
        Finger::Index => 0,
        Finger::Thumb => 1,
    }
}

fn joint_targets(lower: JointAngles, upper: JointAngles) -> [f64; 4] {
    [lower.theta1, lower.theta2, upper.theta1, upper.theta2]
}

/// Retracted lower-mechanism pose used when arbitration finds no clear
/// target: links folded outwards, tactor just above the base line.
fn lower_home() -> JointAngles {
    JointAngles::from_degrees(160.0, 20.0)
}

#[derive(Debug, Clone)]
struct StationSim {
    station: Station,
    motors: [MotorPlant; 4],
    pids: [PidController; 4],
    readings: [f64; 4],
    requested: TactorPair,
    /// Requested pair and joint targets of the last arbitration.
    arbitrated: Option<((Point2, Point2), ([f64; 4], bool, bool))>,
    state: StationState,
}

impl StationSim {
    fn new(station: Station, params: &DeviceParams, rest: TactorPair) -> Self {
        let lower = station
            .lower
            .inverse_kinematics(rest.lower)
            .expect("rest pose reachable");
        let upper = station
            .upper
            .inverse_kinematics(rest.upper)
            .expect("rest pose reachable");
        let angles = [lower.theta1, lower.theta2, upper.theta1, upper.theta2];
        let motors = angles.map(|a| MotorPlant::at_rest(a, params.motor));
        let substep = CONTROL_PERIOD_S / f64::from(params.substeps);
        let pids = std::array::from_fn(|_| PidController::new(params.pid, substep));
        let readings = std::array::from_fn(|m| motors[m].reading());
        let mut sim = Self {
            station,
            motors,
            pids,
            readings,
            requested: rest,
            arbitrated: None,
            state: StationState {
                finger: station.finger,
                target_angles: angles,
                actual_angles: readings,
                upper: rest.upper,
                lower: rest.lower,
                arbitration_active: false,
                parked: false,
                target_rejected: false,
                clearance: 0.0,
                voltages: [0.0; 4],
            },
        };
        sim.publish();
        sim
    }

    fn tick(&mut self, targets: &TactorPair, params: &DeviceParams) {
        let s = &self.station;
        let reachable =
            s.upper.inverse_kinematics(targets.upper).is_ok() && s.lower.inverse_kinematics(targets.lower).is_ok();
        self.state.target_rejected = !reachable;
        if reachable {
            self.requested = *targets;
        }

        let key = (self.requested.upper, self.requested.lower);
        let (targets, active, parked) = match self.arbitrated {
            Some((last, result)) if last == key => result,
            _ => {
                let result = match arbitrate_collision(key.0, key.1, &s.upper, &s.lower, &params.arbitration) {
                    Ok(arb) => (joint_targets(arb.lower_angles, arb.upper_angles), arb.active, false),
                    Err(_) => {
                        let upper = s.upper.inverse_kinematics(key.0).expect("validated above");
                        (joint_targets(lower_home(), upper), true, true)
                    }
                };
                self.arbitrated = Some((key, result));
                result
            }
        };
        self.state.target_angles = targets;
        self.state.arbitration_active = active;
        self.state.parked = parked;

        let dt = CONTROL_PERIOD_S / f64::from(params.substeps);
        for _ in 0..params.substeps {
            for m in 0..4 {
                let v = self.pids[m].step(targets[m], self.readings[m]);
                self.state.voltages[m] = v;
                self.readings[m] = self.motors[m].step(v, dt);
            }
        }
        self.publish();
    }

    /// Tactor positions and clearance from the sensed angles.
    fn publish(&mut self) {
        let r = self.readings;
        let lower = JointAngles::new(r[0], r[1]);
        let upper = JointAngles::new(r[2], r[3]);
        self.state.actual_angles = [lower.theta1, lower.theta2, upper.theta1, upper.theta2];
        self.state.lower = self.station.lower.forward_kinematics_relaxed(lower);
        self.state.upper = self.station.upper.forward_kinematics_relaxed(upper);
        let lower_links = self.station.lower.link_segments_relaxed(lower);
        let upper_links = self.station.upper.link_segments_relaxed(upper);
        self.state.clearance = upper_links.clearance(&lower_links);
    }
}

/// Simulated two-station device. Single writer: only [`Device::tick`]
/// mutates it; [`Device::state`] hands out owned snapshots.
#[derive(Debug, Clone)]
pub struct Device {
    params: DeviceParams,
    stations: [StationSim; 2],
    tick: u64,
}

impl Device {
    /// Device at rest with both stations in the synchronised zero posture.
    pub fn new(index: Station, thumb: Station, params: DeviceParams) -> Self {
        let rest = |s: &Station| object_sync_targets(0.0, &SyncMapping::default(), s.center(), &s.target).pair;
        Self {
            stations: [
                StationSim::new(index, &params, rest(&index)),
                StationSim::new(thumb, &params, rest(&thumb)),
            ],
            params,
            tick: 0,
        }
    }

    pub fn with_defaults() -> Self {
        Self::new(
            Station::default_for(Finger::Index),
            Station::default_for(Finger::Thumb),
            DeviceParams::default(),
        )
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn station(&self, finger: Finger) -> &Station {
        &self.stations[finger_slot(finger)].station
    }

    /// Runs one control period with `targets` for the index and thumb
    /// stations (in that order).
    pub fn tick(&mut self, targets: &[TactorPair; 2]) -> DeviceState {
        for (sim, target) in self.stations.iter_mut().zip(targets) {
            sim.tick(target, &self.params);
        }
        self.tick += 1;
        self.state()
    }

    pub fn state(&self) -> DeviceState {
        DeviceState {
            tick: self.tick,
            t: self.tick as f64 * CONTROL_PERIOD_S,
            stations: [self.stations[0].state, self.stations[1].state],
        }
    }

    /// Current tactor positions of both stations.
    pub fn tactors(&self) -> [TactorPair; 2] {
        let t = self.tick as f64 * CONTROL_PERIOD_S;
        self.stations.each_ref().map(|s| TactorPair {
            upper: s.state.upper,
            lower: s.state.lower,
            t,
        })
    }
}
