//! Closed-loop trial execution.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::results::TrialResult;
use super::{build_trial_schedule, condition_seed, Condition, ProtocolParams, TrialConfig};
use crate::device::{Device, DeviceParams, DeviceState, CONTROL_PERIOD_S};
use crate::patterns::{decode_sync_angle, object_sync_targets, SyncMapping, TactorPair};
use crate::pivot::{
    grip_contact_force, pivot_step, virtual_fixture_force, ContactMode, FixtureParams, Gripper, ObjectSpec,
    PhysicsParams, PivotState,
};
use crate::station::{Finger, Station};

/// What the operator may perceive at one tick. Signals arrive already
/// delayed by their channel latency; `None` means the channel is off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub target_deg: f64,
    /// Object angle from the visual scene, deg.
    pub visual_angle_deg: f64,
    /// Object angle decoded from the tactor positions, deg.
    pub tactile_angle_deg: Option<f64>,
    /// Grip normal force, N.
    pub grip_force: Option<f64>,
    /// Virtual-fixture force on the leader, N.
    pub fixture_force: Option<f64>,
}

impl Observation {
    /// Lowest-latency angle signal available.
    pub fn best_angle_deg(&self) -> f64 {
        self.tactile_angle_deg.unwrap_or(self.visual_angle_deg)
    }
}

/// Anything that turns observations into aperture commands.
pub trait Operator {
    /// Aperture command in metres for the coming tick.
    fn command(&mut self, obs: &Observation) -> f64;
}

impl<F: FnMut(&Observation) -> f64> Operator for F {
    fn command(&mut self, obs: &Observation) -> f64 {
        self(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum TrialOutcome {
    Running,
    Completed { completion_time: f64 },
    TimedOut,
}

/// Everything recorded about one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickSample {
    pub tick: u64,
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub mode: ContactMode,
    pub normal_force: f64,
    pub fixture_force: f64,
    pub aperture: f64,
    pub aperture_cmd: f64,
    /// Angle decoded from the index-station tactors, rad.
    pub tactile_theta: Option<f64>,
    /// Smallest friction work of any substep in this tick, J.
    pub min_friction_work: f64,
}

impl TickSample {
    pub const CSV_HEADER: &'static str =
        "condition,trial_index,t_s,theta_deg,omega_rad_s,normal_force_n,mode,aperture_m,aperture_cmd_m,fixture_force_n";

    /// One row of the per-tick log, prefixed with the trial it belongs to.
    pub fn write_csv_row<W: Write>(&self, mut out: W, cfg: &TrialConfig) -> io::Result<()> {
        let mode = match self.mode {
            ContactMode::Stick => "stick",
            ContactMode::Slip => "slip",
        };
        writeln!(
            out,
            "{},{},{:.2},{},{},{},{mode},{},{},{}",
            cfg.condition,
            cfg.trial_index,
            self.t,
            self.theta.to_degrees(),
            self.omega,
            self.normal_force,
            self.aperture,
            self.aperture_cmd,
            self.fixture_force
        )
    }
}

/// Steps one trial tick by tick. Physics does not depend on the condition;
/// the condition only selects which channels [`TrialRunner::observe`] fills.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    cfg: TrialConfig,
    protocol: ProtocolParams,
    physics: PhysicsParams,
    fixture: FixtureParams,
    spec: ObjectSpec,
    sync: SyncMapping,
    pivot: PivotState,
    gripper: Gripper,
    device: Option<Device>,
    tick: u64,
    command: f64,
    last_command_change: u64,
    stick_since: Option<u64>,
    slipped: bool,
    dropped: bool,
    outcome: TrialOutcome,
    history: Vec<TickSample>,
}

impl TrialRunner {
    pub fn new(cfg: TrialConfig, protocol: ProtocolParams, physics: PhysicsParams, fixture: FixtureParams) -> Self {
        let spec = ObjectSpec::with_mass(cfg.mass);
        let aperture = spec.diameter - protocol.initial_squeeze_m;
        let normal_force = grip_contact_force(aperture, &spec, physics.contact_stiffness);
        let pivot = PivotState::at_rest(aperture, normal_force);
        let mut runner = Self {
            cfg,
            protocol,
            physics,
            fixture,
            spec,
            sync: SyncMapping::default(),
            pivot,
            gripper: Gripper::at_rest(aperture, physics.gripper_bandwidth),
            device: None,
            tick: 0,
            command: aperture,
            last_command_change: 0,
            stick_since: Some(0),
            slipped: false,
            dropped: false,
            outcome: TrialOutcome::Running,
            history: Vec::with_capacity(512),
        };
        if cfg.condition.tactile() {
            runner = runner.with_device(Device::with_defaults());
        } else {
            runner.history.push(runner.sample(0.0));
        }
        runner
    }

    pub fn with_defaults(cfg: TrialConfig) -> Self {
        Self::new(
            cfg,
            ProtocolParams::default(),
            PhysicsParams::default(),
            FixtureParams::default(),
        )
    }

    /// Attaches a device that renders the object angle on the tactors.
    pub fn with_device(mut self, device: Device) -> Self {
        self.device = Some(device);
        let sample = self.sample(0.0);
        self.history.clear();
        self.history.push(sample);
        self
    }

    /// Device built from explicit station geometry and parameters.
    pub fn with_device_params(self, index: Station, thumb: Station, params: DeviceParams) -> Self {
        self.with_device(Device::new(index, thumb, params))
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    pub fn object(&self) -> &ObjectSpec {
        &self.spec
    }

    pub fn pivot(&self) -> &PivotState {
        &self.pivot
    }

    pub fn command(&self) -> f64 {
        self.command
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * CONTROL_PERIOD_S
    }

    pub fn outcome(&self) -> TrialOutcome {
        self.outcome
    }

    pub fn is_finished(&self) -> bool {
        self.outcome != TrialOutcome::Running
    }

    pub fn device_state(&self) -> Option<DeviceState> {
        self.device.as_ref().map(Device::state)
    }

    pub fn history(&self) -> &[TickSample] {
        &self.history
    }

    pub fn last_sample(&self) -> Option<&TickSample> {
        self.history.last()
    }

    /// Channel-delayed observation for the current tick.
    pub fn observe(&self) -> Observation {
        let delayed = |latency: f64| {
            let lag = (latency / CONTROL_PERIOD_S).round() as usize;
            let idx = self.history.len().saturating_sub(1 + lag);
            self.history.get(idx).copied()
        };
        let c = self.cfg.condition;
        let visual = delayed(self.protocol.visual_latency_s).map_or(0.0, |s| s.theta);
        let tactile = if c.tactile() {
            delayed(self.protocol.tactile_latency_s)
                .and_then(|s| s.tactile_theta)
                .map(f64::to_degrees)
        } else {
            None
        };
        let force = if c.grasp_force() {
            delayed(self.protocol.force_latency_s)
        } else {
            None
        };
        Observation {
            t: self.time(),
            target_deg: self.cfg.target_angle_deg,
            visual_angle_deg: visual.to_degrees(),
            tactile_angle_deg: tactile,
            grip_force: force.map(|s| s.normal_force),
            fixture_force: force.map(|s| s.fixture_force),
        }
    }

    /// Applies `aperture_cmd` for one control period. Ignored once the
    /// trial has finished.
    pub fn step(&mut self, aperture_cmd: f64) -> TrialOutcome {
        if self.is_finished() {
            return self.outcome;
        }
        let cmd = if aperture_cmd.is_finite() {
            aperture_cmd.max(0.0)
        } else {
            self.command
        };
        let leader_velocity = (cmd - self.command) / CONTROL_PERIOD_S;
        if cmd != self.command {
            self.last_command_change = self.tick;
        }
        self.command = cmd;
        let fixture_force = virtual_fixture_force(cmd, leader_velocity, &self.fixture);

        let substeps = (CONTROL_PERIOD_S / self.physics.substep).round().max(1.0) as usize;
        let dt = CONTROL_PERIOD_S / substeps as f64;
        let mut min_work = f64::INFINITY;
        for _ in 0..substeps {
            let aperture = self.gripper.track(cmd, dt);
            let fn_ = grip_contact_force(aperture, &self.spec, self.physics.contact_stiffness);
            let (next, report) = pivot_step(&self.pivot, &self.spec, fn_, &self.physics, dt);
            self.pivot = PivotState { aperture, ..next };
            min_work = min_work.min(report.friction_work);
            if fn_ <= 0.0
                && self.pivot.theta.to_degrees() < self.cfg.target_angle_deg - self.protocol.success_threshold_deg
            {
                self.dropped = true;
            }
        }
        if let Some(device) = self.device.as_mut() {
            let targets = Finger::ALL.map(|f| {
                let s = device.station(f);
                object_sync_targets(self.pivot.theta, &self.sync, s.center(), &s.target).pair
            });
            device.tick(&targets);
        }
        self.tick += 1;

        let mut sample = self.sample(fixture_force);
        sample.min_friction_work = min_work;
        self.history.push(sample);

        match self.pivot.mode {
            ContactMode::Slip => {
                self.slipped = true;
                self.stick_since = None;
            }
            ContactMode::Stick => {
                self.stick_since.get_or_insert(self.tick);
            }
        }
        self.outcome = self.check_outcome();
        self.outcome
    }

    fn check_outcome(&self) -> TrialOutcome {
        if self.slipped {
            if let Some(since) = self.stick_since {
                let start = since.max(self.last_command_change);
                let held = (self.tick - start.min(self.tick)) as f64 * CONTROL_PERIOD_S;
                if held + 1e-9 >= self.protocol.completion_hold_s {
                    return TrialOutcome::Completed {
                        completion_time: start as f64 * CONTROL_PERIOD_S,
                    };
                }
            }
        }
        if self.time() + 1e-9 >= self.protocol.timeout_s {
            TrialOutcome::TimedOut
        } else {
            TrialOutcome::Running
        }
    }

    fn sample(&self, fixture_force: f64) -> TickSample {
        let tactile_theta = self.device.as_ref().map(|d| {
            let pair: TactorPair = d.tactors()[0];
            decode_sync_angle(&pair, &self.sync)
        });
        TickSample {
            tick: self.tick,
            t: self.time(),
            theta: self.pivot.theta,
            omega: self.pivot.omega,
            mode: self.pivot.mode,
            normal_force: self.pivot.normal_force,
            fixture_force,
            aperture: self.pivot.aperture,
            aperture_cmd: self.command,
            tactile_theta,
            min_friction_work: 0.0,
        }
    }

    /// Result of a finished trial, or a provisional one while running.
    pub fn result(&self) -> TrialResult {
        let final_deg = self.pivot.theta.to_degrees();
        let error_deg = final_deg - self.cfg.target_angle_deg;
        let (time_s, timeout) = match self.outcome {
            TrialOutcome::Completed { completion_time } => (completion_time, false),
            TrialOutcome::TimedOut | TrialOutcome::Running => (self.time(), true),
        };
        TrialResult {
            condition: self.cfg.condition,
            trial_index: self.cfg.trial_index,
            mass_kg: self.cfg.mass,
            target_deg: self.cfg.target_angle_deg,
            final_deg,
            error_deg,
            time_s,
            success: error_deg.abs() < self.protocol.success_threshold_deg && !timeout,
            timeout,
            dropped: self.dropped,
        }
    }
}

/// Runs one trial to completion or timeout.
pub fn run_trial<O: Operator + ?Sized>(
    cfg: TrialConfig,
    operator: &mut O,
    protocol: ProtocolParams,
    physics: PhysicsParams,
    fixture: FixtureParams,
) -> TrialResult {
    let mut runner = TrialRunner::new(cfg, protocol, physics, fixture);
    while !runner.is_finished() {
        let obs = runner.observe();
        let cmd = operator.command(&obs);
        runner.step(cmd);
    }
    runner.result()
}

/// Runs the full schedule for every condition in `conditions`, building a
/// fresh operator per trial with `make_operator`.
pub fn run_protocol<O, F>(
    conditions: &[Condition],
    master_seed: u64,
    protocol: ProtocolParams,
    physics: PhysicsParams,
    fixture: FixtureParams,
    make_operator: F,
) -> Vec<TrialResult>
where
    O: Operator,
    F: FnMut(&TrialConfig, &PhysicsParams) -> O,
{
    run_protocol_observed(
        conditions,
        master_seed,
        protocol,
        physics,
        fixture,
        make_operator,
        |_| {},
    )
}

/// [`run_protocol`] that hands every finished runner to `on_finish`, e.g.
/// to keep its tick history.
pub fn run_protocol_observed<O, F, G>(
    conditions: &[Condition],
    master_seed: u64,
    protocol: ProtocolParams,
    physics: PhysicsParams,
    fixture: FixtureParams,
    mut make_operator: F,
    mut on_finish: G,
) -> Vec<TrialResult>
where
    O: Operator,
    F: FnMut(&TrialConfig, &PhysicsParams) -> O,
    G: FnMut(&TrialRunner),
{
    let mut results = Vec::with_capacity(conditions.len() * super::TRIALS_PER_CONDITION);
    for &condition in conditions {
        for cfg in build_trial_schedule(condition, condition_seed(master_seed, condition)) {
            let mut op = make_operator(&cfg, &physics);
            let mut runner = TrialRunner::new(cfg, protocol, physics, fixture);
            while !runner.is_finished() {
                let obs = runner.observe();
                let cmd = op.command(&obs);
                runner.step(cmd);
            }
            on_finish(&runner);
            results.push(runner.result());
        }
    }
    results
}
