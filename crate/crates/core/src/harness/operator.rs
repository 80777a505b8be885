//! Scripted stand-in for the human operator.
//!
//! The operator knows the object diameter and, after a one-off calibration
//! probe, the aperture at which the grasp starts to slip. It then moves the
//! object towards the target with a series of release pulses: each pulse
//! opens slightly past the holding threshold, in proportion to the
//! remaining error, and is cut short once the predicted angle reaches the
//! target. Between pulses it regrips and waits for its delayed, noisy view
//! of the angle to settle.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trial::{Observation, Operator, TrialRunner};
use super::{Condition, ProtocolParams, TrialConfig};
use crate::pivot::{FixtureParams, ObjectSpec, PhysicsParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    /// Perception-to-action delay on top of the channel latency, s.
    pub reaction_delay_s: f64,
    /// Extra opening past the holding threshold per degree of error, m/deg.
    pub gain_m_per_deg: f64,
    /// Standard deviation of the perceived angle, deg.
    pub observation_noise_deg: f64,
    /// Error below which the operator stops and holds, deg.
    pub stop_band_deg: f64,
    /// How far short of the target a release pulse is cut off, deg.
    pub aim_short_deg: f64,
    /// Share of the remaining error each pulse is sized to cover.
    pub aim_fraction: f64,
    /// Pre-release opening stops this far inside the slip threshold, m.
    pub approach_margin_m: f64,
    /// Time allowed for the gripper to reach the pre-release opening, s.
    pub approach_s: f64,
    /// Assumed time to stop a slipping object after regripping, s.
    pub brake_s: f64,
    /// Squeeze past the object diameter for a firm hold, m.
    pub firm_squeeze_m: f64,
    /// Upper bound on the opening past threshold, m.
    pub max_release_m: f64,
    /// Lower bound on the opening past threshold, m.
    pub min_release_m: f64,
    /// Extra opening added after a pulse that failed to move the object, m.
    pub stall_step_m: f64,
    /// Longest release pulse, s.
    pub pulse_s: f64,
    /// Shortest release pulse, s.
    pub min_pulse_s: f64,
    /// Samples averaged for the settled-angle estimate.
    pub settle_samples: usize,
    /// Aperture ramp rate of the calibration probe, m/s.
    pub probe_rate_m_per_s: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            reaction_delay_s: 0.15,
            gain_m_per_deg: 5e-6,
            observation_noise_deg: 1.0,
            stop_band_deg: 2.0,
            aim_short_deg: 0.5,
            aim_fraction: 0.5,
            approach_margin_m: 1e-4,
            approach_s: 0.08,
            brake_s: 0.05,
            firm_squeeze_m: 0.004,
            max_release_m: 3e-4,
            min_release_m: 5e-5,
            stall_step_m: 5e-5,
            pulse_s: 0.15,
            min_pulse_s: 0.02,
            settle_samples: 10,
            probe_rate_m_per_s: 5e-4,
        }
    }
}

impl OperatorParams {
    /// No reaction delay and perfect perception.
    pub fn ideal() -> Self {
        Self {
            reaction_delay_s: 0.0,
            observation_noise_deg: 0.0,
            stop_band_deg: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.reaction_delay_s >= 0.0) {
            return Err("reaction_delay_s must be non-negative".into());
        }
        if !(self.stop_band_deg > 0.0) {
            return Err("stop_band_deg must be positive".into());
        }
        if !(self.observation_noise_deg >= 0.0) {
            return Err("observation_noise_deg must be non-negative".into());
        }
        if !(self.aim_fraction > 0.0 && self.aim_fraction <= 1.0) {
            return Err("aim_fraction must be in (0, 1]".into());
        }
        if !(self.min_pulse_s > 0.0 && self.min_pulse_s <= self.pulse_s) {
            return Err("min_pulse_s must be positive and at most pulse_s".into());
        }
        if self.settle_samples < 2 {
            return Err("settle_samples must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    /// Holding firm until the perceived angle has settled.
    Settle { since: f64 },
    /// Opening to just inside the slip threshold.
    Approach { until: f64, angle: f64, duration: f64 },
    /// Releasing; ends at `until` or once the predicted angle arrives.
    Release { until: f64, aperture: f64 },
    /// Within the stop band: hold firm for good.
    Done,
}

/// The last completed pulse, for learning how far a pulse moves the object.
#[derive(Debug, Clone, Copy)]
struct PulseRecord {
    start_angle: f64,
    duration: f64,
}

/// Result of the calibration probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Squeeze past the diameter at which a horizontal object starts to slip, m.
    pub threshold_squeeze_m: f64,
    /// Grip force felt at slip onset, N. Only known with grasp-force feedback.
    pub threshold_force_n: Option<f64>,
}

/// One perceived sample after reaction delay and noise.
#[derive(Debug, Clone, Copy)]
struct Percept {
    t: f64,
    angle_deg: f64,
    force: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    params: OperatorParams,
    diameter: f64,
    /// Squeeze past the diameter at which the object slips when horizontal.
    threshold_squeeze: f64,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    pending: VecDeque<Observation>,
    percepts: VecDeque<Percept>,
    phase: Phase,
    /// Channel latency plus reaction delay, s.
    perception_lag: f64,
    /// Time for the gripper to bite after a regrip command, s.
    grip_lag: f64,
    threshold_force: Option<f64>,
    /// Learned travel per squared second of release at 0°, deg/s².
    travel_gain: Option<f64>,
    last_pulse: Option<PulseRecord>,
    /// Accumulated correction for pulses that did not move the object, m.
    stall_bias: f64,
}

impl ScriptedOperator {
    /// Operator for `cfg` with the threshold taken from a calibration probe.
    pub fn new(params: OperatorParams, cfg: &TrialConfig, protocol: &ProtocolParams, physics: &PhysicsParams) -> Self {
        let calibration = calibrate_threshold(params, cfg, protocol, physics);
        Self::with_calibration(params, cfg, protocol, physics, calibration)
    }

    /// Operator with a known calibration.
    pub fn with_calibration(
        params: OperatorParams,
        cfg: &TrialConfig,
        protocol: &ProtocolParams,
        physics: &PhysicsParams,
        calibration: Calibration,
    ) -> Self {
        let spec = ObjectSpec::with_mass(cfg.mass);
        let noise = (params.observation_noise_deg > 0.0)
            .then(|| Normal::new(0.0, params.observation_noise_deg).expect("validated noise"));
        Self {
            params,
            diameter: spec.diameter,
            threshold_squeeze: calibration.threshold_squeeze_m,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            noise,
            pending: VecDeque::new(),
            percepts: VecDeque::new(),
            phase: Phase::Settle { since: 0.0 },
            perception_lag: angle_latency(cfg.condition, protocol) + params.reaction_delay_s,
            grip_lag: 1.0 / physics.gripper_bandwidth,
            threshold_force: calibration.threshold_force_n.filter(|_| cfg.condition.grasp_force()),
            travel_gain: None,
            last_pulse: None,
            stall_bias: 0.0,
        }
    }

    pub fn params(&self) -> &OperatorParams {
        &self.params
    }

    /// Aperture at which the object is expected to start slipping at `theta_deg`.
    pub fn threshold_aperture(&self, theta_deg: f64) -> f64 {
        self.diameter - self.threshold_squeeze * theta_deg.to_radians().cos().max(0.0)
    }

    pub fn firm_aperture(&self) -> f64 {
        self.diameter - self.params.firm_squeeze_m
    }

    /// The release law: firm hold inside the stop band, otherwise the
    /// threshold aperture opened further in proportion to the error.
    pub fn release_aperture(&self, observed_deg: f64, target_deg: f64) -> f64 {
        let error = target_deg - observed_deg;
        if error <= self.params.stop_band_deg {
            return self.firm_aperture();
        }
        let p = &self.params;
        let extra = (p.gain_m_per_deg * error).clamp(p.min_release_m, p.max_release_m.max(p.min_release_m));
        self.threshold_aperture(observed_deg) + extra + self.stall_bias
    }

    fn perceive(&mut self, obs: &Observation) {
        self.pending.push_back(*obs);
        while let Some(front) = self.pending.front() {
            if front.t + self.params.reaction_delay_s > obs.t + 1e-9 {
                break;
            }
            let o = self.pending.pop_front().expect("non-empty");
            let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
            self.percepts.push_back(Percept {
                t: obs.t,
                angle_deg: o.best_angle_deg() + noise,
                force: o.grip_force,
            });
        }
        let keep = self.params.settle_samples.max(2);
        while self.percepts.len() > keep {
            self.percepts.pop_front();
        }
    }

    /// Least-squares fit through the recent percepts, evaluated at the
    /// newest one: (angle, rate, acceleration). Falls back to a line when
    /// there are too few samples for a parabola.
    fn estimate(&self) -> Option<(f64, f64, f64)> {
        let n = self.percepts.len();
        if n < 2 {
            return None;
        }
        let t_end = self.percepts.back()?.t;
        let xs: Vec<f64> = self.percepts.iter().map(|p| p.t - t_end).collect();
        let ys: Vec<f64> = self.percepts.iter().map(|p| p.angle_deg).collect();
        if n >= 4 {
            if let Some([c0, c1, c2]) = polyfit2(&xs, &ys) {
                return Some((c0, c1, 2.0 * c2));
            }
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        Some((my - rate * mx, rate, 0.0))
    }

    /// Slope of a least-squares line through the recent percepts, deg/s.
    fn line_rate(&self) -> Option<f64> {
        let n = self.percepts.len();
        if n < 2 {
            return None;
        }
        let mx = self.percepts.iter().map(|p| p.t).sum::<f64>() / n as f64;
        let my = self.percepts.iter().map(|p| p.angle_deg).sum::<f64>() / n as f64;
        let sxx: f64 = self.percepts.iter().map(|p| (p.t - mx).powi(2)).sum();
        let sxy: f64 = self.percepts.iter().map(|p| (p.t - mx) * (p.angle_deg - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }

    fn settled_mean(&self) -> Option<f64> {
        (self.percepts.len() >= self.params.settle_samples)
            .then(|| self.percepts.iter().map(|p| p.angle_deg).sum::<f64>() / self.percepts.len() as f64)
    }
}

/// Least-squares quadratic `c0 + c1 x + c2 x²` via the normal equations.
fn polyfit2(xs: &[f64], ys: &[f64]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let p = [1.0, x, x * x];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += p[r] * p[c];
            }
            m[r][3] += p[r] * y;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-18 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Latency of the best angle channel available under `condition`.
fn angle_latency(condition: Condition, protocol: &ProtocolParams) -> f64 {
    if condition.tactile() {
        protocol.tactile_latency_s
    } else {
        protocol.visual_latency_s
    }
}

impl ScriptedOperator {
    /// Release duration expected to cover `aim_fraction` of `error_deg`.
    fn pulse_duration(&self, angle_deg: f64, error_deg: f64) -> f64 {
        let p = &self.params;
        let cos = angle_deg.to_radians().cos().max(0.05);
        match self.travel_gain {
            Some(gain) => (p.aim_fraction * error_deg / (gain * cos))
                .sqrt()
                .clamp(p.min_pulse_s, p.pulse_s),
            None => p.min_pulse_s.max(0.5 * p.pulse_s.min(0.1)),
        }
    }

    /// Updates the travel model from the pulse that just settled at `angle`.
    fn learn(&mut self, angle: f64) {
        let Some(pulse) = self.last_pulse.take() else {
            return;
        };
        let moved = angle - pulse.start_angle;
        if moved < 0.5 {
            self.stall_bias += self.params.stall_step_m;
        }
        let mid = 0.5 * (angle + pulse.start_angle);
        let cos = mid.to_radians().cos().max(0.05);
        if moved > 3.0 {
            let observed = moved / (pulse.duration * pulse.duration * cos);
            self.travel_gain = Some(match self.travel_gain {
                Some(g) => 0.5 * (g + observed),
                None => observed,
            });
        }
    }

    fn approach_done(&self, t: f64, until: f64, angle: f64) -> bool {
        if t >= until {
            return true;
        }
        // Felt grip force tells when the fingers have nearly opened to the threshold.
        match (self.threshold_force, self.percepts.back().and_then(|p| p.force)) {
            (Some(f_thr), Some(f)) => {
                let expected = f_thr * angle.to_radians().cos().max(0.0);
                f <= expected + 1.2 * self.params.approach_margin_m * f_thr / self.threshold_squeeze.max(1e-6)
            }
            _ => false,
        }
    }
}

impl Operator for ScriptedOperator {
    fn command(&mut self, obs: &Observation) -> f64 {
        self.perceive(obs);
        let target = obs.target_deg;
        let t = obs.t;
        let firm = self.firm_aperture();
        let p = self.params;
        match self.phase {
            Phase::Done => firm,
            Phase::Settle { since } => {
                // Wait until everything done so far is visible, then judge.
                let wait = self.perception_lag + p.brake_s + 0.01 * p.settle_samples as f64;
                let Some(angle) = self.settled_mean().filter(|_| t - since >= wait) else {
                    return firm;
                };
                // Still visibly moving: give it a little longer, but not so
                // long that holding still would read as the final stop.
                let rate = self.line_rate().unwrap_or(0.0);
                if rate.abs() > 2.0 + 6.0 * p.observation_noise_deg && t - since < wait + 0.05 {
                    return firm;
                }
                self.learn(angle);
                if self.release_aperture(angle, target) <= firm {
                    self.phase = Phase::Done;
                    return firm;
                }
                let duration = self.pulse_duration(angle, target - angle);
                self.phase = Phase::Approach {
                    until: t + p.approach_s,
                    angle,
                    duration,
                };
                self.threshold_aperture(angle) - p.approach_margin_m
            }
            Phase::Approach { until, angle, duration } => {
                if !self.approach_done(t, until, angle) {
                    return self.threshold_aperture(angle) - p.approach_margin_m;
                }
                let aperture = self.release_aperture(angle, target);
                self.last_pulse = Some(PulseRecord {
                    start_angle: angle,
                    duration,
                });
                self.phase = Phase::Release {
                    until: t + duration,
                    aperture,
                };
                aperture
            }
            Phase::Release { until, aperture } => {
                let arrived = self.estimate().is_some_and(|(angle, rate, _)| {
                    let lead = self.perception_lag + p.brake_s;
                    angle + rate.max(0.0) * lead >= target - p.aim_short_deg
                });
                if t + 1e-9 >= until || arrived {
                    self.phase = Phase::Settle { since: t };
                    self.percepts.clear();
                    firm
                } else {
                    aperture
                }
            }
        }
    }
}

/// Estimates the slip threshold with a slow opening ramp on a horizontal
/// object, observed through the same channels and delays the operator will
/// have in the trial. The onset time is backed off by the known perception,
/// averaging and gripper lags.
pub fn calibrate_threshold(
    params: OperatorParams,
    cfg: &TrialConfig,
    protocol: &ProtocolParams,
    physics: &PhysicsParams,
) -> Calibration {
    let probe_protocol = ProtocolParams {
        timeout_s: 60.0,
        ..*protocol
    };
    let mut runner = TrialRunner::new(*cfg, probe_protocol, *physics, FixtureParams::default());
    let blank = Calibration {
        threshold_squeeze_m: 0.0,
        threshold_force_n: None,
    };
    let mut op = ScriptedOperator::with_calibration(params, cfg, protocol, physics, blank);
    let start = runner.command();
    let detect_deg = 2.0 + 2.0 * params.observation_noise_deg / (params.settle_samples as f64).sqrt();
    let mut forces = Vec::new();
    while !runner.is_finished() {
        let obs = runner.observe();
        op.perceive(&obs);
        forces.push(obs.grip_force);
        let t = obs.t;
        if let Some(mean) = op.settled_mean() {
            if mean > detect_deg {
                let window = 0.005 * params.settle_samples as f64;
                let onset = (t - op.perception_lag - window - op.grip_lag).max(0.0);
                let aperture = start + params.probe_rate_m_per_s * onset;
                // The force felt when onset happened arrived one force latency later.
                let idx = ((onset + protocol.force_latency_s) / crate::device::CONTROL_PERIOD_S).round() as usize;
                return Calibration {
                    threshold_squeeze_m: op.diameter - aperture,
                    threshold_force_n: forces.get(idx.min(forces.len() - 1)).copied().flatten(),
                };
            }
        }
        runner.step(start + params.probe_rate_m_per_s * t);
    }
    // Never slipped: assume the object is held up to the diameter.
    blank
}

/// Full protocol over `conditions` with a fresh, calibrated scripted
/// operator per trial.
pub fn run_scripted_protocol(
    conditions: &[Condition],
    master_seed: u64,
    params: OperatorParams,
    protocol: ProtocolParams,
    physics: PhysicsParams,
    fixture: FixtureParams,
) -> Vec<super::TrialResult> {
    super::run_protocol(conditions, master_seed, protocol, physics, fixture, |cfg, physics| {
        ScriptedOperator::new(params, cfg, &protocol, physics)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mass: f64, target: f64) -> TrialConfig {
        TrialConfig {
            mass,
            target_angle_deg: target,
            condition: Condition::VF_GF_TF,
            trial_index: 0,
            seed: 9,
        }
    }

    #[test]
    fn zero_error_commands_firm_hold() {
        let c = cfg(0.01, 45.0);
        let op = ScriptedOperator::with_calibration(
            OperatorParams::default(),
            &c,
            &ProtocolParams::default(),
            &PhysicsParams::default(),
            Calibration {
                threshold_squeeze_m: 8e-4,
                threshold_force_n: None,
            },
        );
        assert_eq!(op.release_aperture(45.0, 45.0), op.firm_aperture());
        assert_eq!(op.firm_aperture(), 0.011);
    }

    #[test]
    fn large_error_opens_past_threshold() {
        let c = cfg(0.01, 75.0);
        let op = ScriptedOperator::with_calibration(
            OperatorParams::default(),
            &c,
            &ProtocolParams::default(),
            &PhysicsParams::default(),
            Calibration {
                threshold_squeeze_m: 8e-4,
                threshold_force_n: None,
            },
        );
        for observed in [0.0, 20.0, 50.0] {
            assert!(op.release_aperture(observed, 75.0) > op.threshold_aperture(observed));
        }
    }

    #[test]
    fn calibration_lands_near_true_threshold() {
        let physics = PhysicsParams::default();
        for mass in crate::pivot::PROTOCOL_MASSES_KG {
            let c = cfg(mass, 45.0);
            let spec = ObjectSpec::with_mass(mass);
            let truth = physics.holding_force(&spec, 0.0) / physics.contact_stiffness;
            let est = calibrate_threshold(OperatorParams::default(), &c, &ProtocolParams::default(), &physics);
            let squeeze = est.threshold_squeeze_m;
            assert!(
                (squeeze - truth).abs() < 1e-4,
                "mass {mass}: est {squeeze} truth {truth}"
            );
            let force = est.threshold_force_n.unwrap();
            let true_force = physics.holding_force(&spec, 0.0);
            assert!(
                (force - true_force).abs() < 0.05 * true_force,
                "mass {mass}: force {force} truth {true_force}"
            );
        }
    }

    #[test]
    fn validation() {
        assert!(OperatorParams::default().validate().is_ok());
        let bad = OperatorParams {
            stop_band_deg: 0.0,
            ..OperatorParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
