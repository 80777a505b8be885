//! Pivoting trial protocol: randomised mass × target-angle schedules under
//! four feedback conditions, a closed-loop trial runner, a scripted
//! operator, and result aggregation.

pub mod aggregate;
pub mod operator;
pub mod results;
pub mod trial;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pivot::PROTOCOL_MASSES_KG;

pub use aggregate::{aggregate, AggregateError, Grouping, SummaryStats};
pub use operator::{calibrate_threshold, run_scripted_protocol, Calibration, OperatorParams, ScriptedOperator};
pub use results::{read_results_csv, write_results_csv, TrialResult};
pub use trial::{
    run_protocol, run_protocol_observed, run_trial, Observation, Operator, TickSample, TrialOutcome, TrialRunner,
};

pub const PROTOCOL_TARGETS_DEG: [f64; 3] = [25.0, 45.0, 75.0];
pub const REPETITIONS: usize = 5;
pub const TRIALS_PER_CONDITION: usize = PROTOCOL_MASSES_KG.len() * PROTOCOL_TARGETS_DEG.len() * REPETITIONS;

/// Feedback available to the operator. Visual feedback is always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Condition {
    grasp_force: bool,
    tactile: bool,
}

impl Condition {
    pub const VF: Condition = Condition::new(false, false);
    pub const VF_GF: Condition = Condition::new(true, false);
    pub const VF_TF: Condition = Condition::new(false, true);
    pub const VF_GF_TF: Condition = Condition::new(true, true);
    pub const ALL: [Condition; 4] = [Condition::VF, Condition::VF_GF, Condition::VF_TF, Condition::VF_GF_TF];

    pub const fn new(grasp_force: bool, tactile: bool) -> Self {
        Self { grasp_force, tactile }
    }

    pub fn visual(&self) -> bool {
        true
    }

    pub fn grasp_force(&self) -> bool {
        self.grasp_force
    }

    pub fn tactile(&self) -> bool {
        self.tactile
    }

    pub fn label(&self) -> &'static str {
        match (self.grasp_force, self.tactile) {
            (false, false) => "VF",
            (true, false) => "VF+GF",
            (false, true) => "VF+TF",
            (true, true) => "VF+GF+TF",
        }
    }

    fn ordinal(&self) -> u64 {
        Condition::ALL.iter().position(|c| c == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut gf = false;
        let mut tf = false;
        let mut vf = false;
        for part in s.split('+').map(|p| p.trim().to_ascii_uppercase()) {
            match part.as_str() {
                "VF" => vf = true,
                "GF" => gf = true,
                "TF" => tf = true,
                other => return Err(format!("unknown feedback channel `{other}`")),
            }
        }
        if !vf {
            return Err(format!("condition `{s}` must include VF"));
        }
        Ok(Condition::new(gf, tf))
    }
}

impl TryFrom<String> for Condition {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> String {
        c.label().to_string()
    }
}

/// One pivoting trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub mass: f64,
    pub target_angle_deg: f64,
    pub condition: Condition,
    pub trial_index: usize,
    pub seed: u64,
}

/// Protocol-level constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub timeout_s: f64,
    /// Stick duration that counts as the operator's final stabilisation.
    pub completion_hold_s: f64,
    pub success_threshold_deg: f64,
    pub visual_latency_s: f64,
    pub force_latency_s: f64,
    pub tactile_latency_s: f64,
    /// How far the gripper closes past the object diameter at trial start, m.
    pub initial_squeeze_m: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            timeout_s: 30.0,
            completion_hold_s: 0.5,
            success_threshold_deg: 10.0,
            visual_latency_s: 0.100,
            force_latency_s: 0.020,
            tactile_latency_s: 0.020,
            initial_squeeze_m: 0.004,
        }
    }
}

/// Mixes a master seed with a stream index (splitmix64 finaliser).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The 9 mass × angle cases, each repeated five times, in a seeded random order.
pub fn build_trial_schedule(condition: Condition, seed: u64) -> Vec<TrialConfig> {
    let mut cases = Vec::with_capacity(TRIALS_PER_CONDITION);
    for _ in 0..REPETITIONS {
        for &mass in &PROTOCOL_MASSES_KG {
            for &target in &PROTOCOL_TARGETS_DEG {
                cases.push((mass, target));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases.shuffle(&mut rng);
    cases
        .into_iter()
        .enumerate()
        .map(|(trial_index, (mass, target_angle_deg))| TrialConfig {
            mass,
            target_angle_deg,
            condition,
            trial_index,
            seed: rng.next_u64(),
        })
        .collect()
}

/// Schedule seed for `condition` within a protocol run under `master_seed`.
pub fn condition_seed(master_seed: u64, condition: Condition) -> u64 {
    derive_seed(master_seed, condition.ordinal())
}
