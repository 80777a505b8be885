use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::Condition;

/// Outcome of one trial. `error_deg` is signed (final − target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub condition: Condition,
    pub trial_index: usize,
    pub mass_kg: f64,
    pub target_deg: f64,
    pub final_deg: f64,
    pub error_deg: f64,
    pub time_s: f64,
    pub success: bool,
    pub timeout: bool,
    /// Grip lost entirely while the object was still short of the target
    /// band. Not part of the CSV log.
    #[serde(default)]
    pub dropped: bool,
}

impl TrialResult {
    pub fn angular_error(&self) -> f64 {
        self.error_deg.abs()
    }
}

pub const RESULTS_HEADER: &str = "condition,trial_index,mass_kg,target_deg,final_deg,error_deg,time_s,success,timeout";

/// Writes results with shortest round-trip float formatting, so the same
/// results always produce the same bytes and parse back exactly.
pub fn write_results_csv<W: Write>(mut out: W, results: &[TrialResult]) -> io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.condition,
            r.trial_index,
            r.mass_kg,
            r.target_deg,
            r.final_deg,
            r.error_deg,
            r.time_s,
            r.success,
            r.timeout
        )?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    condition: Condition,
    trial_index: usize,
    mass_kg: f64,
    target_deg: f64,
    final_deg: f64,
    error_deg: f64,
    time_s: f64,
    success: bool,
    timeout: bool,
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<TrialResult>, csv::Error> {
    csv::Reader::from_reader(input)
        .deserialize::<Row>()
        .map(|row| {
            row.map(|r| TrialResult {
                condition: r.condition,
                trial_index: r.trial_index,
                mass_kg: r.mass_kg,
                target_deg: r.target_deg,
                final_deg: r.final_deg,
                error_deg: r.error_deg,
                time_s: r.time_s,
                success: r.success,
                timeout: r.timeout,
                dropped: false,
            })
        })
        .collect()
}
