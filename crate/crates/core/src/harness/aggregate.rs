use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, TrialResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no results to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Condition,
    /// Condition × target angle (completion time per angle).
    ConditionTarget,
    /// Condition × (mass, angle) case.
    ConditionCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    #[serde(flatten)]
    pub key: GroupKey,
    pub trials: usize,
    pub successes: usize,
    pub timeouts: usize,
    pub success_ratio_pct: f64,
    /// Mean of |error|, deg.
    pub mean_abs_error_deg: f64,
    /// Sample standard deviation of |error|, deg.
    pub std_abs_error_deg: f64,
    pub mean_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub grouping: Grouping,
    pub groups: Vec<GroupStats>,
}

impl SummaryStats {
    pub fn group(&self, condition: Condition) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.key.condition == condition)
    }
}

pub fn aggregate(results: &[TrialResult], by: Grouping) -> Result<SummaryStats, AggregateError> {
    if results.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    // Keyed on condition order, then mass and angle bit patterns (all positive).
    let mut buckets: BTreeMap<(usize, u64, u64), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        let cond = Condition::ALL.iter().position(|c| *c == r.condition).unwrap_or(0);
        let key = match by {
            Grouping::Condition => (cond, 0, 0),
            Grouping::ConditionTarget => (cond, 0, r.target_deg.to_bits()),
            Grouping::ConditionCase => (cond, r.mass_kg.to_bits(), r.target_deg.to_bits()),
        };
        buckets.entry(key).or_default().push(r);
    }
    let groups = buckets
        .into_values()
        .map(|rs| {
            let first = rs[0];
            let key = GroupKey {
                condition: first.condition,
                mass_kg: (by == Grouping::ConditionCase).then_some(first.mass_kg),
                target_deg: (by != Grouping::Condition).then_some(first.target_deg),
            };
            stats(key, &rs)
        })
        .collect();
    Ok(SummaryStats { grouping: by, groups })
}

fn stats(key: GroupKey, rs: &[&TrialResult]) -> GroupStats {
    let n = rs.len();
    let successes = rs.iter().filter(|r| r.success).count();
    let errors: Vec<f64> = rs.iter().map(|r| r.angular_error()).collect();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    GroupStats {
        key,
        trials: n,
        successes,
        timeouts: rs.iter().filter(|r| r.timeout).count(),
        success_ratio_pct: 100.0 * successes as f64 / n as f64,
        mean_abs_error_deg: mean,
        std_abs_error_deg: std,
        mean_time_s: rs.iter().map(|r| r.time_s).sum::<f64>() / n as f64,
    }
}
