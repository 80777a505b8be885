//! Fingertip skin-deformation patterns for the two tactors of a station,
//! object-synchronised tracking targets, and a feature-based classifier
//! that stands in for a human judging which pattern was rendered.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ellipse, Point2};
use crate::station::Station;

/// Slack for floating-point round-off when checking samples against the target ellipse.
const ELLIPSE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Stretching,
    Slipping,
    Twisting,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Stretching, PatternKind::Slipping, PatternKind::Twisting];

    pub fn short_name(self) -> &'static str {
        match self {
            PatternKind::Stretching => "stretch",
            PatternKind::Slipping => "slip",
            PatternKind::Twisting => "twist",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PatternKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stretch" | "stretching" => Ok(PatternKind::Stretching),
            "slip" | "slipping" => Ok(PatternKind::Slipping),
            "twist" | "twisting" => Ok(PatternKind::Twisting),
            other => Err(format!("unknown pattern `{other}` (expected stretch, slip or twist)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("time {t} s is outside [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("tactor sample {point:?} leaves the fingertip target region")]
    WorkspaceExceeded { point: Point2 },
    #[error("invalid pattern parameters: {0}")]
    InvalidSpec(&'static str),
}

/// Parametric deformation pattern in a station frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub center: Point2,
    /// Stretch half-travel, slip half-height or twist radius, mm.
    pub amplitude: f64,
    pub duration: f64,
    /// Angle swept by the twisting pattern, radians.
    pub twist_sweep: f64,
    /// Region every sample must stay inside.
    pub bounds: Ellipse,
}

pub const DEFAULT_STRETCH_AMPLITUDE_MM: f64 = 4.0;
pub const DEFAULT_SLIP_AMPLITUDE_MM: f64 = 4.0;
pub const DEFAULT_TWIST_RADIUS_MM: f64 = 3.0;
pub const DEFAULT_PATTERN_DURATION_S: f64 = 1.5;

impl PatternSpec {
    /// Default pattern centred on the station's fingertip region.
    pub fn default_for(kind: PatternKind, station: &Station) -> Self {
        let amplitude = match kind {
            PatternKind::Stretching => DEFAULT_STRETCH_AMPLITUDE_MM,
            PatternKind::Slipping => DEFAULT_SLIP_AMPLITUDE_MM,
            PatternKind::Twisting => DEFAULT_TWIST_RADIUS_MM,
        };
        Self {
            kind,
            center: station.center(),
            amplitude,
            duration: DEFAULT_PATTERN_DURATION_S,
            twist_sweep: FRAC_PI_2,
            bounds: station.target,
        }
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(PatternError::InvalidSpec("amplitude must be positive"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(PatternError::InvalidSpec("duration must be positive"));
        }
        if !self.twist_sweep.is_finite() {
            return Err(PatternError::InvalidSpec("twist sweep must be finite"));
        }
        Ok(())
    }

    /// Samples at `rate_hz` from 0 to `duration` inclusive.
    pub fn sample(&self, rate_hz: f64) -> Result<Vec<TactorPair>, PatternError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(PatternError::InvalidSpec("sample rate must be positive"));
        }
        let steps = (self.duration * rate_hz).floor() as usize;
        (0..=steps)
            .map(|k| generate_pattern(self, (k as f64 / rate_hz).min(self.duration)))
            .collect()
    }
}

/// Contact targets for the two tactors of one station.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TactorPair {
    pub upper: Point2,
    pub lower: Point2,
    pub t: f64,
}

/// Tactor pair for pattern `spec` at time `t`.
pub fn generate_pattern(spec: &PatternSpec, t: f64) -> Result<TactorPair, PatternError> {
    spec.validate()?;
    if !(0.0..=spec.duration).contains(&t) {
        return Err(PatternError::OutOfRange {
            t,
            duration: spec.duration,
        });
    }
    let s = t / spec.duration;
    let c = spec.center;
    let a = spec.amplitude;
    let (upper, lower) = match spec.kind {
        PatternKind::Stretching => {
            let offset = Point2::new(a * s, 0.0);
            (c + offset, c - offset)
        }
        PatternKind::Slipping => {
            let p = c + Point2::new(0.0, a * (1.0 - 2.0 * s));
            (p, p)
        }
        PatternKind::Twisting => {
            let phi = spec.twist_sweep * s;
            (c + Point2::from_angle(phi) * a, c + Point2::from_angle(phi + PI) * a)
        }
    };
    for point in [upper, lower] {
        if spec.bounds.level(point) > 1.0 + ELLIPSE_SLACK {
            return Err(PatternError::WorkspaceExceeded { point });
        }
    }
    Ok(TactorPair { upper, lower, t })
}

/// Object-angle to tactor-angle mapping for synchronised tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncMapping {
    /// Circle radius about the fingertip centre, mm.
    pub radius: f64,
    /// Tactor rotation per unit object rotation.
    pub gain: f64,
    /// Angular separation of the two tactors, radians.
    pub phase_offset: f64,
}

impl Default for SyncMapping {
    fn default() -> Self {
        Self {
            radius: DEFAULT_TWIST_RADIUS_MM,
            gain: 1.0,
            phase_offset: PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncTargets {
    pub pair: TactorPair,
    /// At least one tactor was pulled back onto the target boundary.
    pub clamped: bool,
}

/// Tactor targets that follow the grasped object's rotation: the upper
/// tactor starts straight above the centre, the lower one antipodal to it.
pub fn object_sync_targets(theta_obj: f64, map: &SyncMapping, center: Point2, bounds: &Ellipse) -> SyncTargets {
    let phi = map.gain * theta_obj + FRAC_PI_2;
    let upper = center + Point2::from_angle(phi) * map.radius;
    let lower = center + Point2::from_angle(phi + map.phase_offset) * map.radius;
    let (upper, clamped_upper) = bounds.clamp(upper);
    let (lower, clamped_lower) = bounds.clamp(lower);
    SyncTargets {
        pair: TactorPair { upper, lower, t: 0.0 },
        clamped: clamped_upper || clamped_lower,
    }
}

/// Object angle encoded by a synchronised tactor pair (inverse of
/// [`object_sync_targets`] away from clamping).
pub fn decode_sync_angle(pair: &TactorPair, map: &SyncMapping) -> f64 {
    let v = pair.upper - pair.lower;
    (v.angle() - FRAC_PI_2) / map.gain
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("need at least {MIN_SAMPLES} samples spanning a positive time interval, got {samples}")]
    InsufficientData { samples: usize },
    #[error("no feature dominates: {0:?}")]
    Ambiguous(PatternFeatures),
}

pub const MIN_SAMPLES: usize = 10;
/// The winning feature must exceed the runner-up by this factor.
pub const DOMINANCE_RATIO: f64 = 2.0;
/// Features below this many millimetres are treated as absent.
pub const FEATURE_FLOOR_MM: f64 = 0.25;

/// Net motion features, all in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternFeatures {
    /// Change in tactor separation.
    pub stretch: f64,
    /// Common-mode vertical travel.
    pub slip: f64,
    /// Arc travelled by each tactor as the inter-tactor vector rotates.
    pub twist: f64,
}

/// Computes net features from the averages of the first and last quarter of
/// the trajectory.
pub fn pattern_features(trajectory: &[TactorPair]) -> Result<PatternFeatures, ClassifyError> {
    let n = trajectory.len();
    let span = match (trajectory.first(), trajectory.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    if n < MIN_SAMPLES || !(span > 0.0) {
        return Err(ClassifyError::InsufficientData { samples: n });
    }
    let window = (n / 4).max(1);
    let mean = |pairs: &[TactorPair], f: fn(&TactorPair) -> Point2| {
        pairs.iter().map(f).fold(Point2::ORIGIN, |acc, p| acc + p) * (1.0 / pairs.len() as f64)
    };
    let head = &trajectory[..window];
    let tail = &trajectory[n - window..];
    let rel = |p: &TactorPair| p.upper - p.lower;
    let mid = |p: &TactorPair| p.upper.lerp(p.lower, 0.5);

    let rel_head = mean(head, rel);
    let rel_tail = mean(tail, rel);
    let mid_head = mean(head, mid);
    let mid_tail = mean(tail, mid);

    let rotation = rel_head.cross(rel_tail).atan2(rel_head.dot(rel_tail));
    let radius = 0.25 * (rel_head.norm() + rel_tail.norm());
    Ok(PatternFeatures {
        stretch: (rel_tail.norm() - rel_head.norm()).abs(),
        slip: (mid_tail.y - mid_head.y).abs(),
        twist: rotation.abs() * radius,
    })
}

/// Labels a tactor trajectory with the pattern that most plausibly produced it.
pub fn classify_pattern(trajectory: &[TactorPair]) -> Result<PatternKind, ClassifyError> {
    let features = pattern_features(trajectory)?;
    let mut ranked = [
        (features.stretch, PatternKind::Stretching),
        (features.slip, PatternKind::Slipping),
        (features.twist, PatternKind::Twisting),
    ];
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best, kind) = ranked[0];
    let runner_up = ranked[1].0;
    if best < FEATURE_FLOOR_MM || best <= DOMINANCE_RATIO * runner_up {
        return Err(ClassifyError::Ambiguous(features));
    }
    Ok(kind)
}
