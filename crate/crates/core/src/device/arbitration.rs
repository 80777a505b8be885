//! Upper-priority collision arbitration between the two mechanisms of a station.
//!
//! Links are treated as bars around their centre-lines; two mechanisms
//! collide when any pair of centre-lines comes closer than the clearance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::linkage::{JointAngles, KinematicsError, LinkSegments, LinkageGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbitrationParams {
    /// Minimum centre-line distance between links of different mechanisms, mm.
    pub clearance_min: f64,
    /// Directions per ring in the coarse pass.
    pub directions: usize,
    /// Radial step between coarse rings, mm.
    pub step: f64,
    /// Angular and radial subdivision of the fine pass.
    pub refinement: usize,
    /// Largest displacement tried before giving up, mm.
    pub max_radius: f64,
}

impl Default for ArbitrationParams {
    fn default() -> Self {
        Self {
            clearance_min: 1.5,
            directions: 72,
            step: 0.25,
            refinement: 4,
            max_radius: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ArbitrationError {
    #[error("no reachable lower target restores the clearance")]
    NoFeasibleLowerTarget,
    #[error("{mechanism} target rejected: {source}")]
    Kinematics {
        mechanism: &'static str,
        source: KinematicsError,
    },
}

/// Outcome of arbitrating one pair of targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arbitration {
    pub upper: Point2,
    pub lower: Point2,
    pub upper_angles: JointAngles,
    pub lower_angles: JointAngles,
    pub active: bool,
    /// Link clearance of the returned configuration, mm.
    pub clearance: f64,
}

fn configuration(geom: &LinkageGeometry, p: Point2) -> Option<(JointAngles, LinkSegments)> {
    let q = geom.inverse_kinematics(p).ok()?;
    Some((q, geom.link_segments(q)?))
}

/// Keeps the upper target and, if the lower mechanism would come closer
/// than the clearance, moves the lower target to the nearest candidate on a
/// polar grid around it (rings outward, directions counter-clockwise from +x)
/// that restores the clearance.
pub fn arbitrate_collision(
    upper_target: Point2,
    lower_target: Point2,
    geom_upper: &LinkageGeometry,
    geom_lower: &LinkageGeometry,
    params: &ArbitrationParams,
) -> Result<Arbitration, ArbitrationError> {
    let ik_error = |mechanism, geom: &LinkageGeometry, p| {
        let source = geom.inverse_kinematics(p).err().unwrap_or(KinematicsError::NoAssembly);
        ArbitrationError::Kinematics { mechanism, source }
    };
    let (upper_angles, upper_links) =
        configuration(geom_upper, upper_target).ok_or_else(|| ik_error("upper", geom_upper, upper_target))?;
    let (lower_angles, lower_links) =
        configuration(geom_lower, lower_target).ok_or_else(|| ik_error("lower", geom_lower, lower_target))?;

    let clearance = upper_links.clearance(&lower_links);
    if clearance >= params.clearance_min {
        return Ok(Arbitration {
            upper: upper_target,
            lower: lower_target,
            upper_angles,
            lower_angles,
            active: false,
            clearance,
        });
    }

    let feasible = |radius: f64, directions: usize| {
        (0..directions).find_map(|k| {
            let direction = std::f64::consts::TAU * k as f64 / directions as f64;
            let candidate = lower_target + Point2::from_angle(direction) * radius;
            let (angles, links) = configuration(geom_lower, candidate)?;
            let clearance = upper_links.clearance(&links);
            (clearance >= params.clearance_min).then_some(Arbitration {
                upper: upper_target,
                lower: candidate,
                upper_angles,
                lower_angles: angles,
                active: true,
                clearance,
            })
        })
    };

    // Coarse rings find the first radius with a clear candidate; a finer
    // grid over the two rings below it then tightens the displacement.
    let rings = (params.max_radius / params.step).floor() as usize;
    let Some((ring, coarse)) =
        (1..=rings).find_map(|ring| feasible(ring as f64 * params.step, params.directions).map(|a| (ring, a)))
    else {
        return Err(ArbitrationError::NoFeasibleLowerTarget);
    };
    let n = params.refinement.max(1);
    let fine_step = params.step / n as f64;
    let first = (ring.saturating_sub(2) * n).max(1);
    for sub in first..ring * n {
        if let Some(found) = feasible(sub as f64 * fine_step, params.directions * n) {
            return Ok(found);
        }
    }
    Ok(coarse)
}
