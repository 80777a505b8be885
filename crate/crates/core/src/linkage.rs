//! Positional kinematics of a single planar five-bar linkage.
//!
//! Two driven proximal links (`l1`, `l2`) rotate about the base joints `o1`,
//! `o2`; two distal links (`l3`, `l4`) close the chain at the tactor point.
//! Angles are measured counter-clockwise from the base-frame +x axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Point2, Segment};

/// Configurations closer than this to a degenerate distance are rejected.
pub const SINGULARITY_TOLERANCE_MM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("the two chains cannot close for these joint angles")]
    NoAssembly,
    #[error("singular configuration")]
    Singular,
    #[error("target is not reachable by chain {chain}")]
    Unreachable { chain: u8 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("link length {name} must be strictly positive, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("base joints coincide")]
    CoincidentBases,
    #[error("chains can never meet: total reach {reach} <= base separation {separation}")]
    Unworkable { reach: f64, separation: f64 },
    #[error("geometry values must be finite")]
    NonFinite,
}

/// Which of the two circle intersections the distal links close on.
///
/// `Positive` puts the tactor on the left of the directed line `A1 → A2`
/// (above the base line for a mechanism whose joints point up), `Negative`
/// on its right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Elbow {
    Positive,
    Negative,
}

impl Elbow {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Elbow::Positive => 1.0,
            Elbow::Negative => -1.0,
        }
    }
}

/// Base joints and link lengths of one mechanism, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageGeometry {
    pub o1: Point2,
    pub o2: Point2,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub elbow: Elbow,
}

/// Driven joint angles, radians in (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub theta1: f64,
    pub theta2: f64,
}

impl JointAngles {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self {
            theta1: normalize_angle(theta1),
            theta2: normalize_angle(theta2),
        }
    }

    pub fn from_degrees(theta1: f64, theta2: f64) -> Self {
        Self::new(theta1.to_radians(), theta2.to_radians())
    }
}

/// Link centre-lines of one mechanism in a given configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSegments {
    pub proximal1: Segment,
    pub proximal2: Segment,
    pub distal1: Segment,
    pub distal2: Segment,
}

impl LinkSegments {
    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        [&self.proximal1, &self.proximal2, &self.distal1, &self.distal2].into_iter()
    }

    /// Minimum centre-line distance between any link of `self` and any link of `other`.
    pub fn clearance(&self, other: &LinkSegments) -> f64 {
        self.iter()
            .flat_map(|a| other.iter().map(move |b| a.distance_to_segment(b)))
            .fold(f64::INFINITY, f64::min)
    }
}

impl LinkageGeometry {
    /// Validated constructor.
    pub fn new(o1: Point2, o2: Point2, lengths: [f64; 4], elbow: Elbow) -> Result<Self, GeometryError> {
        let geom = Self {
            o1,
            o2,
            l1: lengths[0],
            l2: lengths[1],
            l3: lengths[2],
            l4: lengths[3],
            elbow,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.o1.is_finite() && self.o2.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for (name, value) in [("l1", self.l1), ("l2", self.l2), ("l3", self.l3), ("l4", self.l4)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if value <= 0.0 {
                return Err(GeometryError::NonPositiveLength { name, value });
            }
        }
        let separation = self.o1.distance(self.o2);
        if separation == 0.0 {
            return Err(GeometryError::CoincidentBases);
        }
        let reach = self.l1 + self.l2 + self.l3 + self.l4;
        if reach <= separation {
            return Err(GeometryError::Unworkable { reach, separation });
        }
        Ok(())
    }

    /// Positions of the two intermediate (elbow) joints.
    pub fn intermediate_joints(&self, q: JointAngles) -> (Point2, Point2) {
        (
            self.o1 + Point2::from_angle(q.theta1) * self.l1,
            self.o2 + Point2::from_angle(q.theta2) * self.l2,
        )
    }

    /// Tactor position for the given joint angles.
    pub fn forward_kinematics(&self, q: JointAngles) -> Result<Point2, KinematicsError> {
        let (a1, a2) = self.intermediate_joints(q);
        self.close_chain(a1, a2)
    }

    /// Intersects the circles C(a1, l3) and C(a2, l4) on the configured branch.
    ///
    /// This is the rotation form `P = A1 + l3/|d| · R(±α) · d` with
    /// `cos α = (l3² − l4² + |d|²) / (2 l3 |d|)`, written with the rotation
    /// expanded so no `acos` round trip is needed.
    fn close_chain(&self, a1: Point2, a2: Point2) -> Result<Point2, KinematicsError> {
        let d = a2 - a1;
        let n = d.norm();
        if n < SINGULARITY_TOLERANCE_MM {
            return Err(KinematicsError::Singular);
        }
        if n > self.l3 + self.l4 - SINGULARITY_TOLERANCE_MM {
            return Err(KinematicsError::NoAssembly);
        }
        let inner = (self.l3 - self.l4).abs();
        if inner > 0.0 && n < inner + SINGULARITY_TOLERANCE_MM {
            return Err(KinematicsError::NoAssembly);
        }
        let along = (self.l3 * self.l3 - self.l4 * self.l4 + n * n) / (2.0 * n);
        let across = (self.l3 * self.l3 - along * along).max(0.0).sqrt();
        let u = d * (1.0 / n);
        Ok(a1 + u * along + u.perp() * (self.elbow.sign() * across))
    }

    /// Tactor position that never fails: when the sensed angles cannot
    /// assemble, returns the point on the line `A1 → A2` that splits the
    /// closure error between the two distal links. Used for state estimation
    /// from noisy sensors, not for planning.
    pub fn forward_kinematics_relaxed(&self, q: JointAngles) -> Point2 {
        let (a1, a2) = self.intermediate_joints(q);
        match self.close_chain(a1, a2) {
            Ok(p) => p,
            Err(_) => {
                let d = a2 - a1;
                let n = d.norm();
                if n < SINGULARITY_TOLERANCE_MM {
                    return a1;
                }
                let along = (self.l3 * self.l3 - self.l4 * self.l4 + n * n) / (2.0 * n);
                a1 + d * (along / n)
            }
        }
    }

    /// Joint angles placing the tactor at `p`.
    pub fn inverse_kinematics(&self, p: Point2) -> Result<JointAngles, KinematicsError> {
        let s = self.elbow.sign();
        let (a1_pos, a1_neg) = self.elbow_candidates(self.o1, self.l1, self.l3, p, 1)?;
        let (a2_pos, a2_neg) = self.elbow_candidates(self.o2, self.l2, self.l4, p, 2)?;
        let pick = |positive: bool, pos: Point2, neg: Point2| if positive { pos } else { neg };

        // Outward elbows first, then the remaining working modes.
        let modes = [
            (s > 0.0, s < 0.0),
            (s > 0.0, s > 0.0),
            (s < 0.0, s < 0.0),
            (s < 0.0, s > 0.0),
        ];
        for (first_positive, second_positive) in modes {
            let a1 = pick(first_positive, a1_pos, a1_neg);
            let a2 = pick(second_positive, a2_pos, a2_neg);
            if self.assembles_at(a1, a2, p) {
                return Ok(JointAngles::new((a1 - self.o1).angle(), (a2 - self.o2).angle()));
            }
        }
        Err(KinematicsError::Unreachable { chain: 0 })
    }

    /// Both elbow positions of one chain reaching `p`: `(rotated +α, rotated −α)`.
    fn elbow_candidates(
        &self,
        base: Point2,
        proximal: f64,
        distal: f64,
        p: Point2,
        chain: u8,
    ) -> Result<(Point2, Point2), KinematicsError> {
        let r = p - base;
        let dist = r.norm();
        if dist < SINGULARITY_TOLERANCE_MM {
            return Err(KinematicsError::Singular);
        }
        if dist > proximal + distal || dist < (proximal - distal).abs() {
            return Err(KinematicsError::Unreachable { chain });
        }
        let cos_alpha =
            ((proximal * proximal - distal * distal + dist * dist) / (2.0 * proximal * dist)).clamp(-1.0, 1.0);
        let alpha = cos_alpha.acos();
        let scaled = r * (proximal / dist);
        Ok((base + scaled.rotated(alpha), base + scaled.rotated(-alpha)))
    }

    /// Whether elbows `a1`, `a2` close on `p` with the configured branch.
    fn assembles_at(&self, a1: Point2, a2: Point2, p: Point2) -> bool {
        let d = a2 - a1;
        let n = d.norm();
        if n < SINGULARITY_TOLERANCE_MM || n > self.l3 + self.l4 - SINGULARITY_TOLERANCE_MM {
            return false;
        }
        let inner = (self.l3 - self.l4).abs();
        if inner > 0.0 && n < inner + SINGULARITY_TOLERANCE_MM {
            return false;
        }
        self.elbow.sign() * d.cross(p - a1) > 0.0
    }

    /// Annulus test for both chains.
    pub fn is_reachable(&self, p: Point2) -> bool {
        let within = |base: Point2, proximal: f64, distal: f64| {
            let dist = p.distance(base);
            (proximal - distal).abs() <= dist && dist <= proximal + distal
        };
        within(self.o1, self.l1, self.l3) && within(self.o2, self.l2, self.l4)
    }

    /// Link centre-lines for the given configuration. Returns `None` if the
    /// chains do not assemble.
    pub fn link_segments(&self, q: JointAngles) -> Option<LinkSegments> {
        let (a1, a2) = self.intermediate_joints(q);
        let p = self.close_chain(a1, a2).ok()?;
        Some(LinkSegments {
            proximal1: Segment::new(self.o1, a1),
            proximal2: Segment::new(self.o2, a2),
            distal1: Segment::new(a1, p),
            distal2: Segment::new(a2, p),
        })
    }

    /// Link centre-lines using [`Self::forward_kinematics_relaxed`] for the tactor.
    pub fn link_segments_relaxed(&self, q: JointAngles) -> LinkSegments {
        let (a1, a2) = self.intermediate_joints(q);
        let p = self.forward_kinematics_relaxed(q);
        LinkSegments {
            proximal1: Segment::new(self.o1, a1),
            proximal2: Segment::new(self.o2, a2),
            distal1: Segment::new(a1, p),
            distal2: Segment::new(a2, p),
        }
    }

    /// Signed distance of `p` from the base line, positive on the side the
    /// configured elbow branch bends towards.
    pub fn side_of_base(&self, p: Point2) -> f64 {
        let base = self.o2 - self.o1;
        self.elbow.sign() * base.cross(p - self.o1) / base.norm()
    }

    /// Midpoint of the two base joints.
    pub fn base_midpoint(&self) -> Point2 {
        self.o1.lerp(self.o2, 0.5)
    }

    /// Largest distance from a base joint to a reachable point.
    pub fn max_reach(&self) -> f64 {
        (self.l1 + self.l3).max(self.l2 + self.l4)
    }
}
