//! Device stations: one per finger, each with a lower and an upper five-bar
//! mechanism sharing the fingertip region.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{Ellipse, Point2};
use crate::linkage::{Elbow, GeometryError, LinkageGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Index,
    Thumb,
}

impl Finger {
    pub const ALL: [Finger; 2] = [Finger::Index, Finger::Thumb];

    pub fn as_str(self) -> &'static str {
        match self {
            Finger::Index => "index",
            Finger::Thumb => "thumb",
        }
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Finger {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "index" => Ok(Finger::Index),
            "thumb" => Ok(Finger::Thumb),
            other => Err(format!("unknown finger `{other}` (expected index or thumb)")),
        }
    }
}

/// Which of the two mechanisms of a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Lower,
    Upper,
}

/// Station dimensions as written in the configuration file, millimetres.
///
/// `o1`/`o2` are the lower mechanism's base joints, `o3`/`o4` the upper's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationDimensions {
    pub o1: [f64; 2],
    pub o2: [f64; 2],
    pub o3: [f64; 2],
    pub o4: [f64; 2],
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    /// Full width and height of the fingertip target region.
    pub target_mm: [f64; 2],
}

impl StationDimensions {
    pub fn index() -> Self {
        Self {
            o1: [0.0, 0.0],
            o2: [12.5, 0.0],
            o3: [0.0, 31.0],
            o4: [12.5, 31.0],
            l1: 9.0,
            l2: 9.0,
            l3: 15.0,
            l4: 15.0,
            target_mm: [15.0, 12.0],
        }
    }

    pub fn thumb() -> Self {
        Self {
            o1: [0.0, 0.0],
            o2: [12.5, 0.0],
            o3: [0.0, 35.0],
            o4: [12.5, 35.0],
            l1: 9.0,
            l2: 9.0,
            l3: 17.5,
            l4: 17.5,
            target_mm: [15.0, 14.0],
        }
    }

    pub fn for_finger(finger: Finger) -> Self {
        match finger {
            Finger::Index => Self::index(),
            Finger::Thumb => Self::thumb(),
        }
    }
}

/// Both mechanisms of a station plus its fingertip target region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub finger: Finger,
    pub lower: LinkageGeometry,
    pub upper: LinkageGeometry,
    pub target: Ellipse,
}

impl Station {
    pub fn from_dimensions(finger: Finger, dims: &StationDimensions) -> Result<Self, GeometryError> {
        let pt = |p: [f64; 2]| Point2::new(p[0], p[1]);
        let lengths = [dims.l1, dims.l2, dims.l3, dims.l4];
        // The lower mechanism bends up towards the fingertip, the upper one down.
        let lower = LinkageGeometry::new(pt(dims.o1), pt(dims.o2), lengths, Elbow::Positive)?;
        let upper = LinkageGeometry::new(pt(dims.o3), pt(dims.o4), lengths, Elbow::Negative)?;
        let lower_mid = lower.base_midpoint();
        let upper_mid = upper.base_midpoint();
        let center = lower_mid.lerp(upper_mid, 0.5);
        let target = Ellipse::from_extent(center, dims.target_mm[0], dims.target_mm[1]);
        Ok(Self {
            finger,
            lower,
            upper,
            target,
        })
    }

    pub fn default_for(finger: Finger) -> Self {
        Self::from_dimensions(finger, &StationDimensions::for_finger(finger))
            .expect("built-in station dimensions are valid")
    }

    pub fn mechanism(&self, which: Mechanism) -> &LinkageGeometry {
        match which {
            Mechanism::Lower => &self.lower,
            Mechanism::Upper => &self.upper,
        }
    }

    pub fn center(&self) -> Point2 {
        self.target.center
    }
}
