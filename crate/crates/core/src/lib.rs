//! Simulation core for a two-station cutaneous feedback device: five-bar
//! tactor kinematics, the device control loop, passive-pivoting grasp
//! physics and the pivoting trial protocol.

pub mod config;
pub mod device;
pub mod geometry;
pub mod harness;
pub mod linkage;
pub mod patterns;
pub mod pivot;
pub mod protocol;
pub mod session;
pub mod station;
pub mod workspace;

pub use geometry::{Ellipse, Point2};
pub use linkage::{Elbow, JointAngles, KinematicsError, LinkageGeometry};
pub use station::{Finger, Mechanism, Station};
