//! Passive-pivoting grasp physics: a parallel-jaw gripper squeezing a rigid
//! cylinder that gravity rotates about the grasp axis against torsional
//! Coulomb friction at the two finger contacts.
//!
//! Angles: `theta = 0` is the horizontal start pose, `theta = π/2` the
//! hanging equilibrium.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_MASSES_KG: [f64; 3] = [0.005, 0.01, 0.02];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectError {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("diameter and length must be positive")]
    NonPositiveSize,
    #[error("grasp offset {offset} must lie in [0, length/2 = {half_length}]")]
    GraspOffset { offset: f64, half_length: f64 },
}

/// Grasped cylinder, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub mass: f64,
    pub diameter: f64,
    pub length: f64,
    /// Distance from the grasp axis to the centre of mass along the cylinder.
    pub grasp_offset: f64,
}

impl ObjectSpec {
    pub const DEFAULT_DIAMETER: f64 = 0.015;
    pub const DEFAULT_LENGTH: f64 = 0.10;
    pub const DEFAULT_GRASP_OFFSET: f64 = 0.04;

    pub fn with_mass(mass: f64) -> Self {
        Self {
            mass,
            diameter: Self::DEFAULT_DIAMETER,
            length: Self::DEFAULT_LENGTH,
            grasp_offset: Self::DEFAULT_GRASP_OFFSET,
        }
    }

    pub fn validate(&self) -> Result<(), ObjectError> {
        if !(self.mass > 0.0) {
            return Err(ObjectError::NonPositiveMass(self.mass));
        }
        if !(self.diameter > 0.0 && self.length > 0.0) {
            return Err(ObjectError::NonPositiveSize);
        }
        let half_length = self.length / 2.0;
        if !(0.0..=half_length).contains(&self.grasp_offset) {
            return Err(ObjectError::GraspOffset {
                offset: self.grasp_offset,
                half_length,
            });
        }
        Ok(())
    }

    /// Moment of inertia about the grasp axis (transverse axis through the
    /// grasp point), kg·m².
    pub fn inertia(&self) -> f64 {
        let m = self.mass;
        m * (self.length * self.length / 12.0 + self.diameter * self.diameter / 16.0)
            + m * self.grasp_offset * self.grasp_offset
    }

    pub fn gravity_torque(&self, theta: f64, g: f64) -> f64 {
        self.mass * g * self.grasp_offset * theta.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactMode {
    Stick,
    Slip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotState {
    pub theta: f64,
    pub omega: f64,
    pub mode: ContactMode,
    pub normal_force: f64,
    /// Gripper finger separation, m.
    pub aperture: f64,
}

impl PivotState {
    /// Held at rest in the horizontal pose.
    pub fn at_rest(aperture: f64, normal_force: f64) -> Self {
        Self {
            theta: 0.0,
            omega: 0.0,
            mode: ContactMode::Stick,
            normal_force,
            aperture,
        }
    }
}

/// Contact, friction and gripper constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    pub gravity: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    /// Effective torsional radius of each fingertip contact patch, m.
    pub patch_radius: f64,
    /// Viscous rotational damping, N·m·s.
    pub viscous: f64,
    /// Speed below which a slipping object may be captured, rad/s.
    pub omega_eps: f64,
    /// Penalty stiffness of the finger/object contact, N/m.
    pub contact_stiffness: f64,
    /// Gripper position-tracking bandwidth, rad/s.
    pub gripper_bandwidth: f64,
    /// Physics substep, s.
    pub substep: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            mu_static: 0.6,
            mu_kinetic: 0.45,
            patch_radius: 0.002,
            viscous: 1e-5,
            omega_eps: 1e-3,
            contact_stiffness: 2000.0,
            gripper_bandwidth: 40.0,
            substep: 0.001,
        }
    }
}

impl PhysicsParams {
    /// Normal force at which static friction just holds `spec` at `theta`.
    pub fn holding_force(&self, spec: &ObjectSpec, theta: f64) -> f64 {
        spec.gravity_torque(theta, self.gravity).abs() / (2.0 * self.mu_static * self.patch_radius)
    }

    /// Largest aperture that still produces `force` on `spec`.
    pub fn aperture_for_force(&self, spec: &ObjectSpec, force: f64) -> f64 {
        spec.diameter - force.max(0.0) / self.contact_stiffness
    }
}

/// Virtual-fixture parameters for the grasp-force feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureParams {
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// Leader gripper position where the fixture engages, m.
    pub engage_at: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            stiffness: 1000.0,
            damping: 5.0,
            engage_at: ObjectSpec::DEFAULT_DIAMETER,
        }
    }
}

/// Spring-damper force rendered on the leader gripper once it closes past
/// the fixture: `K (x − X) + D ẋ` while `x < X`, zero outside. Negative
/// values push the leader's fingers apart.
pub fn virtual_fixture_force(x_leader: f64, xdot_leader: f64, params: &FixtureParams) -> f64 {
    if x_leader < params.engage_at {
        params.stiffness * (x_leader - params.engage_at) + params.damping * xdot_leader
    } else {
        0.0
    }
}

/// Penalty normal force between the gripper fingers and the cylinder.
pub fn grip_contact_force(aperture: f64, spec: &ObjectSpec, contact_stiffness: f64) -> f64 {
    if aperture < spec.diameter {
        contact_stiffness * (spec.diameter - aperture)
    } else {
        0.0
    }
}

/// Torsional friction torque two contact patches can transmit.
pub fn friction_torque_capacity(normal_force: f64, mu: f64, patch_radius: f64) -> f64 {
    2.0 * mu * normal_force * patch_radius
}

/// Energy bookkeeping for one substep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Energy removed by kinetic friction, J.
    pub friction_work: f64,
    /// Energy removed by viscous damping, J.
    pub viscous_work: f64,
}

/// Advances the pivot by one substep under grip force `normal_force`.
///
/// While sticking, the angle is frozen as long as gravity stays within the
/// static capacity. While slipping, gravity and viscous damping give a free
/// update and kinetic friction is applied as a velocity impulse clamped so
/// it can stop the rotation but never reverse it. The angle advances with
/// the mean of the old and new velocity.
pub fn pivot_step(
    state: &PivotState,
    spec: &ObjectSpec,
    normal_force: f64,
    params: &PhysicsParams,
    dt: f64,
) -> (PivotState, StepReport) {
    let mut next = PivotState { normal_force, ..*state };
    let tau_g = spec.gravity_torque(state.theta, params.gravity);
    let static_cap = friction_torque_capacity(normal_force, params.mu_static, params.patch_radius);

    if normal_force <= 0.0 {
        next.mode = ContactMode::Slip;
    } else if state.mode == ContactMode::Stick && tau_g.abs() <= static_cap {
        next.omega = 0.0;
        return (next, StepReport::default());
    }

    let inertia = spec.inertia();
    let omega_free = state.omega + (tau_g - params.viscous * state.omega) / inertia * dt;
    let kinetic = friction_torque_capacity(normal_force, params.mu_kinetic, params.patch_radius);
    let impulse_cap = kinetic / inertia * dt;
    let applied = omega_free.abs().min(impulse_cap);
    let omega = omega_free - omega_free.signum() * applied;

    next.omega = omega;
    next.theta = state.theta + 0.5 * (state.omega + omega) * dt;
    next.mode = ContactMode::Slip;

    let report = StepReport {
        friction_work: applied * inertia * omega.abs(),
        viscous_work: params.viscous * state.omega * state.omega * dt,
    };

    let tau_next = spec.gravity_torque(next.theta, params.gravity);
    if normal_force > 0.0 && omega.abs() < params.omega_eps && tau_next.abs() <= static_cap {
        next.mode = ContactMode::Stick;
        next.omega = 0.0;
    }
    (next, report)
}

/// Gripper follower tracking the leader aperture with a critically damped
/// PD loop. Both closed-loop poles sit at `2·bandwidth`, which makes the
/// ramp-following lag `rate / bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub aperture: f64,
    pub velocity: f64,
    pub bandwidth: f64,
}

impl Gripper {
    pub fn at_rest(aperture: f64, bandwidth: f64) -> Self {
        Self {
            aperture,
            velocity: 0.0,
            bandwidth,
        }
    }

    /// One semi-implicit Euler step towards `aperture_cmd`; returns the new aperture.
    pub fn track(&mut self, aperture_cmd: f64, dt: f64) -> f64 {
        let pole = 2.0 * self.bandwidth;
        let accel = pole * pole * (aperture_cmd - self.aperture) - 2.0 * pole * self.velocity;
        self.velocity += accel * dt;
        self.aperture = (self.aperture + self.velocity * dt).max(0.0);
        self.aperture
    }
}

/// Stateless form of [`Gripper::track`] for a gripper currently at rest.
pub fn gripper_track(aperture_cmd: f64, aperture: f64, dt: f64, bandwidth: f64) -> f64 {
    Gripper::at_rest(aperture, bandwidth).track(aperture_cmd, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixture_force_examples() {
        let params = FixtureParams::default();
        assert_eq!(virtual_fixture_force(params.engage_at, 0.0, &params), 0.0);
        let f = virtual_fixture_force(params.engage_at - 0.003, 0.0, &params);
        assert_abs_diff_eq!(f.abs(), 3.0, epsilon = 1e-12);
        let stiff = FixtureParams {
            stiffness: 2000.0,
            ..params
        };
        let f2 = virtual_fixture_force(params.engage_at - 0.006, 0.0, &stiff);
        assert_abs_diff_eq!(f2, 4.0 * f, epsilon = 1e-12);
        assert_eq!(virtual_fixture_force(params.engage_at + 0.001, -0.1, &params), 0.0);
    }

    #[test]
    fn fixture_force_is_continuous_at_contact() {
        let params = FixtureParams::default();
        for depth in [1e-3, 1e-6, 1e-9, 1e-12] {
            assert!(
                virtual_fixture_force(params.engage_at - depth, 0.0, &params).abs() <= params.stiffness * depth + 1e-9
            );
        }
    }

    #[test]
    fn contact_force_examples() {
        let spec = ObjectSpec::with_mass(0.01);
        assert_eq!(grip_contact_force(spec.diameter, &spec, 2000.0), 0.0);
        assert_abs_diff_eq!(
            grip_contact_force(spec.diameter - 0.001, &spec, 2000.0),
            2.0,
            epsilon = 1e-9
        );
        assert_eq!(grip_contact_force(spec.diameter + 0.001, &spec, 2000.0), 0.0);
    }

    #[test]
    fn released_object_slips() {
        let spec = ObjectSpec::with_mass(0.01);
        let params = PhysicsParams::default();
        let held = PivotState::at_rest(0.0, 5.0);
        let force = grip_contact_force(spec.diameter + 0.001, &spec, params.contact_stiffness);
        let (next, _) = pivot_step(&held, &spec, force, &params, 0.001);
        assert_eq!(next.mode, ContactMode::Slip);
        assert!(next.theta > 0.0);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(friction_torque_capacity(0.0, 0.6, 0.002), 0.0);
        // 2 · 0.6 · 1.635 · 0.002
        assert_abs_diff_eq!(friction_torque_capacity(1.635, 0.6, 0.002), 3.924e-3, epsilon = 1e-12);
        assert_abs_diff_eq!(
            friction_torque_capacity(3.27, 0.6, 0.002),
            2.0 * friction_torque_capacity(1.635, 0.6, 0.002),
            epsilon = 1e-15
        );
    }

    #[test]
    fn strong_grip_sticks_for_ten_seconds() {
        let params = PhysicsParams::default();
        for mass in PROTOCOL_MASSES_KG {
            let spec = ObjectSpec::with_mass(mass);
            let force = 2.0 * params.holding_force(&spec, 0.0);
            for deg in [0.0f64, 25.0, 45.0, 75.0] {
                let start = PivotState {
                    theta: deg.to_radians(),
                    ..PivotState::at_rest(0.0, force)
                };
                let mut s = start;
                for _ in 0..10_000 {
                    s = pivot_step(&s, &spec, force, &params, 0.001).0;
                }
                assert_eq!(s.theta, start.theta);
                assert_eq!(s.omega, 0.0);
                assert_eq!(s.mode, ContactMode::Stick);
            }
        }
    }

    #[test]
    fn object_spec_validation() {
        assert!(ObjectSpec::with_mass(0.01).validate().is_ok());
        assert!(matches!(
            ObjectSpec::with_mass(0.0).validate(),
            Err(ObjectError::NonPositiveMass(_))
        ));
        let far = ObjectSpec {
            grasp_offset: 0.06,
            ..ObjectSpec::with_mass(0.01)
        };
        assert!(matches!(far.validate(), Err(ObjectError::GraspOffset { .. })));
    }

    #[test]
    fn gripper_equilibrium_and_step() {
        let mut g = Gripper::at_rest(0.01, 40.0);
        assert_eq!(g.track(0.01, 0.001), 0.01);
        assert_eq!(gripper_track(0.01, 0.01, 0.001, 40.0), 0.01);

        let mut g = Gripper::at_rest(0.0, 40.0);
        let steps = (5.0 / 40.0 / 0.001f64).round() as usize;
        for _ in 0..steps {
            g.track(0.01, 0.001);
        }
        assert!(g.aperture >= 0.98 * 0.01);
    }
}
