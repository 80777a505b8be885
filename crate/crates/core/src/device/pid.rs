use serde::{Deserialize, Serialize};

use crate::geometry::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    /// V/rad
    pub kp: f64,
    /// V/(rad·s)
    pub ki: f64,
    /// V·s/rad
    pub kd: f64,
    /// Bound on the integral contribution, V.
    pub integral_limit: f64,
    /// Output saturation, V.
    pub output_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 10.0,
            ki: 8.0,
            kd: 0.1,
            integral_limit: 1.0,
            output_limit: 6.0,
        }
    }
}

/// Position PID on a wrapped angle error. The integral state is stored as
/// its voltage contribution so the anti-windup bound is in volts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidController {
    pub gains: PidGains,
    pub dt: f64,
    integral: f64,
    previous_error: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains, dt: f64) -> Self {
        assert!(dt > 0.0, "PID period must be positive");
        Self {
            gains,
            dt,
            integral: 0.0,
            previous_error: None,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.previous_error = None;
    }

    /// One controller update; returns the saturated command voltage.
    pub fn step(&mut self, target: f64, actual: f64) -> f64 {
        let g = self.gains;
        let error = normalize_angle(target - actual);
        self.integral = (self.integral + g.ki * error * self.dt).clamp(-g.integral_limit, g.integral_limit);
        let derivative = self.previous_error.map_or(0.0, |prev| (error - prev) / self.dt);
        self.previous_error = Some(error);
        (g.kp * error + self.integral + g.kd * derivative).clamp(-g.output_limit, g.output_limit)
    }
}
