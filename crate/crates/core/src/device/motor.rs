//! First-order DC motor with a quantising potentiometer read-out.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotorParams {
    /// Velocity time constant, s.
    pub time_constant: f64,
    /// Steady-state speed per volt, rad/s/V.
    pub gain: f64,
    pub voltage_limit: f64,
    pub sensor_bits: u32,
    /// Span covered by the sensor, rad.
    pub sensor_range: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            time_constant: 0.020,
            gain: 35.0,
            voltage_limit: 6.0,
            sensor_bits: 12,
            sensor_range: 270f64.to_radians(),
        }
    }
}

impl MotorParams {
    /// Angle represented by one sensor count.
    pub fn sensor_lsb(&self) -> f64 {
        self.sensor_range / f64::from(1u32 << self.sensor_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorPlant {
    pub angle: f64,
    pub velocity: f64,
    pub params: MotorParams,
    /// Lowest angle the sensor reports; the span is `[sensor_min, sensor_min + range]`.
    pub sensor_min: f64,
}

impl MotorPlant {
    /// Plant at rest at `angle`, with the sensor span centred on it.
    pub fn at_rest(angle: f64, params: MotorParams) -> Self {
        Self {
            angle,
            velocity: 0.0,
            params,
            sensor_min: angle - params.sensor_range / 2.0,
        }
    }

    /// Advances the plant by `dt` under `voltage` (saturated to the limit)
    /// and returns the quantised angle reading.
    pub fn step(&mut self, voltage: f64, dt: f64) -> f64 {
        let limit = self.params.voltage_limit;
        let v = voltage.clamp(-limit, limit);
        self.velocity += (self.params.gain * v - self.velocity) / self.params.time_constant * dt;
        self.angle += self.velocity * dt;
        self.reading()
    }

    /// Quantised sensor reading of the current angle.
    pub fn reading(&self) -> f64 {
        let lsb = self.params.sensor_lsb();
        let counts_max = f64::from(1u32 << self.params.sensor_bits);
        let counts = ((self.angle - self.sensor_min) / lsb).round().clamp(0.0, counts_max);
        self.sensor_min + counts * lsb
    }
}
