//! TOML configuration. Every table is optional; missing tables and keys
//! fall back to the built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::harness::{OperatorParams, ProtocolParams};
use crate::linkage::GeometryError;
use crate::pivot::{FixtureParams, PhysicsParams};
use crate::session::SimConfig;
use crate::station::{Finger, Station, StationDimensions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{finger} station: {source}")]
    Geometry { finger: Finger, source: GeometryError },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub index: StationDimensions,
    pub thumb: StationDimensions,
    pub device: DeviceParams,
    pub physics: PhysicsParams,
    pub fixture: FixtureParams,
    pub protocol: ProtocolParams,
    pub operator: OperatorParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            index: StationDimensions::index(),
            thumb: StationDimensions::thumb(),
            device: DeviceParams::default(),
            physics: PhysicsParams::default(),
            fixture: FixtureParams::default(),
            protocol: ProtocolParams::default(),
            operator: OperatorParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.sim()?;
        config.operator.validate().map_err(ConfigError::Invalid)?;
        if config.physics.substep <= 0.0 || config.physics.substep > crate::device::CONTROL_PERIOD_S {
            return Err(ConfigError::Invalid("physics.substep must be in (0, 0.01]".into()));
        }
        if config.device.substeps == 0 {
            return Err(ConfigError::Invalid("device.substeps must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn station(&self, finger: Finger) -> Result<Station, ConfigError> {
        let dims = match finger {
            Finger::Index => &self.index,
            Finger::Thumb => &self.thumb,
        };
        Station::from_dimensions(finger, dims).map_err(|source| ConfigError::Geometry { finger, source })
    }

    /// Simulation settings for a session.
    pub fn sim(&self) -> Result<SimConfig, ConfigError> {
        Ok(SimConfig {
            index: self.station(Finger::Index)?,
            thumb: self.station(Finger::Thumb)?,
            device: self.device,
            physics: self.physics,
            fixture: self.fixture,
            protocol: self.protocol,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
