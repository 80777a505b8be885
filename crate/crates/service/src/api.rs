//! Request and response bodies of the HTTP API, and the computations
//! behind them. Everything here is synchronous and stateless.

use cutaneous_core::config::{Config, ConfigError};
use cutaneous_core::device::{Device, DeviceState};
use cutaneous_core::harness::{
    aggregate, run_protocol_observed, write_results_csv, Condition, Grouping, OperatorParams, ScriptedOperator,
    SummaryStats, TickSample, TrialResult,
};
use cutaneous_core::patterns::{classify_pattern, PatternKind, PatternSpec, TactorPair};
use cutaneous_core::session::{replay, CommandLog};
use cutaneous_core::workspace::{compute_workspace, WorkspaceSummary};
use cutaneous_core::{Finger, JointAngles, Mechanism, Point2, Station};
use serde::{Deserialize, Serialize};

/// A request the server could parse but not satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError(pub String);

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ApiError {}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        ApiError(e.to_string())
    }
}

/// Body of every error response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// Geometry and parameters the server runs with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigResponse {
    pub stations: [Station; 2],
    pub config: Config,
}

pub fn config_response(config: &Config) -> Result<ConfigResponse, ApiError> {
    Ok(ConfigResponse {
        stations: [config.station(Finger::Index)?, config.station(Finger::Thumb)?],
        config: *config,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardRequest {
    pub finger: Finger,
    pub mechanism: Mechanism,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardResponse {
    pub x_mm: f64,
    pub y_mm: f64,
}

pub fn forward(config: &Config, req: &ForwardRequest) -> Result<ForwardResponse, ApiError> {
    let station = config.station(req.finger)?;
    let q = JointAngles::from_degrees(req.theta1_deg, req.theta2_deg);
    let p = station
        .mechanism(req.mechanism)
        .forward_kinematics(q)
        .map_err(|e| ApiError(e.to_string()))?;
    Ok(ForwardResponse { x_mm: p.x, y_mm: p.y })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseRequest {
    pub finger: Finger,
    pub mechanism: Mechanism,
    pub x_mm: f64,
    pub y_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseResponse {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

pub fn inverse(config: &Config, req: &InverseRequest) -> Result<InverseResponse, ApiError> {
    let station = config.station(req.finger)?;
    let q = station
        .mechanism(req.mechanism)
        .inverse_kinematics(Point2::new(req.x_mm, req.y_mm))
        .map_err(|e| ApiError(e.to_string()))?;
    Ok(InverseResponse {
        theta1_deg: q.theta1.to_degrees(),
        theta2_deg: q.theta2.to_degrees(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkspaceRequest {
    pub finger: Finger,
    pub resolution_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkspaceResponse {
    pub summary: WorkspaceSummary,
    /// One row per raster cell.
    pub csv: String,
}

pub fn workspace(config: &Config, req: &WorkspaceRequest) -> Result<WorkspaceResponse, ApiError> {
    let station = config.station(req.finger)?;
    let grid = compute_workspace(&station.lower, &station.upper, station.target, req.resolution_mm)
        .map_err(|e| ApiError(e.to_string()))?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).expect("writing to memory");
    Ok(WorkspaceResponse {
        summary: grid.summary(),
        csv: String::from_utf8(csv).expect("csv is utf-8"),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternRequest {
    pub kind: PatternKind,
    pub finger: Finger,
    pub rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Also drive the simulated device through the pattern and return its log.
    #[serde(default)]
    pub device_log: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternResponse {
    pub spec: PatternSpec,
    pub samples: Vec<TactorPair>,
    /// What the classifier makes of the samples.
    pub classified: Option<PatternKind>,
    /// Why the classifier could not decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_log: Option<String>,
}

pub fn pattern(config: &Config, req: &PatternRequest) -> Result<PatternResponse, ApiError> {
    let station = config.station(req.finger)?;
    let mut spec = PatternSpec::default_for(req.kind, &station);
    if let Some(a) = req.amplitude_mm {
        spec.amplitude = a;
    }
    if let Some(d) = req.duration_s {
        spec.duration = d;
    }
    spec.validate().map_err(|e| ApiError(e.to_string()))?;
    let samples = spec.sample(req.rate_hz).map_err(|e| ApiError(e.to_string()))?;
    let (classified, classify_error) = match classify_pattern(&samples) {
        Ok(kind) => (Some(kind), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let device_log = req
        .device_log
        .then(|| device_log(config, req.finger, &spec))
        .transpose()?;
    Ok(PatternResponse {
        spec,
        samples,
        classified,
        classify_error,
        device_log,
    })
}

/// Device log of one station tracking `spec` at the control rate while the
/// other station holds its rest pose.
fn device_log(config: &Config, finger: Finger, spec: &PatternSpec) -> Result<String, ApiError> {
    let mut device = Device::new(
        config.station(Finger::Index)?,
        config.station(Finger::Thumb)?,
        config.device,
    );
    let track = spec
        .sample(1.0 / cutaneous_core::device::CONTROL_PERIOD_S)
        .map_err(|e| ApiError(e.to_string()))?;
    let slot = Finger::ALL.iter().position(|&f| f == finger).expect("known finger");
    let mut out = Vec::new();
    DeviceState::write_csv_header(&mut out).expect("writing to memory");
    for pair in track {
        let mut targets = device.tactors();
        targets[slot] = pair;
        device
            .tick(&targets)
            .write_csv_row(&mut out)
            .expect("writing to memory");
    }
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Calibrated operator with perception noise and reaction delay.
    #[default]
    Scripted,
    /// The same strategy without noise or delay.
    Ideal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialsRequest {
    pub conditions: Vec<Condition>,
    pub seed: u64,
    #[serde(default)]
    pub operator: OperatorKind,
    /// Return the per-tick history of every trial as CSV.
    #[serde(default)]
    pub tick_log: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialsResponse {
    pub results: Vec<TrialResult>,
    pub summary: SummaryStats,
    pub csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick_log: Option<String>,
}

pub fn run_trials(config: &Config, req: &TrialsRequest) -> Result<TrialsResponse, ApiError> {
    if req.conditions.is_empty() {
        return Err(ApiError("at least one condition is required".into()));
    }
    let params = match req.operator {
        OperatorKind::Scripted => config.operator,
        OperatorKind::Ideal => OperatorParams::ideal(),
    };
    let protocol = config.protocol;
    let mut tick_log = req
        .tick_log
        .then(|| format!("{}\n", TickSample::CSV_HEADER).into_bytes());
    let results = run_protocol_observed(
        &req.conditions,
        req.seed,
        protocol,
        config.physics,
        config.fixture,
        |cfg, physics| ScriptedOperator::new(params, cfg, &protocol, physics),
        |runner| {
            if let Some(out) = tick_log.as_mut() {
                for sample in runner.history() {
                    sample
                        .write_csv_row(&mut *out, runner.config())
                        .expect("writing to memory");
                }
            }
        },
    );
    let summary = aggregate(&results, Grouping::Condition).map_err(|e| ApiError(e.to_string()))?;
    Ok(TrialsResponse {
        csv: results_csv(&results),
        results,
        summary,
        tick_log: tick_log.map(|b| String::from_utf8(b).expect("csv is utf-8")),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRequest {
    pub log: CommandLog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayResponse {
    pub results: Vec<TrialResult>,
    pub csv: String,
}

pub fn run_replay(config: &Config, req: &ReplayRequest) -> Result<ReplayResponse, ApiError> {
    let session = replay(&req.log, config.sim()?);
    Ok(ReplayResponse {
        results: session.results().to_vec(),
        csv: results_csv(session.results()),
    })
}

pub fn results_csv(results: &[TrialResult]) -> String {
    let mut out = Vec::new();
    write_results_csv(&mut out, results).expect("writing to memory");
    String::from_utf8(out).expect("csv is utf-8")
}
