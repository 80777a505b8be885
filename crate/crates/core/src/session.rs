//! Single-owner teleoperation session: trial lifecycle, zero-order-hold
//! aperture input, 50 Hz snapshots, and a command log that replays to the
//! same results.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Device, DeviceParams, CONTROL_PERIOD_S};
use crate::harness::{
    build_trial_schedule, derive_seed, write_results_csv, Condition, ProtocolParams, TrialConfig, TrialResult,
    TrialRunner,
};
use crate::pivot::{FixtureParams, ObjectSpec, PhysicsParams};
use crate::protocol::{
    Ack, Command, CommandError, CommandKind, CommandMessage, StartTrial, StateMessage, StationTactors, TrialStatus,
    Warning,
};
use crate::station::{Finger, Station};

/// Control ticks per published snapshot (100 Hz / 2 = 50 Hz).
pub const SNAPSHOT_DIVIDER: u64 = 2;

/// Client clock regression that marks a client as stale, s.
pub const STALE_CLIENT_S: f64 = 1.0;

/// Everything a session needs besides its seed and condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub index: Station,
    pub thumb: Station,
    pub device: DeviceParams,
    pub physics: PhysicsParams,
    pub fixture: FixtureParams,
    pub protocol: ProtocolParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            index: Station::default_for(Finger::Index),
            thumb: Station::default_for(Finger::Thumb),
            device: DeviceParams::default(),
            physics: PhysicsParams::default(),
            fixture: FixtureParams::default(),
            protocol: ProtocolParams::default(),
        }
    }
}

/// A command as applied, stamped with the tick it took effect on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub tick: u64,
    #[serde(flatten)]
    pub message: CommandMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LogHeader {
    seed: u64,
    condition: Condition,
}

/// Seed, initial condition and every applied command of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandLog {
    pub seed: u64,
    pub condition: Condition,
    pub entries: Vec<LoggedCommand>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("command log is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: ticks must not decrease")]
    OutOfOrder { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CommandLog {
    /// JSON lines: a header with seed and condition, then one command per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header = LogHeader {
            seed: self.seed,
            condition: self.condition,
        };
        serde_json::to_writer(&mut out, &header)?;
        writeln!(out)?;
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, LogError> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
        let (_, first) = lines.next().ok_or(LogError::Empty)?;
        let header: LogHeader = serde_json::from_str(&first?).map_err(|source| LogError::Parse { line: 1, source })?;
        let mut entries: Vec<LoggedCommand> = Vec::new();
        for (i, line) in lines {
            let entry: LoggedCommand =
                serde_json::from_str(&line?).map_err(|source| LogError::Parse { line: i + 1, source })?;
            if entries.last().is_some_and(|prev| prev.tick > entry.tick) {
                return Err(LogError::OutOfOrder { line: i + 1 });
            }
            entries.push(entry);
        }
        Ok(Self {
            seed: header.seed,
            condition: header.condition,
            entries,
        })
    }
}

/// The session. Only [`Session::tick`] advances time; commands queue up
/// and take effect at the start of the next tick, at most one per kind
/// (the latest wins).
#[derive(Debug, Clone)]
pub struct Session {
    config: SimConfig,
    /// Seed and condition the session started with, for the log header.
    initial: (u64, Condition),
    seed: u64,
    condition: Condition,
    schedule: Vec<TrialConfig>,
    next_case: usize,
    trials_started: usize,
    status: TrialStatus,
    runner: TrialRunner,
    tick: u64,
    aperture_cmd: f64,
    pending: BTreeMap<CommandKind, CommandMessage>,
    max_client_time: Option<f64>,
    results: Vec<TrialResult>,
    log: Vec<LoggedCommand>,
    finished: Vec<TrialResult>,
}

impl Session {
    pub fn new(config: SimConfig, seed: u64, condition: Condition) -> Self {
        let schedule = build_trial_schedule(condition, seed);
        let runner = Self::make_runner(&config, schedule[0]);
        let aperture_cmd = runner.command();
        Self {
            config,
            initial: (seed, condition),
            seed,
            condition,
            schedule,
            next_case: 0,
            trials_started: 0,
            status: TrialStatus::Idle,
            runner,
            tick: 0,
            aperture_cmd,
            pending: BTreeMap::new(),
            max_client_time: None,
            results: Vec::new(),
            log: Vec::new(),
            finished: Vec::new(),
        }
    }

    fn make_runner(config: &SimConfig, cfg: TrialConfig) -> TrialRunner {
        TrialRunner::new(cfg, config.protocol, config.physics, config.fixture).with_device(Device::new(
            config.index,
            config.thumb,
            config.device,
        ))
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn status(&self) -> TrialStatus {
        self.status
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn runner(&self) -> &TrialRunner {
        &self.runner
    }

    pub fn results(&self) -> &[TrialResult] {
        &self.results
    }

    /// Trial results completed since the last call.
    pub fn drain_finished(&mut self) -> Vec<TrialResult> {
        std::mem::take(&mut self.finished)
    }

    pub fn command_log(&self) -> CommandLog {
        CommandLog {
            seed: self.initial.0,
            condition: self.initial.1,
            entries: self.log.clone(),
        }
    }

    pub fn results_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_results_csv(&mut out, &self.results).expect("writing to memory");
        out
    }

    /// Validates and queues a command for the next tick.
    pub fn handle_command(&mut self, msg: CommandMessage) -> Result<Ack, CommandError> {
        let running = self.status == TrialStatus::Running;
        match msg.command {
            Command::Aperture { aperture_m } if !aperture_m.is_finite() || aperture_m < 0.0 => {
                return Err(CommandError::MalformedMessage(format!(
                    "aperture_m must be finite and non-negative, got {aperture_m}"
                )));
            }
            Command::StartTrial(start) => {
                if running {
                    return Err(CommandError::IllegalTransition(
                        "start_trial while a trial is running".into(),
                    ));
                }
                validate_start(&start)?;
            }
            Command::Abort if !running => {
                return Err(CommandError::IllegalTransition("abort with no trial running".into()));
            }
            Command::SetCondition { .. } if running => {
                return Err(CommandError::IllegalTransition(
                    "set_condition while a trial is running".into(),
                ));
            }
            Command::SetSeed { .. } if running => {
                return Err(CommandError::IllegalTransition(
                    "set_seed while a trial is running".into(),
                ));
            }
            _ => {}
        }
        let warning = match self.max_client_time {
            Some(max) if msg.client_time < max - STALE_CLIENT_S => Some(Warning::StaleClient),
            _ => None,
        };
        self.max_client_time = Some(self.max_client_time.map_or(msg.client_time, |m| m.max(msg.client_time)));
        let kind = msg.command.kind();
        self.pending.insert(kind, msg);
        Ok(Ack {
            kind,
            sequence: self.tick + 1,
            warning,
        })
    }

    /// Applies queued commands, advances one control period and returns a
    /// snapshot when one is due.
    pub fn tick(&mut self) -> Option<StateMessage> {
        let next_tick = self.tick + 1;
        for (_, msg) in std::mem::take(&mut self.pending) {
            if self.apply(msg.command) {
                self.log.push(LoggedCommand {
                    tick: next_tick,
                    message: msg,
                });
            }
        }
        if self.status == TrialStatus::Running {
            self.runner.step(self.aperture_cmd);
            if self.runner.is_finished() {
                self.finish_trial();
            }
        }
        self.tick = next_tick;
        (self.tick % SNAPSHOT_DIVIDER == 0).then(|| self.snapshot())
    }

    /// Applies one command; false when it no longer fits the state (it was
    /// valid when queued but an earlier command in the same tick changed things).
    fn apply(&mut self, command: Command) -> bool {
        let running = self.status == TrialStatus::Running;
        match command {
            Command::SetSeed { seed } if !running => {
                self.seed = seed;
                self.rebuild_schedule();
            }
            Command::SetCondition { condition } if !running => {
                self.condition = condition;
                self.rebuild_schedule();
            }
            Command::Abort if running => {
                self.finish_trial();
            }
            Command::StartTrial(start) if !running => {
                let cfg = self.trial_config(start);
                self.runner = Self::make_runner(&self.config, cfg);
                self.aperture_cmd = self.runner.command();
                self.status = TrialStatus::Running;
                self.trials_started += 1;
            }
            Command::Aperture { aperture_m } => {
                if running {
                    self.aperture_cmd = aperture_m;
                } else {
                    return false;
                }
            }
            _ => return false,
        }
        true
    }

    fn rebuild_schedule(&mut self) {
        self.schedule = build_trial_schedule(self.condition, self.seed);
        self.next_case = 0;
        self.runner = Self::make_runner(&self.config, self.schedule[0]);
        self.aperture_cmd = self.runner.command();
        self.status = TrialStatus::Idle;
    }

    fn trial_config(&mut self, start: StartTrial) -> TrialConfig {
        match (start.mass_kg, start.target_deg) {
            (Some(mass), Some(target_angle_deg)) => TrialConfig {
                mass,
                target_angle_deg,
                condition: self.condition,
                trial_index: self.trials_started,
                seed: derive_seed(self.seed, 1_000_000 + self.trials_started as u64),
            },
            _ => {
                let mut cfg = self.schedule[self.next_case % self.schedule.len()];
                self.next_case += 1;
                cfg.trial_index = self.trials_started;
                cfg
            }
        }
    }

    fn finish_trial(&mut self) {
        let result = self.runner.result();
        self.results.push(result);
        self.finished.push(result);
        self.status = TrialStatus::Done;
    }

    /// Coherent snapshot of the current tick.
    pub fn snapshot(&self) -> StateMessage {
        let cfg = self.runner.config();
        let pivot = self.runner.pivot();
        let sample = self.runner.last_sample();
        let device = self.runner.device_state().expect("session runners carry a device");
        let tactors = device.stations.map(|s| StationTactors {
            upper_mm: s.upper,
            lower_mm: s.lower,
        });
        let mut joints = [0.0; 8];
        for (i, s) in device.stations.iter().enumerate() {
            for (k, a) in s.actual_angles.iter().enumerate() {
                joints[4 * i + k] = a.to_degrees();
            }
        }
        StateMessage {
            sequence: self.tick,
            t_s: self.tick as f64 * CONTROL_PERIOD_S,
            trial_time_s: self.runner.time(),
            trial_status: self.status,
            condition: self.condition,
            trial_index: (self.status != TrialStatus::Idle).then_some(cfg.trial_index),
            mass_kg: cfg.mass,
            object_angle_deg: pivot.theta.to_degrees(),
            target_angle_deg: cfg.target_angle_deg,
            grip_force_n: pivot.normal_force,
            fixture_force_n: sample.map_or(0.0, |s| s.fixture_force),
            aperture_m: pivot.aperture,
            aperture_cmd_m: self.runner.command(),
            tactors,
            joint_angles_deg: joints,
        }
    }
}

/// Replays `log` into a fresh session: every command is applied on the tick
/// it was recorded at, then the session runs until any trial in progress ends.
pub fn replay(log: &CommandLog, config: SimConfig) -> Session {
    let mut session = Session::new(config, log.seed, log.condition);
    for entry in &log.entries {
        while session.tick + 1 < entry.tick {
            session.tick();
        }
        session.pending.insert(entry.message.command.kind(), entry.message);
    }
    while !session.pending.is_empty() || session.status == TrialStatus::Running {
        session.tick();
    }
    session
}

fn validate_start(start: &StartTrial) -> Result<(), CommandError> {
    match (start.mass_kg, start.target_deg) {
        (None, None) => Ok(()),
        (Some(mass), Some(target)) => {
            ObjectSpec::with_mass(mass)
                .validate()
                .map_err(|e| CommandError::MalformedMessage(e.to_string()))?;
            if !(target > 0.0 && target < 90.0) {
                return Err(CommandError::MalformedMessage(format!(
                    "target_deg must be in (0, 90), got {target}"
                )));
            }
            Ok(())
        }
        _ => Err(CommandError::MalformedMessage(
            "start_trial needs both mass_kg and target_deg, or neither".into(),
        )),
    }
}
