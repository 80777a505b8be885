//! The live session task. It owns the [`Session`], ticks it at the control
//! rate against the wall clock and fans snapshots out to subscribers.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use cutaneous_core::device::CONTROL_PERIOD_S;
use cutaneous_core::harness::{Condition, TrialResult};
use cutaneous_core::protocol::{Ack, CommandError, CommandMessage, ServerMessage};
use cutaneous_core::session::{CommandLog, Session, SimConfig};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

/// Outbound lines buffered per subscriber. A subscriber that falls further
/// behind loses the oldest lines, never blocks the simulation.
pub const SUBSCRIBER_QUEUE: usize = 256;

enum Request {
    Command(CommandMessage, oneshot::Sender<Result<Ack, CommandError>>),
    Log(oneshot::Sender<CommandLog>),
    Results(oneshot::Sender<Vec<TrialResult>>),
}

/// Cheap handle to the session task.
#[derive(Clone)]
pub struct SessionHandle {
    requests: mpsc::Sender<Request>,
    lines: broadcast::Sender<Arc<str>>,
}

impl SessionHandle {
    /// Queues a command for the next tick.
    pub async fn command(&self, msg: CommandMessage) -> Result<Ack, CommandError> {
        let (tx, rx) = oneshot::channel();
        self.ask(Request::Command(msg, tx), rx)
            .await
            .unwrap_or_else(|| Err(CommandError::IllegalTransition("session has stopped".into())))
    }

    /// Server messages (state snapshots and trial results) as JSON lines.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.lines.subscribe()
    }

    pub async fn command_log(&self) -> Option<CommandLog> {
        let (tx, rx) = oneshot::channel();
        self.ask(Request::Log(tx), rx).await
    }

    pub async fn results(&self) -> Option<Vec<TrialResult>> {
        let (tx, rx) = oneshot::channel();
        self.ask(Request::Results(tx), rx).await
    }

    async fn ask<T>(&self, req: Request, rx: oneshot::Receiver<T>) -> Option<T> {
        self.requests.send(req).await.ok()?;
        rx.await.ok()
    }
}

/// Starts the session task. It runs until every handle is dropped.
pub(crate) fn spawn(
    config: SimConfig,
    seed: u64,
    condition: Condition,
    record: Option<PathBuf>,
) -> (SessionHandle, JoinHandle<()>) {
    let (requests, inbox) = mpsc::channel(64);
    let (lines, _) = broadcast::channel(SUBSCRIBER_QUEUE);
    let session = Session::new(config, seed, condition);
    let task = tokio::spawn(run(session, inbox, lines.clone(), record));
    (SessionHandle { requests, lines }, task)
}

async fn run(
    mut session: Session,
    mut inbox: mpsc::Receiver<Request>,
    lines: broadcast::Sender<Arc<str>>,
    record: Option<PathBuf>,
) {
    let mut clock = tokio::time::interval(Duration::from_secs_f64(CONTROL_PERIOD_S));
    // Catch up after a stall so simulated time keeps pace with the wall clock.
    clock.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        tokio::select! {
            req = inbox.recv() => match req {
                Some(Request::Command(msg, reply)) => {
                    let outcome = session.handle_command(msg);
                    if let Ok(Ack { warning: Some(warning), kind, .. }) = &outcome {
                        tracing::warn!(?kind, ?warning, client_time = msg.client_time, "command applied with warning");
                    }
                    let _ = reply.send(outcome);
                }
                Some(Request::Log(reply)) => {
                    let _ = reply.send(session.command_log());
                }
                Some(Request::Results(reply)) => {
                    let _ = reply.send(session.results().to_vec());
                }
                None => break,
            },
            _ = clock.tick() => {
                if let Some(state) = session.tick() {
                    publish(&lines, ServerMessage::State(state));
                }
                let finished = session.drain_finished();
                for result in &finished {
                    tracing::info!(
                        condition = %result.condition,
                        trial = result.trial_index,
                        error_deg = result.error_deg,
                        "trial finished"
                    );
                    publish(&lines, ServerMessage::TrialResult(*result));
                }
                if !finished.is_empty() {
                    save(&session, record.as_ref());
                }
            }
        }
    }
    save(&session, record.as_ref());
}

fn publish(lines: &broadcast::Sender<Arc<str>>, msg: ServerMessage) {
    // No subscribers is not an error.
    let _ = lines.send(msg.to_line().into());
}

fn save(session: &Session, path: Option<&PathBuf>) {
    let Some(path) = path else { return };
    let mut out = Vec::new();
    session.command_log().write_jsonl(&mut out).expect("writing to memory");
    if let Err(e) = std::fs::write(path, out) {
        tracing::warn!(path = %path.display(), "could not write command log: {e}");
    }
}
