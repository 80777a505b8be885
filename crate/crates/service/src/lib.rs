//! Network front end for the simulation: stateless computations over
//! HTTP/JSON and one live teleoperation session over a WebSocket.

pub mod api;
mod routes;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;

use cutaneous_core::config::{Config, ConfigError};
use cutaneous_core::harness::Condition;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub use routes::router;
pub use session::{SessionHandle, SUBSCRIBER_QUEUE};

/// Everything needed to start a server.
#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub config: Config,
    pub seed: u64,
    pub condition: Condition,
    /// Static files served for any path the API does not claim.
    pub ui_dir: Option<PathBuf>,
    /// Where the live session's command log is written.
    pub record: Option<PathBuf>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            config: Config::default(),
            seed: 0,
            condition: Condition::VF_GF_TF,
            ui_dir: None,
            record: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub config: Config,
    pub session: SessionHandle,
    /// Flips to true when the server is shutting down.
    pub shutdown: watch::Receiver<bool>,
}

/// A running server. Dropping it does not stop it; call [`Server::shutdown`].
pub struct Server {
    addr: SocketAddr,
    stop: watch::Sender<bool>,
    serve: JoinHandle<std::io::Result<()>>,
    session: JoinHandle<()>,
}

impl Server {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub async fn start(addr: SocketAddr, options: ServerOptions) -> Result<Self, StartError> {
        let sim = options.config.sim()?;
        let (session, session_task) = session::spawn(sim, options.seed, options.condition, options.record.clone());
        let (stop, stopped) = watch::channel(false);
        let state = AppState {
            config: options.config,
            session,
            shutdown: stopped.clone(),
        };
        let app = router(state, options.ui_dir.as_deref());
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let serve = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let mut stopped = stopped;
                    let _ = stopped.wait_for(|&s| s).await;
                })
                .await
        });
        tracing::info!(%addr, "listening");
        Ok(Self {
            addr,
            stop,
            serve,
            session: session_task,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections, waits for open ones to close, then
    /// stops the session (writing its command log if recording).
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.stop.send(true);
        let served = self.serve.await.unwrap_or(Ok(()));
        let _ = self.session.await;
        served
    }

    /// Serves until `signal` resolves, then shuts down.
    pub async fn run_until(self, signal: impl std::future::Future<Output = ()>) -> std::io::Result<()> {
        signal.await;
        self.shutdown().await
    }
}

#[derive(Debug)]
pub enum StartError {
    Config(ConfigError),
    Io(std::io::Error),
}

impl std::fmt::Display for StartError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StartError::Config(e) => write!(f, "{e}"),
            StartError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for StartError {}

impl From<ConfigError> for StartError {
    fn from(e: ConfigError) -> Self {
        StartError::Config(e)
    }
}

impl From<std::io::Error> for StartError {
    fn from(e: std::io::Error) -> Self {
        StartError::Io(e)
    }
}
