//! Typed client for the cutaneous-feedback service.

use cutaneous_core::protocol::{CommandMessage, ServerMessage};
use cutaneous_core::session::CommandLog;
use cutaneous_service::api::{
    ConfigResponse, ErrorBody, ForwardRequest, ForwardResponse, Health, InverseRequest, InverseResponse,
    PatternRequest, PatternResponse, ReplayRequest, ReplayResponse, TrialsRequest, TrialsResponse, WorkspaceRequest,
    WorkspaceResponse,
};
use futures_util::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use tokio_tungstenite::tungstenite::Message;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Server { status: u16, message: String },
    #[error("websocket: {0}")]
    WebSocket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("bad message from server: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("command log: {0}")]
    Log(#[from] cutaneous_core::session::LogError),
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get_json("/api/health").await
    }

    pub async fn config(&self) -> Result<ConfigResponse, ClientError> {
        self.get_json("/api/config").await
    }

    pub async fn forward(&self, req: &ForwardRequest) -> Result<ForwardResponse, ClientError> {
        self.post("/api/kinematics/forward", req).await
    }

    pub async fn inverse(&self, req: &InverseRequest) -> Result<InverseResponse, ClientError> {
        self.post("/api/kinematics/inverse", req).await
    }

    pub async fn workspace(&self, req: &WorkspaceRequest) -> Result<WorkspaceResponse, ClientError> {
        self.post("/api/workspace", req).await
    }

    pub async fn patterns(&self, req: &PatternRequest) -> Result<PatternResponse, ClientError> {
        self.post("/api/patterns", req).await
    }

    pub async fn trials(&self, req: &TrialsRequest) -> Result<TrialsResponse, ClientError> {
        self.post("/api/trials", req).await
    }

    pub async fn replay(&self, log: CommandLog) -> Result<ReplayResponse, ClientError> {
        self.post("/api/replay", &ReplayRequest { log }).await
    }

    /// Command log of the live session so far.
    pub async fn session_log(&self) -> Result<CommandLog, ClientError> {
        let text = self.get_text("/api/session/log").await?;
        Ok(CommandLog::read_jsonl(text.as_bytes())?)
    }

    /// Results CSV of the live session so far.
    pub async fn session_results(&self) -> Result<String, ClientError> {
        self.get_text("/api/session/results").await
    }

    /// Opens the live session socket.
    pub async fn connect_session(&self) -> Result<SessionSocket, ClientError> {
        let url = format!("{}/session", self.base.replacen("http", "ws", 1));
        let (ws, _) = tokio_tungstenite::connect_async(url).await?;
        Ok(SessionSocket { ws })
    }

    async fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await?;
        Ok(checked(resp).await?.json().await?)
    }

    async fn get_text(&self, path: &str) -> Result<String, ClientError> {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await?;
        Ok(checked(resp).await?.text().await?)
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Ok(checked(resp).await?.json().await?)
    }
}

async fn checked(resp: reqwest::Response) -> Result<reqwest::Response, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let text = resp.text().await?;
    let message = serde_json::from_str::<ErrorBody>(&text)
        .map(|b| b.error)
        .unwrap_or(text);
    Err(ClientError::Server {
        status: status.as_u16(),
        message,
    })
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

/// Live session connection.
pub struct SessionSocket {
    ws: Ws,
}

impl SessionSocket {
    pub async fn send(&mut self, msg: &CommandMessage) -> Result<(), ClientError> {
        let text = serde_json::to_string(msg)?;
        self.ws.send(Message::Text(text.into())).await?;
        Ok(())
    }

    /// Next server message; `None` once the server closes the socket.
    pub async fn next(&mut self) -> Result<Option<ServerMessage>, ClientError> {
        while let Some(msg) = self.ws.next().await {
            match msg? {
                Message::Text(text) => return Ok(Some(serde_json::from_str(text.as_str())?)),
                Message::Close(_) => return Ok(None),
                _ => continue,
            }
        }
        Ok(None)
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.ws.close(None).await?;
        Ok(())
    }
}
