//! WebSocket session client holding a server-driven replica.

use std::time::Duration;

use futures::{SinkExt, StreamExt};
use log::{debug, warn};
use tokio::net::TcpStream;
use tokio::time::{timeout, Instant};
use tokio_tungstenite::tungstenite::Message as WsMessage;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use tissuelink_core::protocol::{
    decode_message, encode_text, ClientId, ClientRole, ErrorPayload, JoinAck, JoinRequest, Message, Payload,
    RejectReason, SessionCode, SessionState, StateDelta,
};
use tissuelink_core::session::Replica;

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("join rejected: {0:?}")]
    JoinRejected(RejectReason),
    #[error("server error: {0:?}")]
    Server(ErrorPayload),
    #[error("unexpected reply: {0}")]
    Unexpected(String),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
}

/// A broadcast delta as received.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub seq: u64,
    pub sender: Option<ClientId>,
    pub delta: StateDelta,
}

pub struct SessionClient {
    socket: Socket,
    pub code: Option<SessionCode>,
    pub client_id: Option<ClientId>,
    replica: Replica,
    /// Server errors received outside a request/response exchange.
    pub errors: Vec<ErrorPayload>,
    pub received: Vec<Received>,
    next_nonce: u64,
}

const REPLY_TIMEOUT: Duration = Duration::from_secs(10);

impl SessionClient {
    pub async fn connect(url: &str) -> Result<SessionClient, ClientError> {
        let (socket, _) = connect_async(url).await.map_err(|e| ClientError::Connection(e.to_string()))?;
        Ok(SessionClient {
            socket,
            code: None,
            client_id: None,
            replica: Replica::default(),
            errors: Vec::new(),
            received: Vec::new(),
            next_nonce: 1,
        })
    }

    pub fn state(&self) -> &SessionState {
        self.replica.state()
    }

    pub fn seq(&self) -> u64 {
        self.replica.seq()
    }

    pub async fn send(&mut self, msg: &Message) -> Result<(), ClientError> {
        self.socket
            .send(WsMessage::text(encode_text(msg)))
            .await
            .map_err(|e| ClientError::Connection(e.to_string()))
    }

    /// Next protocol message, or `None` on timeout. Server pings are answered
    /// here and not returned.
    async fn recv(&mut self, wait: Duration) -> Result<Option<Message>, ClientError> {
        let deadline = Instant::now() + wait;
        loop {
            let frame =
                match timeout(deadline.saturating_duration_since(Instant::now()), self.socket.next()).await {
                    Err(_) => return Ok(None),
                    Ok(None) => return Err(ClientError::Connection("server closed the connection".into())),
                    Ok(Some(Err(e))) => return Err(ClientError::Connection(e.to_string())),
                    Ok(Some(Ok(frame))) => frame,
                };
            let bytes = match frame {
                WsMessage::Text(t) => t.as_bytes().to_vec(),
                WsMessage::Binary(b) => b.to_vec(),
                WsMessage::Close(_) => {
                    return Err(ClientError::Connection("server closed the connection".into()))
                }
                _ => continue,
            };
            let msg = match decode_message(&bytes) {
                Ok(msg) => msg,
                Err(e) => {
                    warn!("undecodable frame from server: {e}");
                    continue;
                }
            };
            if let Payload::Ping { nonce } = msg.payload {
                self.send(&Message::new(Payload::Pong { nonce })).await?;
                continue;
            }
            return Ok(Some(msg));
        }
    }

    /// Folds broadcasts into the replica; returns anything else.
    fn absorb(&mut self, msg: Message) -> Option<Message> {
        match msg.payload {
            Payload::Delta(delta) => {
                if self.replica.apply(&delta, msg.seq, msg.sender.unwrap_or(ClientId(0))).is_some() {
                    self.received.push(Received { seq: msg.seq, sender: msg.sender, delta });
                }
                None
            }
            Payload::FullSync(sync) => {
                self.replica.full_sync(&sync);
                None
            }
            Payload::Error(e) => {
                debug!("server error: {e:?}");
                self.errors.push(e);
                None
            }
            _ => Some(msg),
        }
    }

    /// Waits for a message the replica does not consume.
    async fn reply(&mut self, what: &'static str) -> Result<Message, ClientError> {
        let deadline = Instant::now() + REPLY_TIMEOUT;
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            let Some(msg) = self.recv(wait).await? else { return Err(ClientError::Timeout(what)) };
            if let Payload::Error(e) = &msg.payload {
                return Err(ClientError::Server(e.clone()));
            }
            if let Some(msg) = self.absorb(msg) {
                return Ok(msg);
            }
        }
    }

    pub async fn create_session(&mut self) -> Result<SessionCode, ClientError> {
        self.send(&Message::new(Payload::CreateSession)).await?;
        match self.reply("session_created").await?.payload {
            Payload::SessionCreated { code } => Ok(code),
            other => Err(ClientError::Unexpected(other.kind().to_string())),
        }
    }

    /// Joins `code`. Returns the join ack, or `None` when the server
    /// recognised `rejoin_as` and answered with a full sync instead.
    pub async fn join(
        &mut self,
        code: SessionCode,
        role: ClientRole,
        rejoin_as: Option<ClientId>,
    ) -> Result<Option<JoinAck>, ClientError> {
        let req = JoinRequest { role, client_id: rejoin_as };
        self.send(&Message::new(Payload::JoinRequest(req)).in_session(code)).await?;
        let deadline = Instant::now() + REPLY_TIMEOUT;
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            let Some(msg) = self.recv(wait).await? else { return Err(ClientError::Timeout("join_ack")) };
            match msg.payload {
                Payload::JoinAck(ack) => {
                    self.code = Some(ack.code);
                    self.client_id = Some(ack.client_id);
                    self.replica = Replica::from_join(&ack);
                    return Ok(Some(*ack));
                }
                Payload::FullSync(sync) if rejoin_as.is_some() => {
                    self.code = Some(code);
                    self.client_id = rejoin_as;
                    self.replica.full_sync(&sync);
                    return Ok(None);
                }
                Payload::JoinReject { reason } => return Err(ClientError::JoinRejected(reason)),
                Payload::Error(e) => return Err(ClientError::Server(e)),
                _ => continue,
            }
        }
    }

    pub async fn send_delta(&mut self, delta: StateDelta) -> Result<(), ClientError> {
        let mut msg = Message::new(Payload::Delta(delta));
        if let Some(code) = self.code {
            msg = msg.in_session(code);
        }
        if let Some(id) = self.client_id {
            msg = msg.from_sender(id);
        }
        self.send(&msg).await
    }

    /// Applies inbound traffic until nothing arrives for `quiet`.
    pub async fn quiesce(&mut self, quiet: Duration) -> Result<(), ClientError> {
        while let Some(msg) = self.recv(quiet).await? {
            self.absorb(msg);
        }
        Ok(())
    }

    /// Applies whatever arrives within `wait`, returning after the first
    /// message or the timeout.
    pub async fn pump(&mut self, wait: Duration) -> Result<bool, ClientError> {
        match self.recv(wait).await? {
            Some(msg) => {
                self.absorb(msg);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Sends a delta and waits for the server's echo of it.
    pub async fn round_trip(&mut self, delta: StateDelta) -> Result<Duration, ClientError> {
        let start = Instant::now();
        let before = self.received.len();
        self.send_delta(delta).await?;
        let deadline = start + REPLY_TIMEOUT;
        loop {
            if self.received[before..].iter().any(|r| r.sender.is_some() && r.sender == self.client_id) {
                return Ok(start.elapsed());
            }
            if let Some(e) = self.errors.pop() {
                return Err(ClientError::Server(e));
            }
            let wait = deadline.saturating_duration_since(Instant::now());
            if wait.is_zero() || !self.pump(wait).await? {
                return Err(ClientError::Timeout("delta echo"));
            }
        }
    }

    /// Application-level ping; returns the round trip.
    pub async fn ping(&mut self) -> Result<Duration, ClientError> {
        let nonce = self.next_nonce;
        self.next_nonce += 1;
        let start = Instant::now();
        self.send(&Message::new(Payload::Ping { nonce })).await?;
        loop {
            let msg = self.reply("pong").await?;
            if msg.payload == (Payload::Pong { nonce }) {
                return Ok(start.elapsed());
            }
        }
    }

    pub async fn leave(&mut self) -> Result<(), ClientError> {
        self.send(&Message::new(Payload::Leave)).await
    }

    pub async fn close(mut self) {
        let _ = self.socket.close(None).await;
    }
}
