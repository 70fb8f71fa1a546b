//! Transport-independent session server logic.
//!
//! The hub owns every session record and every connection's bookkeeping. A
//! transport feeds it decoded messages tagged with a [`ConnId`] and a
//! monotonic timestamp, and carries out the returned [`Effects`].

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::rngs::StdRng;
use rand::Rng;
use thiserror::Error;

use crate::protocol::{
    validate_update, ClientId, ClientRole, ErrorCode, ErrorPayload, FullSync, JoinAck, JoinRequest, Message,
    Payload, RejectReason, Rule, SceneCatalog, SessionCode, SessionState, StateDelta, Update, Violation,
};

/// Transport-assigned connection handle.
pub type ConnId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct HubConfig {
    pub heartbeat: Duration,
    pub missed_pongs_limit: u32,
    pub session_grace: Duration,
    pub max_members: usize,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            heartbeat: Duration::from_secs(5),
            missed_pongs_limit: 3,
            session_grace: Duration::from_secs(600),
            max_members: 32,
        }
    }
}

impl HubConfig {
    /// Silence after which a connection is dropped.
    pub fn eviction_after(&self) -> Duration {
        self.heartbeat * self.missed_pongs_limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HubError {
    #[error("all {} session codes are in use", SessionCode::SPACE)]
    SessionsExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub role: ClientRole,
    /// `None` while the client is disconnected but may still rejoin.
    pub conn: Option<ConnId>,
}

#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub code: SessionCode,
    pub state: SessionState,
    pub next_seq: u64,
    pub members: BTreeMap<ClientId, Member>,
    pub created_at: Instant,
    pub last_activity_at: Instant,
    /// Set while no member is connected.
    pub empty_since: Option<Instant>,
}

impl SessionRecord {
    fn new(code: SessionCode, now: Instant) -> Self {
        SessionRecord {
            code,
            state: SessionState::default(),
            next_seq: 1,
            members: BTreeMap::new(),
            created_at: now,
            last_activity_at: now,
            empty_since: Some(now),
        }
    }

    /// Seq of the last accepted delta.
    pub fn seq(&self) -> u64 {
        self.next_seq - 1
    }

    pub fn connected(&self) -> impl Iterator<Item = (ClientId, ConnId)> + '_ {
        self.members.iter().filter_map(|(id, m)| m.conn.map(|c| (*id, c)))
    }

    fn connected_count(&self) -> usize {
        self.connected().count()
    }
}

#[derive(Debug, Clone)]
struct Conn {
    last_seen: Instant,
    last_ping: Option<Instant>,
    binding: Option<(SessionCode, ClientId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub conn: ConnId,
    pub message: Message,
}

/// What the transport must do after a hub call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Effects {
    pub send: Vec<Outbound>,
    /// Connections the hub dropped; the transport should close them.
    pub close: Vec<ConnId>,
}

impl Effects {
    fn send(&mut self, conn: ConnId, message: Message) {
        self.send.push(Outbound { conn, message });
    }

    pub fn extend(&mut self, other: Effects) {
        self.send.extend(other.send);
        self.close.extend(other.close);
    }

    /// Messages addressed to `conn`, in order.
    pub fn to(&self, conn: ConnId) -> Vec<&Message> {
        self.send.iter().filter(|o| o.conn == conn).map(|o| &o.message).collect()
    }
}

pub struct SessionHub {
    config: HubConfig,
    catalog: Option<SceneCatalog>,
    catalog_checksum: String,
    rng: StdRng,
    sessions: HashMap<SessionCode, SessionRecord>,
    /// Codes not in use, in arbitrary order.
    free: Vec<SessionCode>,
    conns: HashMap<ConnId, Conn>,
    next_nonce: u64,
}

fn error(code: ErrorCode, message: impl Into<String>) -> Payload {
    Payload::Error(ErrorPayload { code, message: message.into(), paths: Vec::new() })
}

impl SessionHub {
    pub fn new(
        config: HubConfig,
        catalog: Option<SceneCatalog>,
        catalog_checksum: String,
        rng: StdRng,
    ) -> Self {
        let free = (0..SessionCode::SPACE).filter_map(SessionCode::from_index).collect();
        SessionHub {
            config,
            catalog,
            catalog_checksum,
            rng,
            sessions: HashMap::new(),
            free,
            conns: HashMap::new(),
            next_nonce: 1,
        }
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn catalog_checksum(&self) -> &str {
        &self.catalog_checksum
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn session(&self, code: SessionCode) -> Option<&SessionRecord> {
        self.sessions.get(&code)
    }

    pub fn connections(&self) -> usize {
        self.conns.len()
    }

    /// Picks a code uniformly among unused codes and opens a fresh session.
    pub fn allocate_session(&mut self, now: Instant) -> Result<SessionCode, HubError> {
        if self.free.is_empty() {
            return Err(HubError::SessionsExhausted);
        }
        let i = self.rng.random_range(0..self.free.len());
        let code = self.free.swap_remove(i);
        self.sessions.insert(code, SessionRecord::new(code, now));
        info!("session {code} created");
        Ok(code)
    }

    fn free_session(&mut self, code: SessionCode) {
        if let Some(record) = self.sessions.remove(&code) {
            for member in record.members.values() {
                if let Some(conn) = member.conn.and_then(|c| self.conns.get_mut(&c)) {
                    conn.binding = None;
                }
            }
            self.free.push(code);
            info!("session {code} freed");
        }
    }

    pub fn connect(&mut self, conn: ConnId, now: Instant) {
        self.conns.insert(conn, Conn { last_seen: now, last_ping: None, binding: None });
    }

    /// Transport closed. The member stays registered so it can rejoin.
    pub fn disconnect(&mut self, conn: ConnId, now: Instant) {
        if let Some(Conn { binding: Some((code, client)), .. }) = self.conns.remove(&conn) {
            self.unbind(code, client, now, false);
        }
    }

    fn unbind(&mut self, code: SessionCode, client: ClientId, now: Instant, remove: bool) {
        let Some(record) = self.sessions.get_mut(&code) else {
            return;
        };
        if remove {
            record.members.remove(&client);
        } else if let Some(member) = record.members.get_mut(&client) {
            member.conn = None;
        }
        if record.connected_count() == 0 && record.empty_since.is_none() {
            record.empty_since = Some(now);
        }
    }

    /// Handles a raw text frame; undecodable frames get `bad_message`.
    pub fn handle_frame(&mut self, conn: ConnId, bytes: &[u8], now: Instant) -> Effects {
        match crate::protocol::decode_message(bytes) {
            Ok(msg) => self.handle(conn, msg, now),
            Err(e) => {
                self.touch(conn, now);
                let mut fx = Effects::default();
                fx.send(conn, Message::new(error(ErrorCode::BadMessage, e.to_string())));
                fx
            }
        }
    }

    fn touch(&mut self, conn: ConnId, now: Instant) {
        let c = self.conns.entry(conn).or_insert(Conn { last_seen: now, last_ping: None, binding: None });
        c.last_seen = now;
        c.last_ping = None;
    }

    pub fn handle(&mut self, conn: ConnId, msg: Message, now: Instant) -> Effects {
        self.touch(conn, now);
        if let Some((code, _)) = self.binding(conn) {
            if let Some(record) = self.sessions.get_mut(&code) {
                record.last_activity_at = now;
            }
        }
        let mut fx = Effects::default();
        match msg.payload {
            Payload::CreateSession => match self.allocate_session(now) {
                Ok(code) => fx.send(conn, Message::new(Payload::SessionCreated { code }).in_session(code)),
                Err(e) => fx.send(conn, Message::new(error(ErrorCode::SessionsExhausted, e.to_string()))),
            },
            Payload::JoinRequest(req) => self.join(conn, msg.session, req, now, &mut fx),
            Payload::Delta(delta) => self.delta(conn, msg.session, msg.sender, delta, &mut fx),
            Payload::Ping { nonce } => fx.send(conn, Message::new(Payload::Pong { nonce })),
            Payload::Pong { .. } => {}
            Payload::Leave => {
                if let Some((code, client)) = self.conns.get_mut(&conn).and_then(|c| c.binding.take()) {
                    debug!("client {client} left {code}");
                    self.unbind(code, client, now, true);
                }
            }
            other => fx.send(
                conn,
                Message::new(error(
                    ErrorCode::UnexpectedKind,
                    format!("clients may not send {}", other.kind()),
                )),
            ),
        }
        fx
    }

    fn binding(&self, conn: ConnId) -> Option<(SessionCode, ClientId)> {
        self.conns.get(&conn).and_then(|c| c.binding)
    }

    fn join(
        &mut self,
        conn: ConnId,
        code: Option<SessionCode>,
        req: JoinRequest,
        now: Instant,
        fx: &mut Effects,
    ) {
        let reject = |reason| Message::new(Payload::JoinReject { reason });
        let Some(code) = code.filter(|c| self.sessions.contains_key(c)) else {
            fx.send(conn, reject(RejectReason::UnknownCode));
            return;
        };
        // A connection belongs to at most one session at a time.
        if let Some((old_code, old_client)) = self.binding(conn) {
            if old_code != code || req.client_id != Some(old_client) {
                self.unbind(old_code, old_client, now, false);
            }
            if let Some(c) = self.conns.get_mut(&conn) {
                c.binding = None;
            }
        }

        let max_members = self.config.max_members;
        let record = self.sessions.get_mut(&code).expect("checked above");
        let rejoin = req.client_id.filter(|id| record.members.contains_key(id));
        let already_bound = rejoin.is_some_and(|id| record.members[&id].conn.is_some());
        if !already_bound && record.connected_count() >= max_members {
            fx.send(conn, reject(RejectReason::SessionFull).in_session(code));
            return;
        }

        let client = match rejoin {
            Some(id) => {
                let member = record.members.get_mut(&id).expect("checked above");
                if let Some(previous) = member.conn.replace(conn).filter(|c| *c != conn) {
                    // The old transport is superseded; drop it.
                    if let Some(c) = self.conns.get_mut(&previous) {
                        c.binding = None;
                    }
                    fx.close.push(previous);
                }
                member.role = req.role;
                id
            }
            None => {
                let mut id = ClientId(self.rng.random());
                while record.members.contains_key(&id) {
                    id = ClientId(self.rng.random());
                }
                record.members.insert(id, Member { role: req.role, conn: Some(conn) });
                id
            }
        };
        record.empty_since = None;
        record.last_activity_at = now;
        let seq = record.seq();
        let state = record.state.clone();
        self.conns.get_mut(&conn).expect("touched").binding = Some((code, client));

        let payload = if rejoin.is_some() {
            debug!("client {client} rejoined {code} at seq {seq}");
            Payload::FullSync(Box::new(FullSync { seq, state }))
        } else {
            debug!("client {client} joined {code} as {:?}", req.role);
            Payload::JoinAck(Box::new(JoinAck {
                client_id: client,
                code,
                seq,
                state,
                catalog_checksum: self.catalog_checksum.clone(),
                catalog: self.catalog.clone(),
            }))
        };
        fx.send(conn, Message::new(payload).in_session(code).with_seq(seq));
    }

    fn delta(
        &mut self,
        conn: ConnId,
        code: Option<SessionCode>,
        sender: Option<ClientId>,
        delta: StateDelta,
        fx: &mut Effects,
    ) {
        let member = self.binding(conn).filter(|(bound, client)| {
            code.is_none_or(|c| c == *bound) && sender.is_none_or(|s| s == *client)
        });
        let Some((code, client)) = member else {
            fx.send(conn, Message::new(error(ErrorCode::NotMember, "not a member of this session")));
            return;
        };
        let Some(record) = self.sessions.get_mut(&code) else {
            fx.send(conn, Message::new(error(ErrorCode::NotMember, "session is gone")));
            return;
        };

        let (accepted, rejected) = screen(&record.state, delta);
        if !rejected.is_empty() {
            let paths: Vec<String> = rejected.iter().map(|v| v.path.clone()).collect();
            let message = rejected.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
            fx.send(
                conn,
                Message::new(Payload::Error(ErrorPayload { code: ErrorCode::InvalidUpdate, message, paths }))
                    .in_session(code),
            );
        }
        if accepted.is_empty() {
            return;
        }

        let seq = record.next_seq;
        record.next_seq += 1;
        record.state.apply_delta(&accepted, seq, client);
        let message =
            Message::new(Payload::Delta(accepted)).in_session(code).from_sender(client).with_seq(seq);
        for (_, member_conn) in record.connected() {
            fx.send(member_conn, message.clone());
        }
    }

    /// Heartbeats, evictions and session expiry.
    pub fn tick(&mut self, now: Instant) -> Effects {
        let mut fx = Effects::default();
        let heartbeat = self.config.heartbeat;
        let evict_after = self.config.eviction_after();

        let mut evicted = Vec::new();
        for (id, conn) in &mut self.conns {
            let silent = now.saturating_duration_since(conn.last_seen);
            if silent >= evict_after {
                evicted.push(*id);
            } else if silent >= heartbeat
                && conn.last_ping.is_none_or(|p| now.saturating_duration_since(p) >= heartbeat)
            {
                conn.last_ping = Some(now);
                fx.send(*id, Message::new(Payload::Ping { nonce: self.next_nonce }));
                self.next_nonce += 1;
            }
        }
        evicted.sort_unstable();
        for id in evicted {
            info!("evicting silent connection {id}");
            self.disconnect(id, now);
            fx.close.push(id);
        }

        let grace = self.config.session_grace;
        let expired: Vec<SessionCode> = self
            .sessions
            .values()
            .filter(|r| r.empty_since.is_some_and(|t| now.saturating_duration_since(t) >= grace))
            .map(|r| r.code)
            .collect();
        for code in expired {
            self.free_session(code);
        }
        fx
    }
}

/// Splits a delta into updates the session may accept and violations.
///
/// Besides the per-value rules, a finalized measurement may be deleted but
/// no longer edited.
fn screen(state: &SessionState, delta: StateDelta) -> (StateDelta, Vec<Violation>) {
    let mut accepted = StateDelta::default();
    let mut rejected = Vec::new();
    for update in delta.updates {
        if let Err(v) = validate_update(&update) {
            rejected.push(v);
            continue;
        }
        if let Update::Measurement { id, value: Some(_) } = &update {
            if state.measurements.get(id).is_some_and(|m| m.finalized) {
                rejected.push(Violation::new(update.path(), Rule::FinalizedImmutable));
                continue;
            }
        }
        accepted.push(update);
    }
    (accepted, rejected)
}
