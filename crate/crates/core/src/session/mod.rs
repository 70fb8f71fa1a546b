//! Session bookkeeping: code allocation, membership, sequencing, heartbeat.

mod hub;
mod replica;

pub use hub::{ConnId, Effects, HubConfig, HubError, Member, Outbound, SessionHub, SessionRecord};
pub use replica::Replica;

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::time::{Duration, Instant};

    use rand::rngs::StdRng;
    use rand::SeedableRng;

    use super::*;
    use crate::protocol::{
        ClientId, ClientRole, ErrorCode, JoinRequest, Measurement, Message, Payload, RejectReason,
        SessionCode, StateDelta, Update,
    };

    fn hub() -> SessionHub {
        SessionHub::new(HubConfig::default(), None, "abc".into(), StdRng::seed_from_u64(7))
    }

    fn join_msg(code: SessionCode, client_id: Option<ClientId>) -> Message {
        Message::new(Payload::JoinRequest(JoinRequest { role: ClientRole::Simulator, client_id }))
            .in_session(code)
    }

    /// Opens a session and joins `n` connections (ids 1..=n).
    fn session_with(hub: &mut SessionHub, n: u64, now: Instant) -> (SessionCode, Vec<ClientId>) {
        let code = hub.allocate_session(now).unwrap();
        let ids = (1..=n)
            .map(|conn| {
                hub.connect(conn, now);
                let fx = hub.handle(conn, join_msg(code, None), now);
                match &fx.to(conn)[0].payload {
                    Payload::JoinAck(ack) => ack.client_id,
                    other => panic!("expected join_ack, got {other:?}"),
                }
            })
            .collect();
        (code, ids)
    }

    fn delta(updates: Vec<Update>) -> Message {
        Message::new(Payload::Delta(StateDelta::new(updates)))
    }

    #[test]
    fn codes_are_unique_until_exhausted() {
        let mut hub = hub();
        let now = Instant::now();
        let codes: BTreeSet<SessionCode> = (0..10_000).map(|_| hub.allocate_session(now).unwrap()).collect();
        assert_eq!(codes.len(), 10_000);
        assert_eq!(hub.allocate_session(now), Err(HubError::SessionsExhausted));
    }

    #[test]
    fn unknown_code_is_rejected() {
        let mut hub = hub();
        let now = Instant::now();
        hub.connect(1, now);
        let fx = hub.handle(1, join_msg("9999".parse().unwrap(), None), now);
        assert_eq!(fx.to(1)[0].payload, Payload::JoinReject { reason: RejectReason::UnknownCode });
    }

    #[test]
    fn joins_see_the_same_snapshot() {
        let mut hub = hub();
        let now = Instant::now();
        let code = hub.allocate_session(now).unwrap();
        let mut acks = Vec::new();
        for conn in [1, 2] {
            hub.connect(conn, now);
            match hub.handle(conn, join_msg(code, None), now).to(conn)[0].payload.clone() {
                Payload::JoinAck(ack) => acks.push(ack),
                other => panic!("{other:?}"),
            }
        }
        assert_ne!(acks[0].client_id, acks[1].client_id);
        assert_eq!((acks[0].seq, &acks[0].state), (acks[1].seq, &acks[1].state));
        assert_eq!(acks[0].catalog_checksum, "abc");
    }

    #[test]
    fn delta_reaches_every_member_with_one_seq() {
        let mut hub = hub();
        let now = Instant::now();
        let (code, ids) = session_with(&mut hub, 3, now);
        let fx = hub.handle(1, delta(vec![Update::ChannelColor { channel: 0, color: [255, 0, 0] }]), now);
        for conn in 1..=3 {
            let got = fx.to(conn);
            assert_eq!(got.len(), 1);
            assert_eq!(got[0].seq, 1);
            assert_eq!(got[0].sender, Some(ids[0]));
            assert_eq!(got[0].session, Some(code));
        }
        assert_eq!(hub.session(code).unwrap().next_seq, 2);
        assert_eq!(hub.session(code).unwrap().state.channels[&0].color, [255, 0, 0]);
    }

    #[test]
    fn invalid_updates_are_reported_and_valid_ones_applied() {
        let mut hub = hub();
        let now = Instant::now();
        let (code, _) = session_with(&mut hub, 2, now);
        let fx = hub.handle(
            1,
            delta(vec![
                Update::ChannelWindow { channel: 1, lo: 0.8, hi: 0.2 },
                Update::Hover(Some("cube_1".into())),
            ]),
            now,
        );
        let to_sender = fx.to(1);
        match &to_sender[0].payload {
            Payload::Error(e) => {
                assert_eq!(e.code, ErrorCode::InvalidUpdate);
                assert_eq!(e.paths, vec!["channels.1.window".to_string()]);
            }
            other => panic!("{other:?}"),
        }
        let Payload::Delta(d) = &fx.to(2)[0].payload else { panic!() };
        assert_eq!(d.updates, vec![Update::Hover(Some("cube_1".into()))]);
        assert!(hub.session(code).unwrap().state.channels.is_empty());

        let fx = hub.handle(1, delta(vec![Update::ChannelOpacity { channel: 0, opacity: 2.0 }]), now);
        assert!(fx.to(2).is_empty());
        assert_eq!(hub.session(code).unwrap().next_seq, 2);
    }

    #[test]
    fn non_members_get_not_member() {
        let mut hub = hub();
        let now = Instant::now();
        session_with(&mut hub, 1, now);
        hub.connect(9, now);
        let fx = hub.handle(9, delta(vec![Update::Hover(None)]), now);
        let Payload::Error(e) = &fx.to(9)[0].payload else { panic!() };
        assert_eq!(e.code, ErrorCode::NotMember);
        assert!(fx.to(1).is_empty());
    }

    #[test]
    fn finalized_measurement_is_frozen_but_deletable() {
        let mut hub = hub();
        let now = Instant::now();
        let (code, _) = session_with(&mut hub, 1, now);
        let m = Measurement::new("m1", [0.0; 3], [3.0, 4.0, 0.0], true);
        hub.handle(1, delta(vec![Update::Measurement { id: "m1".into(), value: Some(m.clone()) }]), now);
        let moved = Measurement::new("m1", [0.0; 3], [6.0, 8.0, 0.0], true);
        let fx = hub.handle(1, delta(vec![Update::Measurement { id: "m1".into(), value: Some(moved) }]), now);
        let Payload::Error(e) = &fx.to(1)[0].payload else { panic!() };
        assert_eq!(e.paths, vec!["measurements.m1".to_string()]);
        assert_eq!(hub.session(code).unwrap().state.measurements["m1"], m);

        let fx = hub.handle(1, delta(vec![Update::Measurement { id: "m1".into(), value: None }]), now);
        assert!(matches!(fx.to(1)[0].payload, Payload::Delta(_)));
        assert!(hub.session(code).unwrap().state.measurements.is_empty());
    }

    #[test]
    fn silent_member_is_pinged_then_evicted() {
        let mut hub = hub();
        let t0 = Instant::now();
        session_with(&mut hub, 2, t0);
        let s = Duration::from_secs;
        assert!(hub.tick(t0 + s(4)).send.is_empty());
        let fx = hub.tick(t0 + s(5));
        assert_eq!(fx.send.len(), 2);
        assert!(matches!(fx.send[0].message.payload, Payload::Ping { .. }));
        // Connection 2 keeps answering; connection 1 stays silent.
        for k in 5..=15 {
            hub.handle(2, Message::new(Payload::Pong { nonce: k }), t0 + s(k));
            let fx = hub.tick(t0 + s(k));
            if k < 15 {
                assert!(fx.close.is_empty(), "evicted early at {k}s");
            } else {
                assert_eq!(fx.close, vec![1]);
            }
        }
        assert_eq!(hub.connections(), 1);
    }

    #[test]
    fn empty_session_is_freed_after_grace_and_code_recycles_clean() {
        let mut hub = SessionHub::new(
            HubConfig { session_grace: Duration::from_secs(600), ..HubConfig::default() },
            None,
            String::new(),
            StdRng::seed_from_u64(1),
        );
        let t0 = Instant::now();
        let (code, _) = session_with(&mut hub, 1, t0);
        hub.handle(1, delta(vec![Update::Hover(Some("x".into()))]), t0);
        hub.handle(1, Message::new(Payload::Leave), t0);
        hub.tick(t0 + Duration::from_secs(599));
        assert!(hub.session(code).is_some());
        hub.tick(t0 + Duration::from_secs(600));
        assert!(hub.session(code).is_none());
        assert_eq!(hub.live_sessions(), 0);

        // Fill the space; the freed code must come back with no history.
        let now = t0 + Duration::from_secs(601);
        while hub.allocate_session(now).is_ok() {}
        let record = hub.session(code).unwrap();
        assert_eq!(record.next_seq, 1);
        assert!(record.state.same_values(&Default::default()));
        assert!(record.members.is_empty());
    }

    #[test]
    fn rejoin_gets_full_sync() {
        let mut hub = hub();
        let now = Instant::now();
        let (code, ids) = session_with(&mut hub, 2, now);
        hub.handle(2, delta(vec![Update::Hover(Some("a".into()))]), now);
        hub.disconnect(1, now);
        hub.handle(2, delta(vec![Update::Hover(Some("b".into()))]), now);
        hub.connect(5, now);
        let fx = hub.handle(5, join_msg(code, Some(ids[0])), now);
        let Payload::FullSync(sync) = &fx.to(5)[0].payload else { panic!() };
        assert_eq!(sync.seq, 2);
        assert_eq!(sync.state, hub.session(code).unwrap().state);
        let fx = hub.handle(2, delta(vec![Update::Hover(None)]), now);
        assert_eq!(fx.to(5).len(), 1);
    }

    #[test]
    fn member_cap_is_enforced() {
        let mut hub = SessionHub::new(
            HubConfig { max_members: 2, ..HubConfig::default() },
            None,
            String::new(),
            StdRng::seed_from_u64(3),
        );
        let now = Instant::now();
        let (code, _) = session_with(&mut hub, 2, now);
        hub.connect(3, now);
        let fx = hub.handle(3, join_msg(code, None), now);
        assert_eq!(fx.to(3)[0].payload, Payload::JoinReject { reason: RejectReason::SessionFull });
    }

    #[test]
    fn server_only_kinds_are_refused() {
        let mut hub = hub();
        let now = Instant::now();
        hub.connect(1, now);
        let fx = hub.handle(1, Message::new(Payload::Leave), now);
        assert!(fx.send.is_empty());
        let fx = hub.handle(1, Message::new(Payload::SessionCreated { code: "0001".parse().unwrap() }), now);
        let Payload::Error(e) = &fx.to(1)[0].payload else { panic!() };
        assert_eq!(e.code, ErrorCode::UnexpectedKind);
        let fx = hub.handle_frame(1, b"{not json", now);
        let Payload::Error(e) = &fx.to(1)[0].payload else { panic!() };
        assert_eq!(e.code, ErrorCode::BadMessage);
    }

    #[test]
    fn sessions_are_isolated() {
        let mut hub = hub();
        let now = Instant::now();
        let (a, _) = session_with(&mut hub, 1, now);
        let b = hub.allocate_session(now).unwrap();
        hub.connect(2, now);
        hub.handle(2, join_msg(b, None), now);
        let fx = hub.handle(1, delta(vec![Update::Hover(Some("x".into()))]), now);
        assert!(fx.to(2).is_empty());
        assert_eq!(hub.session(b).unwrap().state.hover, None);
        assert_eq!(hub.session(a).unwrap().state.hover.as_deref(), Some("x"));
    }
}
