use crate::protocol::{ApplyReport, ClientId, FullSync, JoinAck, SessionState, StateDelta};

/// A client's copy of one session's state.
///
/// Only server-stamped deltas and full syncs touch it; a client's own
/// deltas land when the server echoes them back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replica {
    state: SessionState,
    seq: u64,
}

impl Replica {
    pub fn from_join(ack: &JoinAck) -> Self {
        Replica { state: ack.state.clone(), seq: ack.seq }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    /// Highest seq folded in so far.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Replaces the state wholesale. Deltas at or below the sync seq are
    /// ignored from then on.
    pub fn full_sync(&mut self, sync: &FullSync) {
        self.state = sync.state.clone();
        self.seq = sync.seq;
    }

    /// Applies a broadcast delta. Returns `None` for one already covered by
    /// the replica's seq.
    pub fn apply(&mut self, delta: &StateDelta, seq: u64, sender: ClientId) -> Option<ApplyReport> {
        if seq <= self.seq {
            return None;
        }
        self.seq = seq;
        Some(self.state.apply_delta(delta, seq, sender))
    }
}
