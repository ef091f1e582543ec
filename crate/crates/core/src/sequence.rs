use serde::{Deserialize, Serialize};

use crate::graph::TripleId;

/// Monotonic counters for ids and the logical clock. Persisted with the
/// store so ids never repeat across restarts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequencer {
    clock: u64,
    next_triple: u64,
    next_task: u64,
    next_offer: u64,
}

impl Sequencer {
    /// Advances and returns the logical clock.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn triple_id(&mut self) -> TripleId {
        self.next_triple += 1;
        TripleId(self.next_triple)
    }

    pub fn task_id(&mut self) -> String {
        self.next_task += 1;
        format!("ct-{}", self.next_task)
    }

    pub fn offer_id(&mut self) -> String {
        self.next_offer += 1;
        format!("of-{}", self.next_offer)
    }
}
