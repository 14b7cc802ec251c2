//! Round-robin arbiter for a node's shared memory bus.

use crate::config::TimingParams;

/// Arbiter state for one node's bus. Requesters are the node's cores,
/// identified by their local index.
#[derive(Debug, Clone)]
pub struct BusArbiter {
    pub node_id: usize,
    /// Next requester favoured by the round-robin pointer.
    rr_next: usize,
    pub busy_until: u64,
    waiting: Vec<bool>,
    n_waiting: usize,
    pub busy_cycles: u64,
    pub transactions: u64,
}

impl BusArbiter {
    pub fn new(node_id: usize, requesters: usize) -> Self {
        Self {
            node_id,
            rr_next: 0,
            busy_until: 0,
            waiting: vec![false; requesters],
            n_waiting: 0,
            busy_cycles: 0,
            transactions: 0,
        }
    }

    /// Immediate-reservation form: serve `bytes` for `requester` at the
    /// first cycle at or after `at` the bus is free. Returns the completion
    /// cycle. Calls must be made in request order.
    pub fn transaction(&mut self, timing: &TimingParams, requester: usize, bytes: u64, at: u64) -> u64 {
        debug_assert!(bytes > 0, "zero-byte bus transaction");
        let start = at.max(self.busy_until);
        self.grant(requester, start, timing.bus_service_cycles(bytes))
    }

    /// True when a new request at `now` can start immediately.
    #[inline]
    pub fn idle_at(&self, now: u64) -> bool {
        self.n_waiting == 0 && self.busy_until <= now
    }

    pub fn has_waiting(&self) -> bool {
        self.n_waiting > 0
    }

    /// Park `requester` until the bus frees up.
    pub fn enqueue(&mut self, requester: usize) {
        debug_assert!(!self.waiting[requester], "core {requester} already waiting");
        self.waiting[requester] = true;
        self.n_waiting += 1;
    }

    /// Remove and return the waiting requester the round-robin pointer
    /// reaches first.
    pub fn pick_next(&mut self) -> Option<usize> {
        if self.n_waiting == 0 {
            return None;
        }
        let n = self.waiting.len();
        let pick = (0..n)
            .map(|i| (self.rr_next + i) % n)
            .find(|&r| self.waiting[r])?;
        self.waiting[pick] = false;
        self.n_waiting -= 1;
        Some(pick)
    }

    /// Occupy the bus from `start` for `service` cycles on behalf of
    /// `requester`; returns the completion cycle.
    pub fn grant(&mut self, requester: usize, start: u64, service: u64) -> u64 {
        debug_assert!(start >= self.busy_until, "overlapping bus grants");
        self.busy_until = start + service;
        self.busy_cycles += service;
        self.transactions += 1;
        self.rr_next = (requester + 1) % self.waiting.len();
        self.busy_until
    }
}
