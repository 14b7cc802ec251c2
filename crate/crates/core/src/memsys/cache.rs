//! Set-associative write-back, write-allocate L1 data cache with true LRU.

use crate::config::CacheConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineState {
    Invalid,
    Shared,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    Miss { victim_dirty: bool },
}

/// A line pushed out of the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub line: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy)]
struct Way {
    line: u64,
    state: LineState,
    /// 0 = most recently used, n_ways-1 = least recently used.
    lru_rank: u8,
}

/// Contents of one core's cache.
///
/// Lines are identified by their line address (`addr >> log2(line_bytes)`);
/// the full line address doubles as the tag.
#[derive(Debug, Clone)]
pub struct CacheState {
    n_ways: usize,
    set_mask: u64,
    line_shift: u32,
    ways: Vec<Way>,
    /// Way touched by the last access; it is always rank 0 of its set.
    mru: usize,
}

impl CacheState {
    pub fn new(cfg: &CacheConfig) -> Self {
        let n_ways = cfg.n_ways as usize;
        let n_sets = cfg.n_sets as usize;
        assert!(n_ways >= 1 && n_ways <= 255, "unsupported associativity {n_ways}");
        assert!(cfg.n_sets.is_power_of_two() && cfg.line_bytes.is_power_of_two());
        let ways = (0..n_sets * n_ways)
            .map(|i| Way {
                line: u64::MAX,
                state: LineState::Invalid,
                lru_rank: (i % n_ways) as u8,
            })
            .collect();
        Self {
            n_ways,
            set_mask: n_sets as u64 - 1,
            line_shift: cfg.line_bytes.trailing_zeros(),
            ways,
            mru: usize::MAX,
        }
    }

    #[inline]
    pub fn line_of(&self, addr: u64) -> u64 {
        addr >> self.line_shift
    }

    #[inline]
    pub fn set_of(&self, line: u64) -> usize {
        (line & self.set_mask) as usize
    }

    /// State of `line` if it is the most recently used line, without any
    /// bookkeeping. Lets sequential accesses skip the set search.
    #[inline]
    pub fn mru_state(&self, line: u64) -> Option<LineState> {
        let w = self.ways.get(self.mru)?;
        (w.line == line && w.state != LineState::Invalid).then_some(w.state)
    }

    #[inline]
    fn find(&self, line: u64) -> Option<usize> {
        let base = self.set_of(line) * self.n_ways;
        (base..base + self.n_ways)
            .find(|&i| self.ways[i].line == line && self.ways[i].state != LineState::Invalid)
    }

    pub fn state(&self, line: u64) -> LineState {
        self.find(line)
            .map(|i| self.ways[i].state)
            .unwrap_or(LineState::Invalid)
    }

    #[inline]
    fn touch(&mut self, idx: usize) {
        let base = idx - idx % self.n_ways;
        let rank = self.ways[idx].lru_rank;
        for w in &mut self.ways[base..base + self.n_ways] {
            if w.lru_rank < rank {
                w.lru_rank += 1;
            }
        }
        self.ways[idx].lru_rank = 0;
        self.mru = idx;
    }

    fn victim(&self, set: usize) -> usize {
        let base = set * self.n_ways;
        let ways = &self.ways[base..base + self.n_ways];
        let pick = ways
            .iter()
            .position(|w| w.state == LineState::Invalid)
            .or_else(|| {
                ways.iter()
                    .position(|w| w.lru_rank as usize == self.n_ways - 1)
            })
            .expect("LRU ranks form a permutation");
        base + pick
    }

    /// Mark `line` most recently used. Returns its state, or `None` when the
    /// line is not present.
    #[inline]
    pub fn touch_line(&mut self, line: u64) -> Option<LineState> {
        if let Some(state) = self.mru_state(line) {
            return Some(state);
        }
        let idx = self.find(line)?;
        self.touch(idx);
        Some(self.ways[idx].state)
    }

    /// Change the state of a present line; returns false if absent.
    pub fn set_state(&mut self, line: u64, state: LineState) -> bool {
        match self.find(line) {
            Some(idx) => {
                self.ways[idx].state = state;
                true
            }
            None => false,
        }
    }

    /// Bring `line` in with `state`, evicting the LRU way if the set is full.
    /// The line must not already be present.
    pub fn install(&mut self, line: u64, state: LineState) -> Option<Eviction> {
        debug_assert!(self.find(line).is_none(), "line {line:#x} already cached");
        let idx = self.victim(self.set_of(line));
        let old = self.ways[idx];
        self.ways[idx].line = line;
        self.ways[idx].state = state;
        self.touch(idx);
        (old.state != LineState::Invalid).then_some(Eviction {
            line: old.line,
            dirty: old.state == LineState::Modified,
        })
    }

    /// Drop `line`; returns the state it had.
    pub fn invalidate(&mut self, line: u64) -> LineState {
        match self.find(line) {
            Some(idx) => {
                let prev = self.ways[idx].state;
                self.ways[idx].state = LineState::Invalid;
                prev
            }
            None => LineState::Invalid,
        }
    }

    /// Single-cache access without any coherence actions: hits refresh LRU,
    /// misses allocate (reads as Shared, writes as Modified).
    pub fn access(&mut self, kind: AccessKind, addr: u64) -> AccessOutcome {
        let line = self.line_of(addr);
        if let Some(idx) = self.find(line) {
            self.touch(idx);
            if kind == AccessKind::Write {
                self.ways[idx].state = LineState::Modified;
            }
            return AccessOutcome::Hit;
        }
        let state = match kind {
            AccessKind::Read => LineState::Shared,
            AccessKind::Write => LineState::Modified,
        };
        let victim_dirty = self.install(line, state).is_some_and(|e| e.dirty);
        AccessOutcome::Miss { victim_dirty }
    }

    /// Lines currently valid in the cache with their states.
    pub fn resident(&self) -> impl Iterator<Item = (u64, LineState)> + '_ {
        self.ways
            .iter()
            .filter(|w| w.state != LineState::Invalid)
            .map(|w| (w.line, w.state))
    }

    /// True when every set's ranks are a permutation of `0..n_ways`.
    pub fn ranks_are_permutations(&self) -> bool {
        self.ways.chunks(self.n_ways).all(|set| {
            let mut seen = vec![false; self.n_ways];
            set.iter().all(|w| {
                let r = w.lru_rank as usize;
                r < self.n_ways && !std::mem::replace(&mut seen[r], true)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CacheConfig;

    fn base() -> CacheState {
        CacheState::new(&CacheConfig::new(64, 4, 64))
    }

    #[test]
    fn spatial_locality() {
        let mut c = base();
        assert_eq!(c.access(AccessKind::Read, 0), AccessOutcome::Miss { victim_dirty: false });
        assert_eq!(c.access(AccessKind::Read, 8), AccessOutcome::Hit);
    }

    #[test]
    fn lru_evicts_first_touched() {
        let mut c = base();
        let stride = 64 * 64; // same set
        for i in 0..5u64 {
            assert!(matches!(c.access(AccessKind::Read, i * stride), AccessOutcome::Miss { .. }));
        }
        assert_eq!(c.state(c.line_of(0)), LineState::Invalid);
        for i in 1..5u64 {
            assert_eq!(c.state(c.line_of(i * stride)), LineState::Shared);
        }
        assert!(c.ranks_are_permutations());
    }

    #[test]
    fn sequential_512_bytes_miss_eight_times() {
        let mut c = base();
        let misses = (0..64u64)
            .filter(|i| matches!(c.access(AccessKind::Read, i * 8), AccessOutcome::Miss { .. }))
            .count();
        assert_eq!(misses, 512 / 64);
    }

    #[test]
    fn dirty_victim_reported() {
        let mut c = CacheState::new(&CacheConfig::new(1, 1, 64));
        c.access(AccessKind::Write, 0);
        assert_eq!(c.access(AccessKind::Read, 64), AccessOutcome::Miss { victim_dirty: true });
        assert_eq!(c.access(AccessKind::Read, 128), AccessOutcome::Miss { victim_dirty: false });
    }

    #[test]
    fn write_hit_sets_modified() {
        let mut c = base();
        c.access(AccessKind::Read, 128);
        c.access(AccessKind::Write, 136);
        assert_eq!(c.state(c.line_of(128)), LineState::Modified);
    }

    #[test]
    fn invalidated_way_is_reused_first() {
        let mut c = base();
        let stride = 64 * 64;
        for i in 0..4u64 {
            c.access(AccessKind::Read, i * stride);
        }
        c.invalidate(c.line_of(2 * stride));
        c.access(AccessKind::Read, 9 * stride);
        // Lines 0, 1 and 3 survive because the hole was filled.
        for i in [0u64, 1, 3, 9] {
            assert_ne!(c.state(c.line_of(i * stride)), LineState::Invalid);
        }
        assert!(c.ranks_are_permutations());
    }
}
