//! MSI snoop-invalidate protocol between the L1 caches of one node.

use std::collections::HashMap;

use super::cache::{CacheState, LineState};

/// What the other caches did in response to a bus transaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnoopResult {
    /// Cores whose copy went to Invalid.
    pub invalidated: Vec<usize>,
    /// Cores that had to write a Modified copy back first.
    pub written_back: Vec<usize>,
}

/// Exclusive-ownership snoop for a write by `writer` to `line`: every other
/// copy is invalidated; a Modified copy is written back before it goes.
pub fn snoop(caches: &mut [CacheState], writer: usize, line: u64, enabled: bool) -> SnoopResult {
    let mut res = SnoopResult::default();
    if !enabled {
        return res;
    }
    for (core, cache) in caches.iter_mut().enumerate() {
        if core == writer {
            continue;
        }
        match cache.invalidate(line) {
            LineState::Invalid => {}
            LineState::Shared => res.invalidated.push(core),
            LineState::Modified => {
                res.written_back.push(core);
                res.invalidated.push(core);
            }
        }
    }
    res
}

/// Read snoop: a Modified copy elsewhere is written back and downgraded to
/// Shared. Returns the core that supplied the writeback, if any.
pub fn snoop_read(caches: &mut [CacheState], reader: usize, line: u64, enabled: bool) -> Option<usize> {
    if !enabled {
        return None;
    }
    for (core, cache) in caches.iter_mut().enumerate() {
        if core != reader && cache.state(line) == LineState::Modified {
            cache.set_state(line, LineState::Shared);
            // MSI allows at most one Modified copy.
            return Some(core);
        }
    }
    None
}

/// The smallest line that is Modified in one cache while valid in
/// another, breaking the single-writer rule.
pub fn msi_violation(caches: &[CacheState]) -> Option<u64> {
    let mut holders: HashMap<u64, (u32, bool)> = HashMap::new();
    for cache in caches {
        for (line, state) in cache.resident() {
            let h = holders.entry(line).or_default();
            h.0 += 1;
            h.1 |= state == LineState::Modified;
        }
    }
    holders
        .into_iter()
        .filter(|&(_, (n, m))| m && n > 1)
        .map(|(line, _)| line)
        .min()
}
