//! Independent reference models shared by the oracle tests and the
//! acceptance suite. Each check returns a description of the first
//! disagreement.

#![allow(dead_code)]

use std::collections::VecDeque;

use mpsoc_sim::config::{preset, CacheConfig, SystemConfig};
use mpsoc_sim::engine::{run_checking_coherence, TraceStep, Workload};
use mpsoc_sim::memsys::{AccessKind, AccessOutcome, CacheState, MemAccess};
use mpsoc_sim::noc::MeshTopology;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fully explicit LRU: per set, lines ordered most to least recent, each
/// with a dirty bit.
pub struct LruOracle {
    sets: Vec<VecDeque<(u64, bool)>>,
    ways: usize,
    line_bytes: u64,
}

impl LruOracle {
    pub fn new(cfg: &CacheConfig) -> Self {
        Self {
            sets: vec![VecDeque::new(); cfg.n_sets as usize],
            ways: cfg.n_ways as usize,
            line_bytes: cfg.line_bytes as u64,
        }
    }

    pub fn access(&mut self, kind: AccessKind, addr: u64) -> AccessOutcome {
        let line = addr / self.line_bytes;
        let n_sets = self.sets.len() as u64;
        let set = &mut self.sets[(line % n_sets) as usize];
        let write = kind == AccessKind::Write;
        if let Some(pos) = set.iter().position(|&(l, _)| l == line) {
            let (_, dirty) = set.remove(pos).unwrap();
            set.push_front((line, dirty || write));
            return AccessOutcome::Hit;
        }
        set.push_front((line, write));
        let victim_dirty = if set.len() > self.ways {
            set.pop_back().unwrap().1
        } else {
            false
        };
        AccessOutcome::Miss { victim_dirty }
    }

    pub fn resident(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.sets.iter().flatten().map(|&(l, _)| l).collect();
        v.sort();
        v
    }
}

/// Replay 10,000 random accesses through the cache model and the oracle.
pub fn lru_trace_check(cfg: CacheConfig, seed: u64, span_lines: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = CacheState::new(&cfg);
    let mut oracle = LruOracle::new(&cfg);
    for step in 0..10_000 {
        let addr = rng.gen_range(0..span_lines * cfg.line_bytes as u64);
        let kind = if rng.gen_bool(0.3) { AccessKind::Write } else { AccessKind::Read };
        let got = cache.access(kind, addr);
        let want = oracle.access(kind, addr);
        if got != want {
            return Err(format!("{cfg:?} step {step}: {kind:?} {addr:#x} gave {got:?}, want {want:?}"));
        }
        if !cache.ranks_are_permutations() {
            return Err(format!("{cfg:?} step {step}: LRU ranks corrupted"));
        }
    }
    let mut resident: Vec<u64> = cache.resident().map(|(l, _)| l).collect();
    resident.sort();
    if resident != oracle.resident() {
        return Err(format!("{cfg:?}: resident lines differ after the trace"));
    }
    Ok(())
}

/// Five geometries, each with working sets of half, twice and eight times
/// its capacity.
pub fn lru_suite() -> Result<(), String> {
    let geometries = [
        CacheConfig::new(64, 4, 64),
        CacheConfig::new(64, 8, 64),
        CacheConfig::new(64, 16, 64),
        CacheConfig::new(4, 2, 16),
        CacheConfig::new(1, 8, 32),
    ];
    for (i, cfg) in geometries.into_iter().enumerate() {
        let capacity_lines = (cfg.n_sets * cfg.n_ways) as u64;
        for (j, span) in [capacity_lines / 2, capacity_lines * 2, capacity_lines * 8].into_iter().enumerate() {
            lru_trace_check(cfg, (i * 10 + j) as u64, span.max(1))?;
        }
    }
    Ok(())
}

/// A shared-bus node whose 2x2 caches force constant evictions.
pub fn tiny_smp(cores: u32) -> SystemConfig {
    let mut cfg = preset("BASE").unwrap();
    cfg.cores_per_node = cores;
    cfg.cache = CacheConfig::new(2, 2, 64);
    cfg
}

/// One access per entry: `(line, write, word, pause)`.
pub type MsiTrace = Vec<(u64, bool, u64, u64)>;

/// Run per-core traces with the single-writer check after every event.
pub fn msi_check(cores: u32, traces: &[MsiTrace]) -> Result<(), String> {
    let programs: Vec<Vec<TraceStep>> = traces
        .iter()
        .take(cores as usize)
        .enumerate()
        .map(|(c, t)| {
            t.iter()
                .flat_map(|&(line, write, word, pause)| {
                    let addr = line * 64 + word * 8;
                    let a = if write {
                        MemAccess::write(c as u32, addr, 8)
                    } else {
                        MemAccess::read(c as u32, addr, 8)
                    };
                    [TraceStep::Access(a), TraceStep::Compute(pause)]
                })
                .collect()
        })
        .collect();
    run_checking_coherence(&tiny_smp(cores), Workload::from_traces(programs))
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Seeded random traces over six contended lines.
pub fn msi_random_traces(seed: u64) -> (u32, Vec<MsiTrace>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = rng.gen_range(2..=4);
    let traces = (0..cores)
        .map(|_| {
            let len = rng.gen_range(0..40);
            (0..len)
                .map(|_| (rng.gen_range(0..6), rng.gen_bool(0.5), rng.gen_range(0..4), rng.gen_range(0..5)))
                .collect()
        })
        .collect();
    (cores, traces)
}

/// Every XY route of the 4x4 mesh is a Manhattan path of unit steps that
/// finishes its X movement before any Y movement.
pub fn xy_suite() -> Result<(), String> {
    let mesh = MeshTopology::new(4, 4);
    for src in 0..16 {
        for dst in 0..16 {
            let path = mesh.route_xy(src, dst);
            let (sx, sy) = (src % 4, src / 4);
            let (dx, dy) = (dst % 4, dst / 4);
            if path.len() != sx.abs_diff(dx) + sy.abs_diff(dy) {
                return Err(format!("{src}->{dst}: {} hops", path.len()));
            }
            let mut at = src;
            let mut turned = false;
            for &next in &path {
                let step = (at % 4).abs_diff(next % 4) + (at / 4).abs_diff(next / 4);
                if step != 1 {
                    return Err(format!("{src}->{dst} jumps from {at} to {next}"));
                }
                let vertical = at % 4 == next % 4;
                if turned && !vertical {
                    return Err(format!("{src}->{dst} moves in X after Y"));
                }
                turned |= vertical;
                at = next;
            }
            if at != dst {
                return Err(format!("{src}->{dst} ends at {at}"));
            }
        }
    }
    Ok(())
}
