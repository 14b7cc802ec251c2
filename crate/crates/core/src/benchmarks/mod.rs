//! The three workloads: STREAM, naive matrix multiplication and direct
//! N-body. Each one computes its result functionally (and verifies it
//! against a serial reference) and separately generates the per-core
//! traces the engine times.

use std::ops::Range;

use thiserror::Error;

use crate::config::{Arrangement, ConfigError, SystemConfig, TimingParams};
use crate::engine::{SimError, TraceStep};
use crate::memsys::MemAccess;
use crate::runtime::CollectiveError;

pub mod matmul;
pub mod nbody;
pub mod stream;

pub use matmul::{matmul_run, Matrices, MatmulParams, MatmulResult};
pub use nbody::{nbody_run, nbody_step, Bodies, NbodyParams, NbodyResult, FLOPS_PER_PAIR};
pub use stream::{stream_run, StreamKernel, StreamParams, StreamResult};

/// Alignment of every array the allocator hands out.
pub const ALIGN: u64 = 64;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("node {node} needs {needed} bytes but has {capacity}")]
    DoesNotFit { node: usize, needed: u64, capacity: u64 },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("bodies {0} and {1} are at the same position")]
    Singularity(usize, usize),
    #[error("invalid benchmark parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Collective(#[from] CollectiveError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

impl BenchError {
    pub fn is_deadlock(&self) -> bool {
        matches!(self, BenchError::Sim(e) if e.is_deadlock())
    }
}

/// Bump allocator over one node's local address space.
#[derive(Debug, Clone)]
pub struct Layout {
    pub node: usize,
    next: u64,
    capacity: u64,
}

impl Layout {
    pub fn new(node: usize, capacity: u64) -> Self {
        Self {
            node,
            next: 0,
            capacity,
        }
    }

    pub fn for_node(cfg: &SystemConfig, node: usize) -> Self {
        Self::new(node, cfg.node_mem_bytes[node])
    }

    /// Reserve `bytes`, 64-byte aligned.
    pub fn alloc(&mut self, bytes: u64) -> Result<u64, BenchError> {
        let addr = self.next.next_multiple_of(ALIGN);
        let end = addr + bytes;
        if end > self.capacity {
            return Err(BenchError::DoesNotFit {
                node: self.node,
                needed: end,
                capacity: self.capacity,
            });
        }
        self.next = end;
        Ok(addr)
    }

    pub fn used(&self) -> u64 {
        self.next
    }
}

/// Cycle costs of the arithmetic the kernels perform.
#[derive(Debug, Clone, Copy)]
pub struct OpCosts {
    pub add: u64,
    pub mul: u64,
    pub div: u64,
    pub sqrt: u64,
    pub int: u64,
}

impl OpCosts {
    pub fn new(t: &TimingParams) -> Self {
        Self {
            add: t.fp_add_cycles,
            mul: t.fp_mul_cycles,
            div: t.fp_div_cycles,
            sqrt: t.fp_sqrt_cycles,
            int: t.int_op_cycles,
        }
    }
}

#[inline]
pub(crate) fn rd(core: usize, addr: u64, bytes: u8) -> TraceStep {
    TraceStep::Access(MemAccess::read(core as u32, addr, bytes))
}

#[inline]
pub(crate) fn wr(core: usize, addr: u64, bytes: u8) -> TraceStep {
    TraceStep::Access(MemAccess::write(core as u32, addr, bytes))
}

/// A trace phase that emits `body(i)` for each `i` in `range`, `chunk`
/// iterations per refill.
pub(crate) fn loop_phase(
    range: Range<usize>,
    chunk: usize,
    mut body: impl FnMut(usize, &mut Vec<TraceStep>) + 'static,
) -> impl FnMut(&mut Vec<TraceStep>) -> bool + 'static {
    let mut i = range.start;
    let end = range.end;
    move |out| {
        let stop = (i + chunk).min(end);
        while i < stop {
            body(i, out);
            i += 1;
        }
        i < end
    }
}

/// Which engine topology an arrangement maps to on `cfg`.
pub(crate) fn arranged(cfg: &SystemConfig, arr: Arrangement) -> Result<SystemConfig, BenchError> {
    Ok(cfg.with_arrangement(arr)?)
}

/// Bitwise equality of two float slices, with the first mismatch.
pub(crate) fn first_mismatch<T: PartialEq + Copy + std::fmt::Debug>(
    got: &[T],
    want: &[T],
    eq: impl Fn(T, T) -> bool,
) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!("length {} vs {}", got.len(), want.len()));
    }
    got.iter()
        .zip(want)
        .position(|(&g, &w)| !eq(g, w))
        .map(|i| format!("element {i}: {:?} vs {:?}", got[i], want[i]))
}
