//! STREAM: sustained memory bandwidth of four simple vector kernels.
//!
//! All kernels write `a`; `b` and `c` stay constant, so after every
//! repetition the arrays have a closed form that the run checks exactly.

use crate::config::{Arrangement, SystemConfig};
use crate::engine::{run, Program, SimStats, TraceStep, Workload};
use crate::memsys::AccessKind;
use crate::runtime::partition_even;

use super::{arranged, first_mismatch, loop_phase, rd, wr, BenchError, Layout, OpCosts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKernel {
    Copy,
    Scale,
    Add,
    Triad,
}

pub const STREAM_KERNELS: [StreamKernel; 4] = [
    StreamKernel::Copy,
    StreamKernel::Scale,
    StreamKernel::Add,
    StreamKernel::Triad,
];

impl StreamKernel {
    pub fn name(self) -> &'static str {
        match self {
            StreamKernel::Copy => "COPY",
            StreamKernel::Scale => "SCALE",
            StreamKernel::Add => "ADD",
            StreamKernel::Triad => "TRIAD",
        }
    }

    /// Bytes per element the reference benchmark credits the kernel with.
    pub fn counted_bytes_per_elem(self) -> u64 {
        match self {
            StreamKernel::Copy | StreamKernel::Scale => 16,
            StreamKernel::Add | StreamKernel::Triad => 24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub n: usize,
    pub reps: usize,
    pub q: f64,
}

impl StreamParams {
    pub fn new(n: usize) -> Self {
        Self { n, reps: 10, q: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Array {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamArrays {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StreamArrays {
    pub const A0: f64 = 1.0;
    pub const B0: f64 = 2.0;
    pub const C0: f64 = 1.0;

    pub fn new(n: usize) -> Self {
        Self {
            a: vec![Self::A0; n],
            b: vec![Self::B0; n],
            c: vec![Self::C0; n],
        }
    }

    /// Run `kernel` over `range`, reporting each element access to `log`.
    pub fn apply(
        &mut self,
        kernel: StreamKernel,
        q: f64,
        range: std::ops::Range<usize>,
        log: &mut impl FnMut(Array, usize, AccessKind),
    ) {
        use AccessKind::{Read, Write};
        for i in range {
            let v = match kernel {
                StreamKernel::Copy => {
                    log(Array::B, i, Read);
                    self.b[i]
                }
                StreamKernel::Scale => {
                    log(Array::B, i, Read);
                    q * self.b[i]
                }
                StreamKernel::Add => {
                    log(Array::B, i, Read);
                    log(Array::C, i, Read);
                    self.b[i] + self.c[i]
                }
                StreamKernel::Triad => {
                    log(Array::B, i, Read);
                    log(Array::C, i, Read);
                    self.b[i] + q * self.c[i]
                }
            };
            log(Array::A, i, Write);
            self.a[i] = v;
        }
    }

    /// Expected contents after any number (≥ 1) of full repetitions.
    pub fn check(&self, q: f64) -> Result<(), BenchError> {
        let n = self.a.len();
        let want_a = vec![Self::B0 + q * Self::C0; n];
        for (name, got, want) in [
            ("a", &self.a, &want_a),
            ("b", &self.b, &vec![Self::B0; n]),
            ("c", &self.c, &vec![Self::C0; n]),
        ] {
            if let Some(m) = first_mismatch(got, want, |x: f64, y: f64| x.to_bits() == y.to_bits()) {
                return Err(BenchError::Verification(format!("STREAM array {name}: {m}")));
            }
        }
        Ok(())
    }
}

/// Base addresses of the three arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLayout {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl StreamLayout {
    pub fn allocate(layout: &mut Layout, n: usize) -> Result<Self, BenchError> {
        let bytes = n as u64 * 8;
        Ok(Self {
            a: layout.alloc(bytes)?,
            b: layout.alloc(bytes)?,
            c: layout.alloc(bytes)?,
        })
    }

    pub fn addr(&self, array: Array, i: usize) -> u64 {
        let base = match array {
            Array::A => self.a,
            Array::B => self.b,
            Array::C => self.c,
        };
        base + 8 * i as u64
    }
}

/// Steps of one kernel iteration.
#[inline]
pub fn emit(kernel: StreamKernel, i: usize, core: usize, l: &StreamLayout, c: &OpCosts, out: &mut Vec<TraceStep>) {
    let off = 8 * i as u64;
    match kernel {
        StreamKernel::Copy => out.extend([rd(core, l.b + off, 8), wr(core, l.a + off, 8)]),
        StreamKernel::Scale => out.extend([
            rd(core, l.b + off, 8),
            TraceStep::Compute(c.mul),
            wr(core, l.a + off, 8),
        ]),
        StreamKernel::Add => out.extend([
            rd(core, l.b + off, 8),
            rd(core, l.c + off, 8),
            TraceStep::Compute(c.add),
            wr(core, l.a + off, 8),
        ]),
        StreamKernel::Triad => out.extend([
            rd(core, l.b + off, 8),
            rd(core, l.c + off, 8),
            TraceStep::Compute(c.mul + c.add),
            wr(core, l.a + off, 8),
        ]),
    }
    out.push(TraceStep::Compute(c.int));
}

/// Materialized trace of one kernel over a partition.
pub fn trace_for(
    kernel: StreamKernel,
    part: crate::runtime::Partition,
    layout: &StreamLayout,
    costs: &OpCosts,
    core: usize,
) -> Vec<TraceStep> {
    let mut out = Vec::new();
    for i in part.range() {
        emit(kernel, i, core, layout, costs, &mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct StreamResult {
    /// Best (smallest) cycles per kernel over all repetitions.
    pub best_cycles: [u64; 4],
    /// STREAM-counted bytes per cycle at the best repetition.
    pub bandwidth: [f64; 4],
    pub stats: SimStats,
    pub arrays: StreamArrays,
    pub warnings: Vec<String>,
}

impl StreamResult {
    pub fn bandwidth_of(&self, k: StreamKernel) -> f64 {
        self.bandwidth[k as usize]
    }

    /// Raw bus bytes per cycle over the whole run, including
    /// write-allocate fills and writebacks.
    pub fn raw_bus_bandwidth(&self) -> f64 {
        self.stats.bus_bytes.iter().sum::<u64>() as f64 / self.stats.total_cycles as f64
    }
}

/// Run STREAM with `workers` cores of one node of `cfg`.
pub fn stream_run(params: &StreamParams, workers: usize, cfg: &SystemConfig) -> Result<StreamResult, BenchError> {
    if params.n == 0 || params.reps == 0 || workers == 0 {
        return Err(BenchError::InvalidParams(
            "STREAM needs n, reps and workers of at least 1".into(),
        ));
    }
    let cfg = arranged(cfg, Arrangement::new(1, workers as u32))?;
    let mut warnings = Vec::new();
    let cache_bytes = cfg.cache.total_bytes() * workers as u64;
    if (params.n as u64) * 8 < 4 * cache_bytes {
        warnings.push(format!(
            "arrays of {} bytes are smaller than 4x the {} bytes of cache",
            params.n * 8,
            cache_bytes
        ));
    }

    let mut arrays = StreamArrays::new(params.n);
    for _ in 0..params.reps {
        for k in STREAM_KERNELS {
            for w in 0..workers {
                let part = partition_even(params.n, workers, w);
                arrays.apply(k, params.q, part.range(), &mut |_, _, _| {});
            }
        }
    }
    arrays.check(params.q)?;

    let layout = StreamLayout::allocate(&mut Layout::for_node(&cfg, 0), params.n)?;
    let costs = OpCosts::new(&cfg.timing);
    let mut wl = Workload::new(workers);
    let group = wl.add_group((0..workers).collect());
    for w in 0..workers {
        let part = partition_even(params.n, workers, w);
        let mut prog = Program::new().steps(vec![TraceStep::Barrier(group)]);
        for _ in 0..params.reps {
            for k in STREAM_KERNELS {
                prog = prog
                    .then(loop_phase(part.range(), 512, move |i, out| emit(k, i, w, &layout, &costs, out)))
                    .steps(vec![TraceStep::Barrier(group)]);
            }
        }
        wl.set_program(w, prog);
    }
    let stats = run(&cfg, wl)?;

    let rel = stats.releases_of(group);
    debug_assert_eq!(rel.len(), 1 + 4 * params.reps);
    let mut best_cycles = [u64::MAX; 4];
    for r in 0..params.reps {
        for k in 0..4 {
            let j = r * 4 + k;
            best_cycles[k] = best_cycles[k].min(rel[j + 1] - rel[j]);
        }
    }
    let mut bandwidth = [0.0; 4];
    for (k, kernel) in STREAM_KERNELS.iter().enumerate() {
        let bytes = kernel.counted_bytes_per_elem() * params.n as u64;
        bandwidth[k] = bytes as f64 / best_cycles[k] as f64;
    }
    Ok(StreamResult {
        best_cycles,
        bandwidth,
        stats,
        arrays,
        warnings,
    })
}
