//! Naive dense matrix multiplication `C = A × B` in double precision.
//!
//! `A` is `N×K` row-major, `B` is `K×M` column-major (so both operands of
//! a dot product are read with unit stride) and `C` is `N×M` row-major.
//! Every element is a dot product accumulated from `0.0` in ascending `k`,
//! which makes the result independent of how rows are distributed.
//!
//! On a single node the rows are shared among the cores. On several nodes
//! node 0 scatters the rows of `A`, broadcasts `B`, every node shares its
//! rows among its cores, and node 0 gathers the rows of `C`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Arrangement, SystemConfig};
use crate::engine::{run, Program, SimStats, TraceStep, Workload};
use crate::memsys::AccessKind;
use crate::runtime::{self, partition_even, partitions, Collective};

use super::{arranged, first_mismatch, loop_phase, rd, wr, BenchError, Layout, OpCosts};

const TAG_SCATTER_A: u32 = 1;
const TAG_BCAST_B: u32 = 2;
const TAG_GATHER_C: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatmulParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
}

impl MatmulParams {
    pub fn square(size: usize, seed: u64) -> Self {
        Self {
            n: size,
            k: size,
            m: size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrices {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// `N×K`, row-major.
    pub a: Vec<f64>,
    /// `K×M`, column-major: element `(kk, j)` at `j * K + kk`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    A,
    B,
    C,
}

impl Matrices {
    /// Entries uniform in `[-1, 1)`.
    pub fn random(p: &MatmulParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut fill = |len: usize| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let a = fill(p.n * p.k);
        let b = fill(p.k * p.m);
        Self {
            n: p.n,
            k: p.k,
            m: p.m,
            a,
            b,
        }
    }

    /// Compute rows `rows` of a block of `C` from the matching block of
    /// `A`; both blocks are indexed by row within the block.
    pub fn compute_rows(
        a: &[f64],
        b: &[f64],
        k: usize,
        m: usize,
        rows: std::ops::Range<usize>,
        c: &mut [f64],
        log: &mut impl FnMut(Operand, usize, AccessKind),
    ) {
        for i in rows {
            for j in 0..m {
                let mut acc = 0.0;
                for kk in 0..k {
                    log(Operand::A, i * k + kk, AccessKind::Read);
                    log(Operand::B, j * k + kk, AccessKind::Read);
                    acc += a[i * k + kk] * b[j * k + kk];
                }
                log(Operand::C, i * m + j, AccessKind::Write);
                c[i * m + j] = acc;
            }
        }
    }

    /// Serial triple loop.
    pub fn multiply_serial(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n * self.m];
        Self::compute_rows(&self.a, &self.b, self.k, self.m, 0..self.n, &mut c, &mut |_, _, _| {});
        c
    }

    /// The distributed algorithm for `arr`, executed functionally with
    /// real per-node buffers.
    pub fn multiply_parallel(&self, arr: Arrangement) -> Result<Vec<f64>, BenchError> {
        let nodes = arr.nodes as usize;
        let cpn = arr.cores_per_node as usize;
        let row_counts: Vec<usize> = partitions(self.n, nodes).iter().map(|p| p.len).collect();
        let a_counts: Vec<usize> = row_counts.iter().map(|r| r * self.k).collect();
        let c_counts: Vec<usize> = row_counts.iter().map(|r| r * self.m).collect();
        let a_local = runtime::scatter(&self.a, &a_counts)?;
        let b_local = runtime::bcast(&self.b, nodes);
        let mut c_local = Vec::with_capacity(nodes);
        for node in 0..nodes {
            let rows = row_counts[node];
            let mut c = vec![0.0; rows * self.m];
            for core in 0..cpn {
                let part = partition_even(rows, cpn, core);
                Self::compute_rows(
                    &a_local[node],
                    &b_local[node],
                    self.k,
                    self.m,
                    part.range(),
                    &mut c,
                    &mut |_, _, _| {},
                );
            }
            c_local.push(c);
        }
        Ok(runtime::gather(&c_local, &c_counts)?)
    }
}

/// Base addresses of one node's matrix buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatmulLayout {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub k: usize,
    pub m: usize,
}

impl MatmulLayout {
    pub fn allocate(layout: &mut Layout, rows: usize, k: usize, m: usize) -> Result<Self, BenchError> {
        Ok(Self {
            a: layout.alloc((rows * k * 8) as u64)?,
            b: layout.alloc((k * m * 8) as u64)?,
            c: layout.alloc((rows * m * 8) as u64)?,
            k,
            m,
        })
    }

    pub fn addr(&self, op: Operand, index: usize) -> u64 {
        let base = match op {
            Operand::A => self.a,
            Operand::B => self.b,
            Operand::C => self.c,
        };
        base + 8 * index as u64
    }
}

/// Steps for row `i` (node-local index) of `C`.
pub fn emit_row(i: usize, core: usize, l: &MatmulLayout, c: &OpCosts, out: &mut Vec<TraceStep>) {
    let (k, m) = (l.k, l.m);
    let dot = TraceStep::Compute(c.mul + c.add);
    for j in 0..m {
        for kk in 0..k {
            out.push(rd(core, l.a + 8 * (i * k + kk) as u64, 8));
            out.push(rd(core, l.b + 8 * (j * k + kk) as u64, 8));
            out.push(dot);
        }
        out.push(wr(core, l.c + 8 * (i * m + j) as u64, 8));
        out.push(TraceStep::Compute(c.int));
    }
}

/// Materialized trace of a row partition.
pub fn trace_for(part: runtime::Partition, layout: &MatmulLayout, costs: &OpCosts, core: usize) -> Vec<TraceStep> {
    let mut out = Vec::new();
    for i in part.range() {
        emit_row(i, core, layout, costs, &mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct MatmulResult {
    pub cycles: u64,
    pub c: Vec<f64>,
    pub stats: SimStats,
}

/// Multiply random matrices on `arr` cores of `cfg`, verify against the
/// serial loop and return the simulated cycle count.
pub fn matmul_run(p: &MatmulParams, arr: Arrangement, cfg: &SystemConfig) -> Result<MatmulResult, BenchError> {
    if p.n == 0 || p.k == 0 || p.m == 0 {
        return Err(BenchError::InvalidParams("matrix dimensions must be at least 1".into()));
    }
    let mats = Matrices::random(p);
    let c = mats.multiply_parallel(arr)?;
    if let Some(msg) = first_mismatch(&c, &mats.multiply_serial(), |x: f64, y: f64| x.to_bits() == y.to_bits()) {
        return Err(BenchError::Verification(format!("matmul {arr}: {msg}")));
    }

    let cfg = arranged(cfg, arr)?;
    let workload = if arr.nodes == 1 {
        smp_workload(p, arr, &cfg)?
    } else {
        noc_workload(p, arr, &cfg)?
    };
    let stats = run(&cfg, workload)?;
    Ok(MatmulResult {
        cycles: stats.total_cycles,
        c,
        stats,
    })
}

fn smp_workload(p: &MatmulParams, arr: Arrangement, cfg: &SystemConfig) -> Result<Workload, BenchError> {
    let cores = arr.cores_per_node as usize;
    let layout = MatmulLayout::allocate(&mut Layout::for_node(cfg, 0), p.n, p.k, p.m)?;
    let costs = OpCosts::new(&cfg.timing);
    let mut wl = Workload::new(cores);
    let group = wl.add_group((0..cores).collect());
    for core in 0..cores {
        let part = partition_even(p.n, cores, core);
        let prog = Program::new()
            .then(loop_phase(part.range(), 1, move |i, out| emit_row(i, core, &layout, &costs, out)))
            .steps(vec![TraceStep::Barrier(group)]);
        wl.set_program(core, prog);
    }
    Ok(wl)
}

fn noc_workload(p: &MatmulParams, arr: Arrangement, cfg: &SystemConfig) -> Result<Workload, BenchError> {
    let nodes = arr.nodes as usize;
    let cpn = arr.cores_per_node as usize;
    let costs = OpCosts::new(&cfg.timing);
    let node_rows = partitions(p.n, nodes);

    let mut layouts = Vec::with_capacity(nodes);
    for node in 0..nodes {
        // The root keeps full A and C for the scatter source and gather
        // target. Other nodes reserve room for the largest slice (node 1's)
        // so their buffers share addresses.
        let rows = if node == 0 { p.n } else { node_rows[1].len };
        layouts.push(MatmulLayout::allocate(&mut Layout::for_node(cfg, node), rows, p.k, p.m)?);
    }
    let a_bytes: Vec<u64> = node_rows.iter().map(|r| (r.len * p.k * 8) as u64).collect();
    let c_bytes: Vec<u64> = node_rows.iter().map(|r| (r.len * p.m * 8) as u64).collect();
    let b_bytes = (p.k * p.m * 8) as u64;
    let scatter = Collective::new(0, nodes, TAG_SCATTER_A).scatter_steps(&a_bytes, layouts[0].a, layouts[1].a);
    let bcast = Collective::new(0, nodes, TAG_BCAST_B).bcast_steps(b_bytes, layouts[0].b, layouts[1].b);
    let gather = Collective::new(0, nodes, TAG_GATHER_C).gather_steps(&c_bytes, layouts[1].c, layouts[0].c);

    let mut wl = Workload::new(nodes * cpn);
    for node in 0..nodes {
        let group = wl.add_group(runtime::node_cores(node, cpn));
        let layout = layouts[node];
        for local in 0..cpn {
            let core = node * cpn + local;
            let part = partition_even(node_rows[node].len, cpn, local);
            let mut prog = Program::new();
            if local == 0 {
                let mut comm = scatter[node].clone();
                comm.extend(bcast[node].iter().copied());
                prog = prog.steps(comm);
            }
            prog = prog
                .steps(vec![TraceStep::Barrier(group)])
                .then(loop_phase(part.range(), 1, move |i, out| emit_row(i, core, &layout, &costs, out)))
                .steps(vec![TraceStep::Barrier(group)]);
            if local == 0 {
                prog = prog.steps(gather[node].clone());
            }
            wl.set_program(core, prog);
        }
    }
    Ok(wl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    #[test]
    fn identity_times_b_is_b() {
        let n = 16;
        let mut mats = Matrices::random(&MatmulParams::square(n, 3));
        mats.a = (0..n * n).map(|x| if x / n == x % n { 1.0 } else { 0.0 }).collect();
        let c = mats.multiply_serial();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(c[i * n + j].to_bits(), mats.b[j * n + i].to_bits());
            }
        }
    }

    #[test]
    fn parallel_equals_serial() {
        let p = MatmulParams { n: 37, k: 11, m: 5, seed: 9 };
        let mats = Matrices::random(&p);
        let serial = mats.multiply_serial();
        for arr in [(1, 1), (1, 4), (4, 4), (16, 1), (16, 4)] {
            let got = mats.multiply_parallel(Arrangement::new(arr.0, arr.1)).unwrap();
            assert_eq!(got, serial);
        }
    }

    #[test]
    fn inner_step_shape() {
        let l = MatmulLayout { a: 0, b: 1 << 16, c: 1 << 17, k: 4, m: 2 };
        let costs = OpCosts::new(&Default::default());
        let t = trace_for(runtime::Partition { start: 0, len: 1 }, &l, &costs, 0);
        assert_eq!(&t[..3], &[rd(0, 0, 8), rd(0, 1 << 16, 8), TraceStep::Compute(8)]);
        assert_eq!(t.len(), 2 * (4 * 3 + 2));
    }

    #[test]
    fn trace_matches_functional_accesses() {
        let p = MatmulParams { n: 6, k: 5, m: 3, seed: 1 };
        let mats = Matrices::random(&p);
        let l = MatmulLayout { a: 0, b: 4096, c: 8192, k: p.k, m: p.m };
        let mut log = Vec::new();
        let mut c = vec![0.0; p.n * p.m];
        Matrices::compute_rows(&mats.a, &mats.b, p.k, p.m, 2..5, &mut c, &mut |op, i, kind| {
            log.push((l.addr(op, i), kind == AccessKind::Write))
        });
        let mut traced: Vec<_> = trace_for(runtime::Partition { start: 2, len: 3 }, &l, &OpCosts::new(&Default::default()), 0)
            .into_iter()
            .filter_map(|s| match s {
                TraceStep::Access(a) => Some((a.addr, a.kind == AccessKind::Write)),
                _ => None,
            })
            .collect();
        log.sort();
        traced.sort();
        assert_eq!(log, traced);
    }

    #[test]
    fn small_runs_on_both_paths() {
        let p = MatmulParams { n: 32, k: 16, m: 8, seed: 2 };
        let smp = matmul_run(&p, Arrangement::new(1, 4), &preset("BASE32").unwrap()).unwrap();
        let noc = matmul_run(&p, Arrangement::new(4, 2), &preset("NOC_SW_C").unwrap()).unwrap();
        assert_eq!(smp.c, noc.c);
        assert_eq!(smp.stats.packets_sent, 0);
        // 3 scatter + 3 bcast + 3 gather packets.
        assert_eq!(noc.stats.packets_sent, 9);
    }
}
