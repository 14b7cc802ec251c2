//! Direct-summation gravitational N-body in single precision.
//!
//! Body `i` feels `F_i = Σ_{j≠i} G m_i m_j (r_j − r_i) / |r_j − r_i|³`,
//! summed in ascending `j`, and is advanced by semi-implicit Euler:
//! `v += (F/m) Δt`, then `r += v Δt`. A step reads only the previous
//! positions, so every body's update is independent of which core owns it.
//!
//! On a single node the bodies are shared among the cores with a barrier
//! per step. On several nodes node 0 broadcasts positions and masses and
//! scatters velocities; after every step each node sends its updated
//! positions to every other node, and at the end node 0 gathers the
//! velocities.

use std::cell::Cell;
use std::ops::{Add, Div, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Arrangement, SystemConfig};
use crate::engine::{run, Message, Program, SimStats, TraceStep, Workload};
use crate::memsys::AccessKind;
use crate::runtime::{self, partition_even, partitions, Collective, Partition};

use super::{arranged, first_mismatch, loop_phase, rd, wr, BenchError, Layout, OpCosts};

/// Floating-point operations per pair interaction: 8 additions or
/// subtractions, 9 multiplications, 1 division and 1 square root.
pub const FLOPS_PER_PAIR: u64 = 19;

const TAG_BCAST_R: u32 = 1;
const TAG_BCAST_M: u32 = 2;
const TAG_SCATTER_V: u32 = 3;
const TAG_EXCHANGE: u32 = 4;
const TAG_GATHER_V: u32 = 5;

/// Bytes per stored position or velocity.
const VEC3: u64 = 12;

/// Arithmetic the force kernel needs, so it can run on `f32`, on `f64`
/// for a reference, or on an operation-counting wrapper.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn zero() -> Self;
    fn sqrt(self) -> Self;
    fn is_zero(self) -> bool;
}

impl Real for f32 {
    fn zero() -> Self {
        0.0
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
}

thread_local! {
    static OP_COUNTS: Cell<[u64; 4]> = const { Cell::new([0; 4]) };
}

/// `f32` that tallies every arithmetic operation performed on it, as
/// `[add/sub, mul, div, sqrt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counted(pub f32);

impl Counted {
    fn bump(slot: usize) {
        OP_COUNTS.with(|c| {
            let mut v = c.get();
            v[slot] += 1;
            c.set(v);
        });
    }

    /// Take and reset this thread's counters.
    pub fn take_counts() -> [u64; 4] {
        OP_COUNTS.with(|c| c.replace([0; 4]))
    }
}

impl Add for Counted {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::bump(0);
        Counted(self.0 + o.0)
    }
}

impl Sub for Counted {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::bump(0);
        Counted(self.0 - o.0)
    }
}

impl Mul for Counted {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::bump(1);
        Counted(self.0 * o.0)
    }
}

impl Div for Counted {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Self::bump(2);
        Counted(self.0 / o.0)
    }
}

impl Real for Counted {
    fn zero() -> Self {
        Counted(0.0)
    }
    fn sqrt(self) -> Self {
        Self::bump(3);
        Counted(self.0.sqrt())
    }
    fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// Arrays the kernel touches, for access logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Field {
    /// Position read from the current buffer.
    R,
    /// Position written to the next buffer.
    RNext,
    M,
    V,
}

/// Gravitational force on body `i` from every other body.
pub fn force_on<T: Real>(
    i: usize,
    m: &[T],
    r: &[[T; 3]],
    g: T,
    log: &mut impl FnMut(Field, usize, AccessKind),
) -> Result<[T; 3], BenchError> {
    let ri = r[i];
    let mi = m[i];
    let mut f = [T::zero(); 3];
    for j in 0..m.len() {
        if j == i {
            continue;
        }
        log(Field::R, j, AccessKind::Read);
        log(Field::M, j, AccessKind::Read);
        let rj = r[j];
        let dx = rj[0] - ri[0];
        let dy = rj[1] - ri[1];
        let dz = rj[2] - ri[2];
        let d2 = dx * dx + dy * dy + dz * dz;
        if d2.is_zero() {
            return Err(BenchError::Singularity(i, j));
        }
        let d3 = d2 * d2.sqrt();
        let s = g * mi * m[j] / d3;
        f[0] = f[0] + s * dx;
        f[1] = f[1] + s * dy;
        f[2] = f[2] + s * dz;
    }
    Ok(f)
}

/// New `(r_i, v_i)` of body `i` after one step.
pub fn update_body<T: Real>(
    i: usize,
    m: &[T],
    r: &[[T; 3]],
    vi: [T; 3],
    g: T,
    dt: T,
    log: &mut impl FnMut(Field, usize, AccessKind),
) -> Result<([T; 3], [T; 3]), BenchError> {
    log(Field::R, i, AccessKind::Read);
    log(Field::M, i, AccessKind::Read);
    log(Field::V, i, AccessKind::Read);
    let f = force_on(i, m, r, g, log)?;
    let mut v = vi;
    let mut p = r[i];
    for d in 0..3 {
        let a = f[d] / m[i];
        v[d] = v[d] + a * dt;
        p[d] = p[d] + v[d] * dt;
    }
    log(Field::V, i, AccessKind::Write);
    log(Field::RNext, i, AccessKind::Write);
    Ok((p, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbodyParams {
    pub n: usize,
    pub timesteps: usize,
    pub seed: u64,
    pub g: f32,
    pub dt: f32,
}

impl NbodyParams {
    pub fn new(n: usize, timesteps: usize, seed: u64) -> Self {
        Self {
            n,
            timesteps,
            seed,
            g: 1.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bodies {
    pub m: Vec<f32>,
    pub r: Vec<[f32; 3]>,
    pub v: Vec<[f32; 3]>,
}

impl Bodies {
    /// Masses in `[0.5, 1.5)`, positions in the unit cube, small random
    /// velocities.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let r = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let v = (0..n)
            .map(|_| {
                [
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                ]
            })
            .collect();
        Self { m, r, v }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Kinetic plus potential energy, evaluated in double precision.
    pub fn total_energy(&self, g: f64) -> f64 {
        let n = self.len();
        let mut e = 0.0;
        for i in 0..n {
            let v2: f64 = self.v[i].iter().map(|&x| (x as f64).powi(2)).sum();
            e += 0.5 * self.m[i] as f64 * v2;
            for j in i + 1..n {
                let d2: f64 = (0..3)
                    .map(|d| (self.r[i][d] as f64 - self.r[j][d] as f64).powi(2))
                    .sum();
                e -= g * self.m[i] as f64 * self.m[j] as f64 / d2.sqrt();
            }
        }
        e
    }

    /// Bitwise equality of all fields.
    pub fn bit_eq(&self, other: &Bodies) -> Option<String> {
        let flat = |b: &Bodies| -> Vec<u32> {
            b.m.iter()
                .chain(b.r.iter().flatten())
                .chain(b.v.iter().flatten())
                .map(|x| x.to_bits())
                .collect()
        };
        first_mismatch(&flat(self), &flat(other), |a: u32, b: u32| a == b)
    }
}

/// One serial step.
pub fn nbody_step(b: &Bodies, g: f32, dt: f32) -> Result<Bodies, BenchError> {
    let mut next = b.clone();
    for i in 0..b.len() {
        let (r, v) = update_body(i, &b.m, &b.r, b.v[i], g, dt, &mut |_, _, _| {})?;
        next.r[i] = r;
        next.v[i] = v;
    }
    Ok(next)
}

/// `steps` serial steps.
pub fn nbody_serial(b: &Bodies, steps: usize, g: f32, dt: f32) -> Result<Bodies, BenchError> {
    let mut cur = b.clone();
    for _ in 0..steps {
        cur = nbody_step(&cur, g, dt)?;
    }
    Ok(cur)
}

/// The distributed algorithm for `arr`, executed functionally with real
/// per-node copies of the body arrays.
pub fn nbody_parallel(b: &Bodies, steps: usize, arr: Arrangement, g: f32, dt: f32) -> Result<Bodies, BenchError> {
    let nodes = arr.nodes as usize;
    let cpn = arr.cores_per_node as usize;
    let parts = partitions(b.len(), nodes);
    let counts: Vec<usize> = parts.iter().map(|p| p.len).collect();
    let mut r_local = runtime::bcast(&b.r, nodes);
    let m_local = runtime::bcast(&b.m, nodes);
    let mut v_local = runtime::scatter(&b.v, &counts)?;

    for _ in 0..steps {
        let mut updated = Vec::with_capacity(nodes);
        for node in 0..nodes {
            let np = parts[node];
            let mut r_new = vec![[0.0f32; 3]; np.len];
            for core in 0..cpn {
                let cp = partition_even(np.len, cpn, core);
                for li in cp.range() {
                    let (r, v) = update_body(
                        np.start + li,
                        &m_local[node],
                        &r_local[node],
                        v_local[node][li],
                        g,
                        dt,
                        &mut |_, _, _| {},
                    )?;
                    r_new[li] = r;
                    v_local[node][li] = v;
                }
            }
            updated.push(r_new);
        }
        // Every node receives every partition, its own included.
        for r in r_local.iter_mut() {
            for (src, slice) in updated.iter().enumerate() {
                r[parts[src].range()].copy_from_slice(slice);
            }
        }
    }
    Ok(Bodies {
        m: b.m.clone(),
        r: r_local.swap_remove(0),
        v: runtime::gather(&v_local, &counts)?,
    })
}

/// Base addresses of one node's body arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NbodyLayout {
    pub r: [u64; 2],
    pub m: u64,
    pub v: u64,
    /// Global index of the body stored at `v`.
    pub v_first: usize,
}

impl NbodyLayout {
    pub fn allocate(layout: &mut Layout, n: usize, v_len: usize, v_first: usize) -> Result<Self, BenchError> {
        Ok(Self {
            r: [layout.alloc(n as u64 * VEC3)?, layout.alloc(n as u64 * VEC3)?],
            m: layout.alloc(n as u64 * 4)?,
            v: layout.alloc(v_len as u64 * VEC3)?,
            v_first,
        })
    }

    /// Address of element `i` of `field` while reading buffer `cur`.
    pub fn addr(&self, field: Field, i: usize, cur: usize) -> u64 {
        match field {
            Field::R => self.r[cur] + VEC3 * i as u64,
            Field::RNext => self.r[1 - cur] + VEC3 * i as u64,
            Field::M => self.m + 4 * i as u64,
            Field::V => self.v + VEC3 * (i - self.v_first) as u64,
        }
    }
}

fn vec3(out: &mut Vec<TraceStep>, core: usize, base: u64, write: bool) {
    for d in 0..3 {
        let a = base + 4 * d;
        out.push(if write { wr(core, a, 4) } else { rd(core, a, 4) });
    }
}

/// Steps for updating body `i` of `n` from position buffer `cur`.
pub fn emit_body(i: usize, n: usize, cur: usize, core: usize, l: &NbodyLayout, c: &OpCosts, out: &mut Vec<TraceStep>) {
    let pair = TraceStep::Compute(8 * c.add + 9 * c.mul + c.div + c.sqrt);
    vec3(out, core, l.addr(Field::R, i, cur), false);
    out.push(rd(core, l.addr(Field::M, i, cur), 4));
    vec3(out, core, l.addr(Field::V, i, cur), false);
    for j in 0..n {
        if j == i {
            continue;
        }
        vec3(out, core, l.addr(Field::R, j, cur), false);
        out.push(rd(core, l.addr(Field::M, j, cur), 4));
        out.push(pair);
    }
    out.push(TraceStep::Compute(3 * c.div + 6 * c.mul + 6 * c.add));
    vec3(out, core, l.addr(Field::V, i, cur), true);
    vec3(out, core, l.addr(Field::RNext, i, cur), true);
    out.push(TraceStep::Compute(c.int));
}

/// Materialized trace of one step over a partition.
pub fn trace_for(part: Partition, n: usize, cur: usize, layout: &NbodyLayout, costs: &OpCosts, core: usize) -> Vec<TraceStep> {
    let mut out = Vec::new();
    for i in part.range() {
        emit_body(i, n, cur, core, layout, costs, &mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct NbodyResult {
    pub cycles: u64,
    pub bodies: Bodies,
    pub stats: SimStats,
    pub pair_interactions: u64,
}

impl NbodyResult {
    /// Single-precision floating-point operations per cycle.
    pub fn flops_per_cycle(&self) -> f64 {
        (FLOPS_PER_PAIR * self.pair_interactions) as f64 / self.cycles as f64
    }
}

/// Simulate `p.timesteps` steps of random bodies on `arr` cores of `cfg`,
/// verifying the final state against the serial integrator.
pub fn nbody_run(p: &NbodyParams, arr: Arrangement, cfg: &SystemConfig) -> Result<NbodyResult, BenchError> {
    if p.n < 2 {
        return Err(BenchError::InvalidParams("N-body needs at least 2 bodies".into()));
    }
    let initial = Bodies::random(p.n, p.seed);
    let bodies = nbody_parallel(&initial, p.timesteps, arr, p.g, p.dt)?;
    if let Some(msg) = bodies.bit_eq(&nbody_serial(&initial, p.timesteps, p.g, p.dt)?) {
        return Err(BenchError::Verification(format!("N-body {arr}: {msg}")));
    }

    let cfg = arranged(cfg, arr)?;
    let workload = if arr.nodes == 1 {
        smp_workload(p, arr, &cfg)?
    } else {
        noc_workload(p, arr, &cfg)?
    };
    let stats = run(&cfg, workload)?;
    Ok(NbodyResult {
        cycles: stats.total_cycles,
        bodies,
        stats,
        pair_interactions: (p.n * (p.n - 1) * p.timesteps) as u64,
    })
}

fn compute_phase(
    range: std::ops::Range<usize>,
    n: usize,
    cur: usize,
    core: usize,
    layout: NbodyLayout,
    costs: OpCosts,
) -> impl FnMut(&mut Vec<TraceStep>) -> bool + 'static {
    loop_phase(range, 1, move |i, out| emit_body(i, n, cur, core, &layout, &costs, out))
}

fn smp_workload(p: &NbodyParams, arr: Arrangement, cfg: &SystemConfig) -> Result<Workload, BenchError> {
    let cores = arr.cores_per_node as usize;
    let layout = NbodyLayout::allocate(&mut Layout::for_node(cfg, 0), p.n, p.n, 0)?;
    let costs = OpCosts::new(&cfg.timing);
    let mut wl = Workload::new(cores);
    let group = wl.add_group((0..cores).collect());
    for core in 0..cores {
        let part = partition_even(p.n, cores, core);
        let mut prog = Program::new();
        for s in 0..p.timesteps {
            prog = prog
                .then(compute_phase(part.range(), p.n, s % 2, core, layout, costs))
                .steps(vec![TraceStep::Barrier(group)]);
        }
        wl.set_program(core, prog);
    }
    Ok(wl)
}

fn noc_workload(p: &NbodyParams, arr: Arrangement, cfg: &SystemConfig) -> Result<Workload, BenchError> {
    let nodes = arr.nodes as usize;
    let cpn = arr.cores_per_node as usize;
    let n = p.n;
    let costs = OpCosts::new(&cfg.timing);
    let parts = partitions(n, nodes);

    let mut layouts = Vec::with_capacity(nodes);
    for (node, part) in parts.iter().enumerate() {
        // Every node holds all positions and masses; only the root keeps
        // all velocities. Non-root nodes size their velocity slot for the
        // largest partition so all their buffers share addresses.
        let (v_len, v_first) = if node == 0 { (n, 0) } else { (parts[0].len, part.start) };
        layouts.push(NbodyLayout::allocate(&mut Layout::for_node(cfg, node), n, v_len, v_first)?);
    }
    let (root, peer) = (layouts[0], layouts[nodes - 1]);
    let v_bytes: Vec<u64> = parts.iter().map(|q| q.len as u64 * VEC3).collect();

    let mut setup = Collective::new(0, nodes, TAG_BCAST_R).bcast_steps(n as u64 * VEC3, root.r[0], peer.r[0]);
    let bcast_m = Collective::new(0, nodes, TAG_BCAST_M).bcast_steps(n as u64 * 4, root.m, peer.m);
    let scatter_v = Collective::new(0, nodes, TAG_SCATTER_V).scatter_steps(&v_bytes, root.v, peer.v);
    for (node, s) in setup.iter_mut().enumerate() {
        s.extend(bcast_m[node].iter().copied());
        s.extend(scatter_v[node].iter().copied());
    }
    let gather_v = Collective::new(0, nodes, TAG_GATHER_V).gather_steps(&v_bytes, peer.v, root.v);

    let mut wl = Workload::new(nodes * cpn);
    for node in 0..nodes {
        let group = wl.add_group(runtime::node_cores(node, cpn));
        let layout = layouts[node];
        let np = parts[node];
        for local in 0..cpn {
            let core = node * cpn + local;
            let cp = partition_even(np.len, cpn, local);
            let range = np.start + cp.start..np.start + cp.end();
            let mut prog = Program::new();
            if local == 0 {
                prog = prog.steps(setup[node].clone());
            }
            for s in 0..p.timesteps {
                let cur = s % 2;
                prog = prog
                    .steps(vec![TraceStep::Barrier(group)])
                    .then(compute_phase(range.clone(), n, cur, core, layout, costs))
                    .steps(vec![TraceStep::Barrier(group)]);
                if local == 0 {
                    prog = prog.steps(exchange_steps(node, &parts, layout.r[1 - cur]));
                }
            }
            if local == 0 {
                prog = prog.steps(gather_v[node].clone());
            }
            wl.set_program(core, prog);
        }
    }
    Ok(wl)
}

/// Send this node's fresh positions to every other node, then receive
/// every other node's, both in ascending node order.
fn exchange_steps(node: usize, parts: &[Partition], buf: u64) -> Vec<TraceStep> {
    let msg = |peer: usize, part: &Partition| Message {
        peer: peer as u32,
        tag: TAG_EXCHANGE,
        bytes: part.len as u64 * VEC3,
        addr: buf + part.start as u64 * VEC3,
    };
    let mut steps = Vec::new();
    if parts[node].len > 0 {
        for peer in (0..parts.len()).filter(|&k| k != node) {
            steps.push(TraceStep::Send(msg(peer, &parts[node])));
        }
    }
    for (src, part) in parts.iter().enumerate() {
        if src != node && part.len > 0 {
            steps.push(TraceStep::Recv(msg(src, part)));
        }
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    fn two_bodies() -> Bodies {
        Bodies {
            m: vec![1.0, 1.0],
            r: vec![[0.0; 3], [1.0, 0.0, 0.0]],
            v: vec![[0.0; 3]; 2],
        }
    }

    #[test]
    fn unit_pair_forces() {
        let b = two_bodies();
        let f0 = force_on(0, &b.m, &b.r, 1.0, &mut |_, _, _| {}).unwrap();
        let f1 = force_on(1, &b.m, &b.r, 1.0, &mut |_, _, _| {}).unwrap();
        assert_eq!(f0, [1.0, 0.0, 0.0]);
        assert_eq!(f1, [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn pair_interaction_costs_nineteen_flops() {
        let b = two_bodies();
        let m: Vec<Counted> = b.m.iter().map(|&x| Counted(x)).collect();
        let r: Vec<[Counted; 3]> = b.r.iter().map(|p| p.map(Counted)).collect();
        Counted::take_counts();
        force_on(0, &m, &r, Counted(1.0), &mut |_, _, _| {}).unwrap();
        let [add, mul, div, sqrt] = Counted::take_counts();
        assert_eq!((add, mul, div, sqrt), (8, 9, 1, 1));
        assert_eq!(add + mul + div + sqrt, FLOPS_PER_PAIR);
    }

    #[test]
    fn coincident_bodies_are_rejected() {
        let mut b = two_bodies();
        b.r[1] = b.r[0];
        assert!(matches!(nbody_step(&b, 1.0, 0.01), Err(BenchError::Singularity(0, 1))));
    }

    #[test]
    fn zero_steps_is_identity() {
        let b = Bodies::random(10, 4);
        assert!(nbody_serial(&b, 0, 1.0, 0.01).unwrap().bit_eq(&b).is_none());
        let p = nbody_parallel(&b, 0, Arrangement::new(4, 2), 1.0, 0.01).unwrap();
        assert!(p.bit_eq(&b).is_none());
    }

    #[test]
    fn parallel_equals_serial() {
        let b = Bodies::random(37, 8);
        let serial = nbody_serial(&b, 3, 1.0, 0.01).unwrap();
        for (n, c) in [(1, 1), (1, 4), (4, 4), (16, 1), (16, 4)] {
            let got = nbody_parallel(&b, 3, Arrangement::new(n, c), 1.0, 0.01).unwrap();
            assert_eq!(got.bit_eq(&serial), None, "({n},{c})");
        }
    }

    #[test]
    fn trace_matches_functional_accesses() {
        let n = 9;
        let b = Bodies::random(n, 2);
        let l = NbodyLayout { r: [0, 4096], m: 8192, v: 12288, v_first: 2 };
        let part = Partition { start: 3, len: 4 };
        for cur in 0..2 {
            let mut log = Vec::new();
            for i in part.range() {
                update_body(i, &b.m, &b.r, b.v[i], 1.0, 0.01, &mut |f, j, kind| {
                    log.push((l.addr(f, j, cur), kind == AccessKind::Write))
                })
                .unwrap();
            }
            // The functional log counts a position or velocity once; the
            // trace touches its three 4-byte components.
            let mut expanded: Vec<(u64, bool)> = log
                .iter()
                .flat_map(|&(a, w)| {
                    let m_range = l.m..l.m + 4 * n as u64;
                    let comps = if m_range.contains(&a) { 1 } else { 3 };
                    (0..comps).map(move |d| (a + 4 * d, w))
                })
                .collect();
            let costs = OpCosts::new(&Default::default());
            let mut traced: Vec<(u64, bool)> = trace_for(part, n, cur, &l, &costs, 0)
                .into_iter()
                .filter_map(|s| match s {
                    TraceStep::Access(a) => Some((a.addr, a.kind == AccessKind::Write)),
                    _ => None,
                })
                .collect();
            expanded.sort();
            traced.sort();
            assert_eq!(expanded, traced);
        }
    }

    #[test]
    fn small_runs_on_both_paths() {
        let p = NbodyParams::new(48, 2, 5);
        let smp = nbody_run(&p, Arrangement::new(1, 4), &preset("BASE32").unwrap()).unwrap();
        let noc = nbody_run(&p, Arrangement::new(4, 2), &preset("NOC_SW_C").unwrap()).unwrap();
        assert!(smp.bodies.bit_eq(&noc.bodies).is_none());
        // bcast r, m (3 each), scatter v (3), 2 steps × 4×3 exchange, gather v (3).
        assert_eq!(noc.stats.packets_sent, 3 + 3 + 3 + 2 * 12 + 3);
        assert!(smp.flops_per_cycle() > 0.0);
    }
}
