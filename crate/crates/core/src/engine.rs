//! Deterministic discrete-event simulation kernel.
//!
//! Every core executes a stream of [`TraceStep`]s. Steps that touch only
//! core-private state (compute bursts, cache hits) run directly on the
//! core's local clock. Any step that interacts with shared state (a bus
//! transaction, a barrier, the network interface) first waits until the
//! global clock reaches the core's local time, so shared resources see
//! requests in time order.
//!
//! Events are totally ordered by `(time, entity, sequence)`: equal-time
//! events run in ascending entity id (cores first, then buses, then
//! barriers, then packets), and by issue order within one entity.
//!
//! # Network interface
//!
//! A message is moved between a core and the mesh by programmed I/O. For
//! every flit the sending core loads the 8-byte payload word through its
//! cache, then for each of its two halves reads the interface status
//! register and writes the 32-bit data register, and finally spends
//! [`NI_LOOP_INT_OPS`] integer operations on loop control; the packet
//! enters the mesh once its last flit is written. A receiving core waits
//! for the whole packet, then per flit reads status and data registers for
//! both halves, stores the word through its cache and runs the same loop
//! control. Register accesses are uncached bus transactions of
//! [`NI_REG_BYTES`] each.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::config::SystemConfig;
use crate::memsys::{msi_violation, snoop, snoop_read, AccessKind, BusArbiter, CacheState, LineState, MemAccess};
use crate::noc::{HopResult, Network, Packet};

/// Integer operations of loop control per transferred flit.
pub const NI_LOOP_INT_OPS: u64 = 2;

/// Width of the interface's data and status registers.
pub const NI_REG_BYTES: u64 = 4;

/// Core operations per transferred flit.
const NI_PHASES: u8 = 6;

/// A message endpoint description shared by sends and receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    /// Destination node for a send, source node for a receive.
    pub peer: u32,
    pub tag: u32,
    pub bytes: u64,
    /// Node-local buffer the payload is read from or written to.
    pub addr: u64,
}

/// One unit of work charged to a core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStep {
    Compute(u64),
    Access(MemAccess),
    /// Wait for every member of the workload's barrier group.
    Barrier(u32),
    Send(Message),
    Recv(Message),
}

/// Supplies a core's trace lazily, so long runs never materialize whole
/// traces in memory.
pub trait TraceSource {
    /// Append the next batch of steps to `out`. Leaving `out` empty ends
    /// the trace.
    fn fill(&mut self, out: &mut Vec<TraceStep>);
}

impl TraceSource for Vec<TraceStep> {
    fn fill(&mut self, out: &mut Vec<TraceStep>) {
        out.append(self);
    }
}

type Phase = Box<dyn FnMut(&mut Vec<TraceStep>) -> bool>;

/// A trace assembled from sequential phases. Each phase appends a batch of
/// steps per call and returns `true` while it has more to give.
#[derive(Default)]
pub struct Program {
    phases: VecDeque<Phase>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn then(mut self, phase: impl FnMut(&mut Vec<TraceStep>) -> bool + 'static) -> Self {
        self.phases.push_back(Box::new(phase));
        self
    }

    /// Append a fixed list of steps.
    pub fn steps(self, steps: Vec<TraceStep>) -> Self {
        let mut steps = Some(steps);
        self.then(move |out| {
            if let Some(s) = steps.take() {
                out.extend(s);
            }
            false
        })
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

impl TraceSource for Program {
    fn fill(&mut self, out: &mut Vec<TraceStep>) {
        while let Some(phase) = self.phases.front_mut() {
            if !phase(out) {
                self.phases.pop_front();
            }
            if !out.is_empty() {
                return;
            }
        }
    }
}

/// Per-core programs plus the barrier groups they refer to. Core ids are
/// flat: `node * cores_per_node + local_index`.
pub struct Workload {
    pub programs: Vec<Box<dyn TraceSource>>,
    pub barrier_groups: Vec<Vec<usize>>,
}

impl Workload {
    /// A workload of `cores` empty programs.
    pub fn new(cores: usize) -> Self {
        Self {
            programs: (0..cores)
                .map(|_| Box::new(Vec::new()) as Box<dyn TraceSource>)
                .collect(),
            barrier_groups: Vec::new(),
        }
    }

    /// One fixed trace per core.
    pub fn from_traces(traces: Vec<Vec<TraceStep>>) -> Self {
        Self {
            programs: traces
                .into_iter()
                .map(|t| Box::new(t) as Box<dyn TraceSource>)
                .collect(),
            barrier_groups: Vec::new(),
        }
    }

    pub fn set_program(&mut self, core: usize, program: impl TraceSource + 'static) {
        self.programs[core] = Box::new(program);
    }

    /// Register a barrier group and return its id.
    pub fn add_group(&mut self, members: Vec<usize>) -> u32 {
        self.barrier_groups.push(members);
        (self.barrier_groups.len() - 1) as u32
    }
}

/// One barrier release, in the order releases happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierRecord {
    pub group: u32,
    pub generation: u64,
    pub cycle: u64,
}

/// Counters collected over one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    pub total_cycles: u64,
    pub cores_per_node: usize,
    pub line_bytes: u64,
    /// Cycles each core spent executing, i.e. not parked at a barrier or
    /// waiting for a message.
    pub per_core_busy: Vec<u64>,
    pub core_finish: Vec<u64>,
    pub cache_hits: Vec<u64>,
    pub cache_misses: Vec<u64>,
    pub writebacks: Vec<u64>,
    pub barrier_wait_cycles: Vec<u64>,
    pub recv_wait_cycles: Vec<u64>,
    pub bus_busy_cycles: Vec<u64>,
    /// Cache-line traffic (fills and writebacks) per node.
    pub bus_bytes: Vec<u64>,
    /// Network-interface register traffic per node.
    pub mmio_bytes: Vec<u64>,
    pub bus_transactions: Vec<u64>,
    pub invalidations: Vec<u64>,
    pub flit_hops: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub packet_bytes: u64,
    pub barrier_releases: Vec<BarrierRecord>,
}

impl SimStats {
    pub fn total_hits(&self) -> u64 {
        self.cache_hits.iter().sum()
    }

    pub fn total_misses(&self) -> u64 {
        self.cache_misses.iter().sum()
    }

    /// Fraction of cache accesses that hit; 1.0 when nothing was accessed.
    pub fn hit_rate(&self) -> f64 {
        let total = self.total_hits() + self.total_misses();
        if total == 0 {
            1.0
        } else {
            self.total_hits() as f64 / total as f64
        }
    }

    /// Mean bus occupancy over the nodes whose bus carried any traffic.
    pub fn bus_utilization(&self) -> f64 {
        let used: Vec<u64> = self.bus_busy_cycles.iter().copied().filter(|&b| b > 0).collect();
        if used.is_empty() || self.total_cycles == 0 {
            return 0.0;
        }
        used.iter().sum::<u64>() as f64 / (used.len() as f64 * self.total_cycles as f64)
    }

    /// Release cycles of one barrier group, in generation order.
    pub fn releases_of(&self, group: u32) -> Vec<u64> {
        self.barrier_releases
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.cycle)
            .collect()
    }
}

/// Why a core could not finish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockReason {
    Barrier(u32),
    Recv { src: u32, tag: u32 },
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockReason::Barrier(g) => write!(f, "barrier group {g}"),
            BlockReason::Recv { src, tag } => write!(f, "receive from node {src} tag {tag}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("deadlock: {}", fmt_blocked(.blocked))]
    Deadlock { blocked: Vec<(usize, BlockReason)> },
    #[error("workload has {programs} programs but the system has {cores} cores")]
    TooManyPrograms { programs: usize, cores: usize },
    #[error("core {core} accessed {addr:#x}+{bytes}, outside node {node}'s {limit} bytes")]
    AddressOutOfRange { core: usize, node: usize, addr: u64, bytes: u8, limit: u64 },
    #[error("core {core} issued a malformed access of {bytes} bytes at {addr:#x}")]
    MalformedAccess { core: usize, addr: u64, bytes: u8 },
    #[error("core {core} waits on barrier group {group}, which {problem}")]
    BadBarrier { core: usize, group: u32, problem: &'static str },
    #[error("core {core} sends to node {dst}, which does not exist")]
    BadDestination { core: usize, dst: u32 },
    #[error("core {core} sends an empty message")]
    EmptyMessage { core: usize },
    #[error("cores {first} and {second} both wait on the channel from node {src} tag {tag}")]
    ChannelConflict { first: usize, second: usize, src: u32, tag: u32 },
    #[error("node {node}: line {line:#x} is Modified in one cache and valid in another at cycle {cycle}")]
    CoherenceViolation { node: usize, line: u64, cycle: u64 },
}

impl SimError {
    pub fn is_deadlock(&self) -> bool {
        matches!(self, SimError::Deadlock { .. })
    }
}

fn fmt_blocked(blocked: &[(usize, BlockReason)]) -> String {
    blocked
        .iter()
        .map(|(c, r)| format!("core {c} blocked on {r}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    CoreReady(usize),
    BusFree(usize),
    BarrierRelease(u32),
    PacketArrival { pkt: usize, node: usize },
    PacketDelivered(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: u64,
    entity: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.entity, other.seq).cmp(&(self.time, self.entity, self.seq))
    }
}

/// A bus request parked until its grant.
#[derive(Debug, Clone, Copy)]
enum BusOp {
    Access(MemAccess),
    Mmio(u64),
}

/// Progress through a programmed-I/O message transfer.
#[derive(Debug, Clone, Copy)]
struct NiJob {
    send: bool,
    msg: Message,
    flits: u64,
    flit: u64,
    phase: u8,
}

/// The operation a core performs next, from its trace or its NI job.
#[derive(Debug, Clone, Copy)]
enum Op {
    Compute(u64),
    Access(MemAccess),
    Mmio(u64),
    Barrier(u32),
    Send(Message),
    Recv(Message),
    Inject,
    FinishRecv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Running,
    WaitingBus,
    Blocked,
    Done,
}

struct Core {
    time: u64,
    status: Status,
    source: Box<dyn TraceSource>,
    buf: Vec<TraceStep>,
    pos: usize,
    job: Option<NiJob>,
    pending: Option<BusOp>,
    blocked_since: u64,
    blocked_on: Option<BlockReason>,
    hits: u64,
    misses: u64,
    writebacks: u64,
    barrier_wait: u64,
    recv_wait: u64,
}

struct Group {
    members: Vec<usize>,
    member: Vec<bool>,
    arrived: usize,
    latest: u64,
    generation: u64,
}

#[derive(Default)]
struct Channel {
    sent: u64,
    next_recv: u64,
    /// Delivered packets by send sequence number.
    delivered: BTreeMap<u64, u64>,
    waiter: Option<usize>,
}

struct InFlight {
    packet: Packet,
    seq: u64,
}

#[derive(Default)]
struct NodeCounters {
    bus_bytes: u64,
    mmio_bytes: u64,
    invalidations: u64,
}

struct Sim<'a> {
    cfg: &'a SystemConfig,
    cpn: usize,
    line_bytes: u64,
    queue: BinaryHeap<Event>,
    seq: u64,
    now: u64,
    cores: Vec<Core>,
    caches: Vec<CacheState>,
    buses: Vec<BusArbiter>,
    bus_event_pending: Vec<bool>,
    counters: Vec<NodeCounters>,
    groups: Vec<Group>,
    channels: HashMap<(u32, u32, u32), Channel>,
    network: Network,
    packets: Vec<InFlight>,
    releases: Vec<BarrierRecord>,
    last_delivery: u64,
    check_coherence: bool,
    violation: Option<SimError>,
}

/// Simulate `workload` on `cfg` until every core has finished its trace
/// and every packet has been delivered.
pub fn run(cfg: &SystemConfig, workload: Workload) -> Result<SimStats, SimError> {
    Sim::new(cfg, workload)?.execute()
}

/// Like [`run`], but verifies after every bus transaction that no line of
/// the node is Modified in one cache while valid in another.
pub fn run_checking_coherence(cfg: &SystemConfig, workload: Workload) -> Result<SimStats, SimError> {
    let mut sim = Sim::new(cfg, workload)?;
    sim.check_coherence = cfg.coherence_enabled;
    sim.execute()
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SystemConfig, workload: Workload) -> Result<Self, SimError> {
        let n_cores = cfg.total_cores();
        let nodes = cfg.node_count();
        let cpn = cfg.cores_per_node as usize;
        if workload.programs.len() > n_cores {
            return Err(SimError::TooManyPrograms {
                programs: workload.programs.len(),
                cores: n_cores,
            });
        }
        let mut programs = workload.programs.into_iter();
        let cores = (0..n_cores)
            .map(|_| Core {
                time: 0,
                status: Status::Running,
                source: programs
                    .next()
                    .unwrap_or_else(|| Box::new(Vec::<TraceStep>::new())),
                buf: Vec::new(),
                pos: 0,
                job: None,
                pending: None,
                blocked_since: 0,
                blocked_on: None,
                hits: 0,
                misses: 0,
                writebacks: 0,
                barrier_wait: 0,
                recv_wait: 0,
            })
            .collect();
        let groups = workload
            .barrier_groups
            .into_iter()
            .map(|members| {
                let mut member = vec![false; n_cores];
                for &m in &members {
                    if m < n_cores {
                        member[m] = true;
                    }
                }
                Group {
                    members,
                    member,
                    arrived: 0,
                    latest: 0,
                    generation: 0,
                }
            })
            .collect();
        Ok(Self {
            cfg,
            cpn,
            line_bytes: cfg.cache.line_bytes as u64,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            cores,
            caches: (0..n_cores).map(|_| CacheState::new(&cfg.cache)).collect(),
            buses: (0..nodes).map(|n| BusArbiter::new(n, cpn)).collect(),
            bus_event_pending: vec![false; nodes],
            counters: (0..nodes).map(|_| NodeCounters::default()).collect(),
            groups,
            channels: HashMap::new(),
            network: Network::new(cfg),
            packets: Vec::new(),
            releases: Vec::new(),
            last_delivery: 0,
            check_coherence: false,
            violation: None,
        })
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        let n_cores = self.cores.len() as u64;
        let nodes = self.buses.len() as u64;
        let groups = self.groups.len() as u64;
        let entity = match kind {
            EventKind::CoreReady(c) => c as u64,
            EventKind::BusFree(n) => n_cores + n as u64,
            EventKind::BarrierRelease(g) => n_cores + nodes + g as u64,
            EventKind::PacketArrival { pkt, .. } | EventKind::PacketDelivered(pkt) => {
                n_cores + nodes + groups + pkt as u64
            }
        };
        self.seq += 1;
        self.queue.push(Event {
            time,
            entity,
            seq: self.seq,
            kind,
        });
    }

    fn execute(mut self) -> Result<SimStats, SimError> {
        for c in 0..self.cores.len() {
            self.schedule(0, EventKind::CoreReady(c));
        }
        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.time >= self.now, "clock went backwards");
            self.now = ev.time;
            match ev.kind {
                EventKind::CoreReady(c) => self.run_core(c)?,
                EventKind::BusFree(n) => self.bus_free(n),
                EventKind::BarrierRelease(g) => self.release_barrier(g),
                EventKind::PacketArrival { pkt, node } => self.packet_hop(pkt, node),
                EventKind::PacketDelivered(pkt) => self.deliver(pkt),
            }
            if let Some(e) = self.violation.take() {
                return Err(e);
            }
        }
        let blocked: Vec<(usize, BlockReason)> = self
            .cores
            .iter()
            .enumerate()
            .filter(|(_, c)| c.status != Status::Done)
            .map(|(i, c)| {
                let reason = c.blocked_on.clone().unwrap_or(BlockReason::Barrier(u32::MAX));
                (i, reason)
            })
            .collect();
        if !blocked.is_empty() {
            return Err(SimError::Deadlock { blocked });
        }
        Ok(self.into_stats())
    }

    fn into_stats(self) -> SimStats {
        let core_finish: Vec<u64> = self.cores.iter().map(|c| c.time).collect();
        let total_cycles = core_finish
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(self.last_delivery);
        SimStats {
            total_cycles,
            cores_per_node: self.cpn,
            line_bytes: self.line_bytes,
            per_core_busy: self
                .cores
                .iter()
                .map(|c| c.time - c.barrier_wait - c.recv_wait)
                .collect(),
            core_finish,
            cache_hits: self.cores.iter().map(|c| c.hits).collect(),
            cache_misses: self.cores.iter().map(|c| c.misses).collect(),
            writebacks: self.cores.iter().map(|c| c.writebacks).collect(),
            barrier_wait_cycles: self.cores.iter().map(|c| c.barrier_wait).collect(),
            recv_wait_cycles: self.cores.iter().map(|c| c.recv_wait).collect(),
            bus_busy_cycles: self.buses.iter().map(|b| b.busy_cycles).collect(),
            bus_bytes: self.counters.iter().map(|n| n.bus_bytes).collect(),
            mmio_bytes: self.counters.iter().map(|n| n.mmio_bytes).collect(),
            bus_transactions: self.buses.iter().map(|b| b.transactions).collect(),
            invalidations: self.counters.iter().map(|n| n.invalidations).collect(),
            flit_hops: self.network.flit_hops,
            packets_sent: self.network.packets_injected,
            packets_delivered: self.network.packets_delivered,
            packet_bytes: self.network.bytes_injected,
            barrier_releases: self.releases,
        }
    }

    /// Next operation of core `c`, refilling its trace buffer as needed.
    /// `None` once the trace is exhausted.
    fn current_op(&mut self, c: usize) -> Option<Op> {
        let core = &mut self.cores[c];
        if let Some(job) = core.job {
            return Some(job_op(&job, self.line_bytes));
        }
        if core.pos == core.buf.len() {
            core.buf.clear();
            core.pos = 0;
            core.source.fill(&mut core.buf);
            if core.buf.is_empty() {
                return None;
            }
        }
        Some(match core.buf[core.pos] {
            TraceStep::Compute(n) => Op::Compute(n),
            TraceStep::Access(a) => Op::Access(a),
            TraceStep::Barrier(g) => Op::Barrier(g),
            TraceStep::Send(m) => Op::Send(m),
            TraceStep::Recv(m) => Op::Recv(m),
        })
    }

    /// Mark the current operation of core `c` complete.
    fn advance(&mut self, c: usize) {
        let core = &mut self.cores[c];
        match &mut core.job {
            Some(job) => {
                if job.flit < job.flits {
                    job.phase += 1;
                    if job.phase == NI_PHASES {
                        job.phase = 0;
                        job.flit += 1;
                    }
                } else {
                    core.job = None;
                }
            }
            None => core.pos += 1,
        }
    }

    /// Execute core `c` at the current global time until it must wait.
    fn run_core(&mut self, c: usize) -> Result<(), SimError> {
        let now = self.now;
        {
            let core = &mut self.cores[c];
            if core.status == Status::Done {
                return Ok(());
            }
            debug_assert!(core.time >= now);
            core.status = Status::Running;
        }
        let hit = self.cfg.timing.cache_hit_cycles;
        let coherent = self.cfg.coherence_enabled;
        loop {
            // Private work runs ahead on the core's own clock.
            {
                let core = &mut self.cores[c];
                let cache = &mut self.caches[c];
                while core.job.is_none() && core.pos < core.buf.len() {
                    match core.buf[core.pos] {
                        TraceStep::Compute(n) => core.time += n,
                        TraceStep::Access(a) => {
                            if !private_hit(cache, &a, coherent) {
                                break;
                            }
                            core.hits += 1;
                            core.time += hit;
                        }
                        _ => break,
                    }
                    core.pos += 1;
                }
            }

            let Some(op) = self.current_op(c) else {
                self.cores[c].status = Status::Done;
                return Ok(());
            };
            let synced = self.cores[c].time == now;
            match op {
                Op::Compute(n) => {
                    self.cores[c].time += n;
                    self.advance(c);
                }
                Op::Access(a) => {
                    if private_hit(&mut self.caches[c], &a, coherent) {
                        let core = &mut self.cores[c];
                        core.hits += 1;
                        core.time += hit;
                        self.advance(c);
                        continue;
                    }
                    if !synced {
                        return self.defer(c);
                    }
                    self.check_access(c, &a)?;
                    self.request_bus(c, BusOp::Access(a));
                    return Ok(());
                }
                Op::Mmio(bytes) => {
                    if !synced {
                        return self.defer(c);
                    }
                    self.request_bus(c, BusOp::Mmio(bytes));
                    return Ok(());
                }
                Op::Barrier(g) => {
                    if !synced {
                        return self.defer(c);
                    }
                    self.arrive(c, g)?;
                    return Ok(());
                }
                Op::Send(m) => {
                    if m.peer as usize >= self.cfg.node_count() {
                        return Err(SimError::BadDestination { core: c, dst: m.peer });
                    }
                    if m.bytes == 0 {
                        return Err(SimError::EmptyMessage { core: c });
                    }
                    let core = &mut self.cores[c];
                    core.pos += 1;
                    core.job = Some(NiJob {
                        send: true,
                        msg: m,
                        flits: self.cfg.timing.flits(m.bytes),
                        flit: 0,
                        phase: 0,
                    });
                }
                Op::Recv(m) => {
                    if !synced {
                        return self.defer(c);
                    }
                    if !self.try_recv(c, m)? {
                        return Ok(());
                    }
                }
                Op::Inject => {
                    if !synced {
                        return self.defer(c);
                    }
                    self.inject(c);
                    self.advance(c);
                }
                Op::FinishRecv => self.advance(c),
            }
        }
    }

    /// Resume core `c` when the global clock catches up with it.
    fn defer(&mut self, c: usize) -> Result<(), SimError> {
        let t = self.cores[c].time;
        self.schedule(t, EventKind::CoreReady(c));
        Ok(())
    }

    fn check_access(&self, c: usize, a: &MemAccess) -> Result<(), SimError> {
        if !a.is_well_formed(self.line_bytes) {
            return Err(SimError::MalformedAccess {
                core: c,
                addr: a.addr,
                bytes: a.bytes,
            });
        }
        let node = c / self.cpn;
        let limit = self.cfg.node_mem_bytes.get(node).copied().unwrap_or(0);
        if a.addr + a.bytes as u64 > limit {
            return Err(SimError::AddressOutOfRange {
                core: c,
                node,
                addr: a.addr,
                bytes: a.bytes,
                limit,
            });
        }
        Ok(())
    }

    fn request_bus(&mut self, c: usize, op: BusOp) {
        let node = c / self.cpn;
        let local = c % self.cpn;
        self.cores[c].pending = Some(op);
        if self.buses[node].idle_at(self.now) {
            self.grant(c, self.now);
        } else {
            self.cores[c].status = Status::WaitingBus;
            self.buses[node].enqueue(local);
            if !self.bus_event_pending[node] {
                self.bus_event_pending[node] = true;
                let t = self.buses[node].busy_until;
                self.schedule(t, EventKind::BusFree(node));
            }
        }
    }

    fn bus_free(&mut self, node: usize) {
        self.bus_event_pending[node] = false;
        if let Some(local) = self.buses[node].pick_next() {
            self.grant(node * self.cpn + local, self.now);
        }
        if self.buses[node].has_waiting() {
            self.bus_event_pending[node] = true;
            let t = self.buses[node].busy_until;
            self.schedule(t, EventKind::BusFree(node));
        }
    }

    /// Perform core `c`'s parked bus operation starting at `start`.
    fn grant(&mut self, c: usize, start: u64) {
        let node = c / self.cpn;
        let local = c % self.cpn;
        let op = self.cores[c].pending.take().expect("granted core has a request");
        let timing = self.cfg.timing;
        let (service, tail) = match op {
            BusOp::Mmio(bytes) => {
                self.counters[node].mmio_bytes += bytes;
                (timing.bus_service_cycles(bytes), 0)
            }
            BusOp::Access(a) => (self.resolve_miss(c, &a), timing.cache_hit_cycles),
        };
        if self.check_coherence && self.violation.is_none() {
            let base = node * self.cpn;
            if let Some(line) = msi_violation(&self.caches[base..base + self.cpn]) {
                self.violation = Some(SimError::CoherenceViolation { node, line, cycle: start });
            }
        }
        let end = self.buses[node].grant(local, start, service);
        let core = &mut self.cores[c];
        core.time = end + tail;
        core.status = Status::Running;
        self.advance(c);
        let t = self.cores[c].time;
        self.schedule(t, EventKind::CoreReady(c));
    }

    /// Apply the cache and coherence effects of a missing (or upgrading)
    /// access and return the bus occupancy it costs.
    fn resolve_miss(&mut self, c: usize, a: &MemAccess) -> u64 {
        let node = c / self.cpn;
        let local = c % self.cpn;
        let base = node * self.cpn;
        let coherent = self.cfg.coherence_enabled;
        let line_cost = self.cfg.timing.bus_service_cycles(self.line_bytes);
        let caches = &mut self.caches[base..base + self.cpn];
        let line = caches[local].line_of(a.addr);
        let state = caches[local].state(line);
        let mut service = 0;
        let mut writebacks = Vec::new();

        match (a.kind, state) {
            (AccessKind::Write, LineState::Shared) => {
                // Upgrade: the data is already here, only ownership moves.
                let res = snoop(caches, local, line, coherent);
                self.counters[node].invalidations += res.invalidated.len() as u64;
                service += (res.invalidated.len() as u64).max(1);
                for &o in &res.written_back {
                    service += line_cost;
                    writebacks.push(o);
                }
                caches[local].touch_line(line);
                caches[local].set_state(line, LineState::Modified);
                self.cores[c].hits += 1;
            }
            (_, LineState::Invalid) => {
                self.cores[c].misses += 1;
                service += line_cost;
                self.counters[node].bus_bytes += self.line_bytes;
                let new_state = match a.kind {
                    AccessKind::Read => {
                        if let Some(o) = snoop_read(caches, local, line, coherent) {
                            service += line_cost;
                            writebacks.push(o);
                        }
                        LineState::Shared
                    }
                    AccessKind::Write => {
                        let res = snoop(caches, local, line, coherent);
                        let shared = res.invalidated.len() - res.written_back.len();
                        service += shared as u64;
                        self.counters[node].invalidations += res.invalidated.len() as u64;
                        for &o in &res.written_back {
                            service += line_cost;
                            writebacks.push(o);
                        }
                        LineState::Modified
                    }
                };
                if let Some(ev) = caches[local].install(line, new_state) {
                    if ev.dirty {
                        service += line_cost;
                        writebacks.push(local);
                    }
                }
            }
            _ => {
                // Became a hit while queued; cannot happen under MSI, but
                // keep the bus grant well-formed.
                caches[local].touch_line(line);
                self.cores[c].hits += 1;
                service = 1;
            }
        }
        for o in writebacks {
            self.cores[base + o].writebacks += 1;
            self.counters[node].bus_bytes += self.line_bytes;
        }
        service
    }

    fn arrive(&mut self, c: usize, g: u32) -> Result<(), SimError> {
        let now = self.now;
        let Some(group) = self.groups.get_mut(g as usize) else {
            return Err(SimError::BadBarrier {
                core: c,
                group: g,
                problem: "does not exist",
            });
        };
        if !group.member[c] {
            return Err(SimError::BadBarrier {
                core: c,
                group: g,
                problem: "does not include it",
            });
        }
        group.arrived += 1;
        group.latest = group.latest.max(now);
        let complete = group.arrived == group.members.len();
        let core = &mut self.cores[c];
        core.status = Status::Blocked;
        core.blocked_since = now;
        core.blocked_on = Some(BlockReason::Barrier(g));
        if complete {
            let t = &self.cfg.timing;
            let release = group.latest
                + t.barrier_base_cycles
                + t.barrier_per_core_cycles * group.members.len() as u64;
            self.schedule(release, EventKind::BarrierRelease(g));
        }
        Ok(())
    }

    fn release_barrier(&mut self, g: u32) {
        let now = self.now;
        let group = &mut self.groups[g as usize];
        self.releases.push(BarrierRecord {
            group: g,
            generation: group.generation,
            cycle: now,
        });
        group.arrived = 0;
        group.latest = 0;
        group.generation += 1;
        let members = group.members.clone();
        for m in members {
            let core = &mut self.cores[m];
            core.barrier_wait += now - core.blocked_since;
            core.time = now;
            core.blocked_on = None;
            core.status = Status::Running;
            core.pos += 1;
            self.schedule(now, EventKind::CoreReady(m));
        }
    }

    /// Start receiving `m` if its packet has arrived; otherwise park the
    /// core on the channel. Returns whether the core may continue.
    fn try_recv(&mut self, c: usize, m: Message) -> Result<bool, SimError> {
        let node = (c / self.cpn) as u32;
        let ch = self.channels.entry((m.peer, node, m.tag)).or_default();
        if ch.delivered.first_key_value().map(|(&s, _)| s) == Some(ch.next_recv) {
            ch.delivered.pop_first();
            ch.next_recv += 1;
            if ch.waiter == Some(c) {
                ch.waiter = None;
            }
            let core = &mut self.cores[c];
            core.pos += 1;
            core.job = Some(NiJob {
                send: false,
                msg: m,
                flits: self.cfg.timing.flits(m.bytes),
                flit: 0,
                phase: 0,
            });
            return Ok(true);
        }
        match ch.waiter {
            Some(other) if other != c => {
                return Err(SimError::ChannelConflict {
                    first: other,
                    second: c,
                    src: m.peer,
                    tag: m.tag,
                })
            }
            _ => ch.waiter = Some(c),
        }
        let core = &mut self.cores[c];
        core.status = Status::Blocked;
        core.blocked_since = self.now;
        core.blocked_on = Some(BlockReason::Recv {
            src: m.peer,
            tag: m.tag,
        });
        Ok(false)
    }

    fn inject(&mut self, c: usize) {
        let job = self.cores[c].job.expect("inject belongs to a send");
        let src = c / self.cpn;
        let dst = job.msg.peer as usize;
        let ch = self
            .channels
            .entry((src as u32, dst as u32, job.msg.tag))
            .or_default();
        let seq = ch.sent;
        ch.sent += 1;
        let packet = Packet {
            src,
            dst,
            tag: job.msg.tag,
            payload_bytes: job.msg.bytes,
        };
        self.network.inject(&packet);
        let id = self.packets.len();
        self.packets.push(InFlight { packet, seq });
        self.schedule(self.now, EventKind::PacketArrival { pkt: id, node: src });
    }

    fn packet_hop(&mut self, pkt: usize, node: usize) {
        let packet = self.packets[pkt].packet;
        match self.network.hop(&packet, node, self.now) {
            HopResult::Forward { next, at } => {
                self.schedule(at, EventKind::PacketArrival { pkt, node: next })
            }
            HopResult::Delivered { at } if at == self.now => self.deliver(pkt),
            HopResult::Delivered { at } => self.schedule(at, EventKind::PacketDelivered(pkt)),
        }
    }

    fn deliver(&mut self, pkt: usize) {
        let now = self.now;
        self.last_delivery = self.last_delivery.max(now);
        let InFlight { packet, seq } = self.packets[pkt];
        let ch = self
            .channels
            .entry((packet.src as u32, packet.dst as u32, packet.tag))
            .or_default();
        ch.delivered.insert(seq, now);
        if seq == ch.next_recv {
            if let Some(w) = ch.waiter.take() {
                let core = &mut self.cores[w];
                core.recv_wait += now - core.blocked_since;
                core.time = now;
                core.blocked_on = None;
                core.status = Status::Running;
                self.schedule(now, EventKind::CoreReady(w));
            }
        }
    }
}

/// Cache probe on the core's private path. Returns `true` (and updates LRU
/// and state) when the access completes without the bus.
#[inline]
fn private_hit(cache: &mut CacheState, a: &MemAccess, coherent: bool) -> bool {
    let line = cache.line_of(a.addr);
    match (cache.touch_line(line), a.kind) {
        (None, _) => false,
        (Some(_), AccessKind::Read) | (Some(LineState::Modified), AccessKind::Write) => true,
        (Some(_), AccessKind::Write) if !coherent => {
            cache.set_state(line, LineState::Modified);
            true
        }
        (Some(_), AccessKind::Write) => false,
    }
}

fn job_op(job: &NiJob, line_bytes: u64) -> Op {
    // Register transfers move aligned 8-byte words.
    let word = (job.msg.addr + job.flit * 8) & !7;
    let word_access = |kind| {
        debug_assert!(line_bytes >= 8);
        Op::Access(MemAccess {
            core_id: 0,
            kind,
            addr: word,
            bytes: 8,
        })
    };
    if job.flit == job.flits {
        return if job.send { Op::Inject } else { Op::FinishRecv };
    }
    match (job.send, job.phase) {
        (true, 0) => word_access(AccessKind::Read),
        (true, 1..=4) | (false, 0..=3) => Op::Mmio(NI_REG_BYTES),
        (false, 4) => word_access(AccessKind::Write),
        _ => Op::Compute(NI_LOOP_INT_OPS),
    }
}
