//! 2-D mesh network-on-chip: dimension-order (XY) routing, per-link
//! occupancy and the three router/flow-control combinations.
//!
//! Nodes are numbered row-major: node `k` sits at column `k % mesh_x`,
//! row `k / mesh_x`. Links are full duplex; each direction is tracked
//! separately. Router input buffers are unbounded, so a packet only ever
//! waits for a busy output link (or, with software routing, for the
//! router core).

use crate::config::{FlowControl, RouterKind, SystemConfig, TimingParams};

pub type NodeId = usize;

/// An inter-node message as seen by the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub src: NodeId,
    pub dst: NodeId,
    pub tag: u32,
    pub payload_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshTopology {
    pub mesh_x: u32,
    pub mesh_y: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    East = 0,
    West = 1,
    North = 2,
    South = 3,
}

impl MeshTopology {
    pub fn new(mesh_x: u32, mesh_y: u32) -> Self {
        assert!(mesh_x >= 1 && mesh_y >= 1);
        Self { mesh_x, mesh_y }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self::new(cfg.mesh_x, cfg.mesh_y)
    }

    pub fn nodes(&self) -> usize {
        (self.mesh_x * self.mesh_y) as usize
    }

    /// `(column, row)` of a node.
    pub fn coords(&self, id: NodeId) -> (u32, u32) {
        let x = self.mesh_x as usize;
        ((id % x) as u32, (id / x) as u32)
    }

    pub fn id(&self, col: u32, row: u32) -> NodeId {
        (row * self.mesh_x + col) as usize
    }

    pub fn hop_count(&self, src: NodeId, dst: NodeId) -> u32 {
        let (sx, sy) = self.coords(src);
        let (dx, dy) = self.coords(dst);
        sx.abs_diff(dx) + sy.abs_diff(dy)
    }

    /// The neighbour a packet at `at` moves to next on its way to `dst`,
    /// resolving X before Y.
    pub fn next_hop(&self, at: NodeId, dst: NodeId) -> Option<NodeId> {
        let (x, y) = self.coords(at);
        let (dx, dy) = self.coords(dst);
        let (nx, ny) = if x != dx {
            (if dx > x { x + 1 } else { x - 1 }, y)
        } else if y != dy {
            (x, if dy > y { y + 1 } else { y - 1 })
        } else {
            return None;
        };
        Some(self.id(nx, ny))
    }

    /// Nodes visited after `src`, ending with `dst`; empty when equal.
    pub fn route_xy(&self, src: NodeId, dst: NodeId) -> Vec<NodeId> {
        let mut path = Vec::with_capacity(self.hop_count(src, dst) as usize);
        let mut at = src;
        while let Some(next) = self.next_hop(at, dst) {
            path.push(next);
            at = next;
        }
        path
    }

    fn direction(&self, from: NodeId, to: NodeId) -> Dir {
        let (fx, fy) = self.coords(from);
        let (tx, ty) = self.coords(to);
        match (tx as i64 - fx as i64, ty as i64 - fy as i64) {
            (1, 0) => Dir::East,
            (-1, 0) => Dir::West,
            (0, 1) => Dir::South,
            (0, -1) => Dir::North,
            _ => panic!("nodes {from} and {to} are not adjacent"),
        }
    }

    /// Index of the directed link `from -> to` (4 per node).
    pub fn link_index(&self, from: NodeId, to: NodeId) -> usize {
        from * 4 + self.direction(from, to) as usize
    }

    pub fn link_count(&self) -> usize {
        self.nodes() * 4
    }
}

/// Per-hop forwarding delay of the router for a packet of `flits`.
pub fn router_delay(kind: RouterKind, flits: u64, t: &TimingParams) -> u64 {
    match kind {
        RouterKind::HardwareSwitch => t.hw_router_delay_cycles,
        RouterKind::SoftwareCore => flits * t.sw_router_cycles_per_flit,
    }
}

/// Closed-form latency over `hops` hops with an otherwise idle network.
pub fn packet_latency_uncontended(
    hops: u32,
    payload_bytes: u64,
    fc: FlowControl,
    rk: RouterKind,
    t: &TimingParams,
) -> u64 {
    if hops == 0 {
        return 0;
    }
    let h = hops as u64;
    let s = t.flits(payload_bytes);
    let r = router_delay(rk, s, t);
    match fc {
        FlowControl::StoreAndForward => h * (r + s),
        FlowControl::CutThrough => h * (r + 1) + (s - 1),
    }
}

/// Where a packet goes after being processed at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopResult {
    /// The packet (or, under cut-through, its head) reaches `next` at `at`.
    Forward { next: NodeId, at: u64 },
    /// The last flit is available at the destination at `at`.
    Delivered { at: u64 },
}

/// Link and router occupancy of one mesh, plus traffic counters.
#[derive(Debug, Clone)]
pub struct Network {
    pub topo: MeshTopology,
    flow_control: FlowControl,
    router_kind: RouterKind,
    timing: TimingParams,
    link_busy: Vec<u64>,
    router_busy: Vec<u64>,
    pub flit_hops: u64,
    pub packets_injected: u64,
    pub packets_delivered: u64,
    pub bytes_injected: u64,
    pub bytes_delivered: u64,
}

impl Network {
    pub fn new(cfg: &SystemConfig) -> Self {
        let topo = MeshTopology::from_config(cfg);
        Self {
            topo,
            flow_control: cfg.flow_control,
            router_kind: cfg.router_kind,
            timing: cfg.timing,
            link_busy: vec![0; topo.link_count()],
            router_busy: vec![0; topo.nodes()],
            flit_hops: 0,
            packets_injected: 0,
            packets_delivered: 0,
            bytes_injected: 0,
            bytes_delivered: 0,
        }
    }

    pub fn inject(&mut self, p: &Packet) {
        self.packets_injected += 1;
        self.bytes_injected += p.payload_bytes;
    }

    /// Process packet `p` whose head (cut-through) or entirety
    /// (store-and-forward) is at `node` at cycle `t`. Hops must be
    /// presented in nondecreasing `t` for link arbitration to be FCFS.
    pub fn hop(&mut self, p: &Packet, node: NodeId, t: u64) -> HopResult {
        let flits = self.timing.flits(p.payload_bytes);
        let Some(next) = self.topo.next_hop(node, p.dst) else {
            self.packets_delivered += 1;
            self.bytes_delivered += p.payload_bytes;
            let at = match self.flow_control {
                FlowControl::CutThrough if node != p.src => t + flits - 1,
                _ => t,
            };
            return HopResult::Delivered { at };
        };

        let delay = router_delay(self.router_kind, flits, &self.timing);
        let ready = match self.router_kind {
            RouterKind::HardwareSwitch => t + delay,
            RouterKind::SoftwareCore => {
                // One small core per node handles every packet in turn.
                let start = t.max(self.router_busy[node]);
                self.router_busy[node] = start + delay;
                start + delay
            }
        };
        let link = self.topo.link_index(node, next);
        let start = ready.max(self.link_busy[link]);
        self.link_busy[link] = start + flits;
        self.flit_hops += flits;
        let at = match self.flow_control {
            FlowControl::StoreAndForward => start + flits,
            FlowControl::CutThrough => start + 1,
        };
        HopResult::Forward { next, at }
    }

    /// Move `p` from source to destination immediately, reserving each link
    /// along its route. Returns the delivery cycle. Suitable for packets
    /// issued in time order without interleaving with other hops.
    pub fn transport(&mut self, p: &Packet, at: u64) -> u64 {
        self.inject(p);
        let mut node = p.src;
        let mut t = at;
        loop {
            match self.hop(p, node, t) {
                HopResult::Forward { next, at } => {
                    node = next;
                    t = at;
                }
                HopResult::Delivered { at } => return at,
            }
        }
    }
}
