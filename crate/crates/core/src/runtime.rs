//! Parallel-programming substrate for the benchmarks: even worksharing,
//! barrier groups, and the linear scatter/broadcast/gather collectives
//! rooted at one node.
//!
//! Collectives come in two halves. The functional half moves real data
//! between per-node buffers; the trace half emits the matching
//! [`TraceStep::Send`]/[`TraceStep::Recv`] steps for the communicating
//! core of each node. Both halves visit peers in ascending node order.

use thiserror::Error;

use crate::engine::{Message, TraceStep};

/// A contiguous slice of an iteration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Partition {
    pub start: usize,
    pub len: usize,
}

impl Partition {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

/// Share `n_items` among `n_workers`: the first `n_items % n_workers`
/// workers take one extra item.
pub fn partition_even(n_items: usize, n_workers: usize, worker: usize) -> Partition {
    assert!(n_workers >= 1 && worker < n_workers, "worker {worker} of {n_workers}");
    let base = n_items / n_workers;
    let rem = n_items % n_workers;
    let len = base + usize::from(worker < rem);
    let start = worker * base + worker.min(rem);
    Partition { start, len }
}

/// All partitions of `n_items` over `n_workers`, in worker order.
pub fn partitions(n_items: usize, n_workers: usize) -> Vec<Partition> {
    (0..n_workers)
        .map(|w| partition_even(n_items, n_workers, w))
        .collect()
}

/// Flat core ids of one node's processing cores.
pub fn node_cores(node: usize, cores_per_node: usize) -> Vec<usize> {
    (node * cores_per_node..(node + 1) * cores_per_node).collect()
}

/// Flat core ids of every core on the first `nodes` nodes.
pub fn all_cores(nodes: usize, cores_per_node: usize) -> Vec<usize> {
    (0..nodes * cores_per_node).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollectiveError {
    #[error("slice counts sum to {sum} but the buffer holds {total}")]
    CountMismatch { sum: usize, total: usize },
    #[error("{nodes} node counts given for a {expected}-node collective")]
    WrongNodeCount { nodes: usize, expected: usize },
    #[error("node {node} needs {needed} bytes at offset {offset} but has {capacity}")]
    Overflow { node: usize, offset: u64, needed: u64, capacity: u64 },
    #[error("no slice from node {node}")]
    MissingSlice { node: usize },
}

/// Check that `bytes` at `addr` fit a node memory of `capacity` bytes.
pub fn check_fit(node: usize, addr: u64, bytes: u64, capacity: u64) -> Result<(), CollectiveError> {
    if addr + bytes > capacity {
        return Err(CollectiveError::Overflow {
            node,
            offset: addr,
            needed: bytes,
            capacity,
        });
    }
    Ok(())
}

fn check_counts(counts: &[usize], total: usize) -> Result<(), CollectiveError> {
    let sum: usize = counts.iter().sum();
    if sum != total {
        return Err(CollectiveError::CountMismatch { sum, total });
    }
    Ok(())
}

/// Split the root buffer into consecutive slices of `counts[node]`
/// elements; slice `k` is what node `k` holds afterwards.
pub fn scatter<T: Clone>(root_buf: &[T], counts: &[usize]) -> Result<Vec<Vec<T>>, CollectiveError> {
    check_counts(counts, root_buf.len())?;
    let mut out = Vec::with_capacity(counts.len());
    let mut at = 0;
    for &n in counts {
        out.push(root_buf[at..at + n].to_vec());
        at += n;
    }
    Ok(out)
}

/// Every node ends with a copy of `buf`.
pub fn bcast<T: Clone>(buf: &[T], nodes: usize) -> Vec<Vec<T>> {
    vec![buf.to_vec(); nodes]
}

/// Concatenate node slices in node order at the root.
pub fn gather<T: Clone>(slices: &[Vec<T>], counts: &[usize]) -> Result<Vec<T>, CollectiveError> {
    if slices.len() < counts.len() {
        return Err(CollectiveError::MissingSlice { node: slices.len() });
    }
    let mut out = Vec::with_capacity(counts.iter().sum());
    for (node, (&n, s)) in counts.iter().zip(slices).enumerate() {
        if s.len() != n {
            return Err(CollectiveError::MissingSlice { node });
        }
        out.extend_from_slice(s);
    }
    Ok(out)
}

/// Trace-side description of one collective over nodes `0..nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collective {
    pub root: usize,
    pub nodes: usize,
    pub tag: u32,
}

impl Collective {
    pub fn new(root: usize, nodes: usize, tag: u32) -> Self {
        assert!(root < nodes, "root {root} outside {nodes} nodes");
        Self { root, nodes, tag }
    }

    fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes).filter(move |&n| n != self.root)
    }

    /// Scatter `bytes[k]` bytes to each node `k`. The root reads slice `k`
    /// from `root_addr + offset(k)`; node `k` writes it at `dst_addr`.
    /// Returns one step list per node.
    pub fn scatter_steps(&self, bytes: &[u64], root_addr: u64, dst_addr: u64) -> Vec<Vec<TraceStep>> {
        assert_eq!(bytes.len(), self.nodes);
        let mut steps = vec![Vec::new(); self.nodes];
        let offsets = prefix(bytes);
        for k in self.peers() {
            if bytes[k] == 0 {
                continue;
            }
            steps[self.root].push(TraceStep::Send(Message {
                peer: k as u32,
                tag: self.tag,
                bytes: bytes[k],
                addr: root_addr + offsets[k],
            }));
            steps[k].push(TraceStep::Recv(Message {
                peer: self.root as u32,
                tag: self.tag,
                bytes: bytes[k],
                addr: dst_addr,
            }));
        }
        steps
    }

    /// Send the `bytes`-long buffer at `root_addr` to every other node,
    /// landing at `dst_addr`.
    pub fn bcast_steps(&self, bytes: u64, root_addr: u64, dst_addr: u64) -> Vec<Vec<TraceStep>> {
        let mut steps = vec![Vec::new(); self.nodes];
        if bytes == 0 {
            return steps;
        }
        for k in self.peers() {
            steps[self.root].push(TraceStep::Send(Message {
                peer: k as u32,
                tag: self.tag,
                bytes,
                addr: root_addr,
            }));
            steps[k].push(TraceStep::Recv(Message {
                peer: self.root as u32,
                tag: self.tag,
                bytes,
                addr: dst_addr,
            }));
        }
        steps
    }

    /// Mirror of [`Collective::scatter_steps`]: node `k` sends `bytes[k]`
    /// from `src_addr`; the root stores it at `root_addr + offset(k)`.
    pub fn gather_steps(&self, bytes: &[u64], src_addr: u64, root_addr: u64) -> Vec<Vec<TraceStep>> {
        assert_eq!(bytes.len(), self.nodes);
        let mut steps = vec![Vec::new(); self.nodes];
        let offsets = prefix(bytes);
        for k in self.peers() {
            if bytes[k] == 0 {
                continue;
            }
            steps[k].push(TraceStep::Send(Message {
                peer: self.root as u32,
                tag: self.tag,
                bytes: bytes[k],
                addr: src_addr,
            }));
            steps[self.root].push(TraceStep::Recv(Message {
                peer: k as u32,
                tag: self.tag,
                bytes: bytes[k],
                addr: root_addr + offsets[k],
            }));
        }
        steps
    }
}

fn prefix(bytes: &[u64]) -> Vec<u64> {
    let mut at = 0;
    bytes
        .iter()
        .map(|&b| {
            let o = at;
            at += b;
            o
        })
        .collect()
}
