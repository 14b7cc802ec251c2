//! Cycle-approximate simulator of a clustered multiprocessor system-on-chip
//! and a design-space-exploration harness around it.
//!
//! A system is a 2-D mesh of nodes. Each node holds a few in-order cores
//! with private L1 data caches on a shared bus to node-local memory; nodes
//! talk only through packets on the mesh. Workloads are per-core traces of
//! compute bursts, memory accesses, barriers and messages, produced by the
//! [`benchmarks`] and executed by the discrete-event [`engine`].

pub mod benchmarks;
pub mod config;
pub mod dse;
pub mod engine;
pub mod memsys;
pub mod noc;
pub mod runtime;

pub use config::{preset, Arrangement, SystemConfig, TimingParams};
pub use engine::{run, run_checking_coherence, SimError, SimStats, TraceStep, Workload};
