//! Node memory hierarchy: per-core L1 data caches, MSI coherence between
//! them, and the shared bus to node-local memory.

pub mod bus;
pub mod cache;
pub mod coherence;

pub use bus::BusArbiter;
pub use cache::{AccessKind, AccessOutcome, CacheState, Eviction, LineState};
pub use coherence::{msi_violation, snoop, snoop_read, SnoopResult};

/// One memory reference issued by a core, in node-local address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemAccess {
    pub core_id: u32,
    pub kind: AccessKind,
    pub addr: u64,
    pub bytes: u8,
}

impl MemAccess {
    pub fn read(core_id: u32, addr: u64, bytes: u8) -> Self {
        Self {
            core_id,
            kind: AccessKind::Read,
            addr,
            bytes,
        }
    }

    pub fn write(core_id: u32, addr: u64, bytes: u8) -> Self {
        Self {
            core_id,
            kind: AccessKind::Write,
            addr,
            bytes,
        }
    }

    /// Size is 1, 2, 4 or 8 bytes and the access stays inside one line.
    pub fn is_well_formed(&self, line_bytes: u64) -> bool {
        matches!(self.bytes, 1 | 2 | 4 | 8)
            && self.addr / line_bytes == (self.addr + self.bytes as u64 - 1) / line_bytes
    }
}
