//! System configuration: cache geometry, timing constants, mesh shape and
//! the named presets used throughout the exploration loop.
//!
//! Configurations are written as small TOML documents with one table per
//! subsystem. Every key is optional; absent keys inherit from the preset
//! named by the top-level `preset` key (default `BASE`). Presets carry
//! [`TimingParams::calibrated`]; [`TimingParams::default`] holds the
//! nominal constants.
//!
//! ```toml
//! preset = "NOC_SW_C"
//! name = "noc-wide-cache"
//!
//! [system]
//! mesh_x = 4            # nodes along X
//! mesh_y = 4            # nodes along Y
//! cores_per_node = 4    # processing cores per node (router core not counted)
//! coherence = true      # MSI snoop-invalidate between a node's L1 caches
//! mmu = false           # reserved, accepted and ignored
//!
//! [cache]
//! n_sets = 64           # power of two
//! n_ways = 8            # power of two
//! line_bytes = 64       # power of two, >= 8
//!
//! [noc]
//! router = "hardware-switch"          # or "software-core"
//! flow_control = "cut-through"        # or "store-and-forward"
//!
//! [memory]
//! root_bytes = 2097152  # node 0 local memory
//! other_bytes = 262144  # every other node
//! # node_bytes = [...]  # explicit per-node list, overrides the two above
//!
//! [timing]              # all in cycles unless noted
//! cache_hit_cycles = 2
//! bus_addr_overhead_cycles = 4
//! bus_bytes_per_cycle = 8       # bytes/cycle
//! link_flit_bytes = 8           # bytes
//! hw_router_delay_cycles = 2
//! sw_router_cycles_per_flit = 20
//! fp_add_cycles = 4
//! fp_mul_cycles = 4
//! fp_div_cycles = 20
//! fp_sqrt_cycles = 20
//! int_op_cycles = 1
//! barrier_base_cycles = 20
//! barrier_per_core_cycles = 4
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Value;

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;

/// Names accepted by [`preset`], in display order.
pub const PRESET_NAMES: [&str; 7] = [
    "BASE", "BASE32", "C-64-8", "C-64-16", "NOC_BASE", "NOC_SW", "NOC_SW_C",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("value for `{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// L1 data cache geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub n_sets: u32,
    pub n_ways: u32,
    pub line_bytes: u32,
}

impl CacheConfig {
    pub const fn new(n_sets: u32, n_ways: u32, line_bytes: u32) -> Self {
        Self {
            n_sets,
            n_ways,
            line_bytes,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.n_sets as u64 * self.n_ways as u64 * self.line_bytes as u64
    }
}

/// Per-operation latencies of the core, bus and network models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    pub cache_hit_cycles: u64,
    pub bus_addr_overhead_cycles: u64,
    pub bus_bytes_per_cycle: u64,
    pub link_flit_bytes: u64,
    pub hw_router_delay_cycles: u64,
    pub sw_router_cycles_per_flit: u64,
    pub fp_add_cycles: u64,
    pub fp_mul_cycles: u64,
    pub fp_div_cycles: u64,
    pub fp_sqrt_cycles: u64,
    pub int_op_cycles: u64,
    pub barrier_base_cycles: u64,
    pub barrier_per_core_cycles: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            cache_hit_cycles: 2,
            bus_addr_overhead_cycles: 4,
            bus_bytes_per_cycle: 8,
            link_flit_bytes: 8,
            hw_router_delay_cycles: 2,
            sw_router_cycles_per_flit: 20,
            fp_add_cycles: 4,
            fp_mul_cycles: 4,
            fp_div_cycles: 20,
            fp_sqrt_cycles: 20,
            int_op_cycles: 1,
            barrier_base_cycles: 20,
            barrier_per_core_cycles: 4,
        }
    }
}

impl TimingParams {
    /// The constant set the named presets use: faster cache hits and
    /// floating-point units and a slower bus address phase than the
    /// nominal values, each within half of its nominal value.
    pub fn calibrated() -> Self {
        Self {
            cache_hit_cycles: 3,
            bus_addr_overhead_cycles: 6,
            fp_add_cycles: 2,
            fp_mul_cycles: 2,
            fp_div_cycles: 10,
            fp_sqrt_cycles: 10,
            ..Self::default()
        }
    }

    /// Whether every constant lies within ±50% of its nominal value.
    pub fn within_half_of_nominal(&self) -> bool {
        self.fields()
            .iter()
            .zip(Self::default().fields())
            .all(|(&(_, v), (_, nom))| 2 * v >= nom && 2 * v <= 3 * nom)
    }

    /// Bus occupancy of one transaction moving `bytes`.
    #[inline]
    pub fn bus_service_cycles(&self, bytes: u64) -> u64 {
        self.bus_addr_overhead_cycles + bytes.div_ceil(self.bus_bytes_per_cycle)
    }

    /// Number of link flits needed for `payload_bytes`.
    #[inline]
    pub fn flits(&self, payload_bytes: u64) -> u64 {
        payload_bytes.div_ceil(self.link_flit_bytes)
    }

    fn fields(&self) -> [(&'static str, u64); 13] {
        [
            ("cache_hit_cycles", self.cache_hit_cycles),
            ("bus_addr_overhead_cycles", self.bus_addr_overhead_cycles),
            ("bus_bytes_per_cycle", self.bus_bytes_per_cycle),
            ("link_flit_bytes", self.link_flit_bytes),
            ("hw_router_delay_cycles", self.hw_router_delay_cycles),
            ("sw_router_cycles_per_flit", self.sw_router_cycles_per_flit),
            ("fp_add_cycles", self.fp_add_cycles),
            ("fp_mul_cycles", self.fp_mul_cycles),
            ("fp_div_cycles", self.fp_div_cycles),
            ("fp_sqrt_cycles", self.fp_sqrt_cycles),
            ("int_op_cycles", self.int_op_cycles),
            ("barrier_base_cycles", self.barrier_base_cycles),
            ("barrier_per_core_cycles", self.barrier_per_core_cycles),
        ]
    }

    fn field_mut(&mut self, name: &str) -> Option<&mut u64> {
        Some(match name {
            "cache_hit_cycles" => &mut self.cache_hit_cycles,
            "bus_addr_overhead_cycles" => &mut self.bus_addr_overhead_cycles,
            "bus_bytes_per_cycle" => &mut self.bus_bytes_per_cycle,
            "link_flit_bytes" => &mut self.link_flit_bytes,
            "hw_router_delay_cycles" => &mut self.hw_router_delay_cycles,
            "sw_router_cycles_per_flit" => &mut self.sw_router_cycles_per_flit,
            "fp_add_cycles" => &mut self.fp_add_cycles,
            "fp_mul_cycles" => &mut self.fp_mul_cycles,
            "fp_div_cycles" => &mut self.fp_div_cycles,
            "fp_sqrt_cycles" => &mut self.fp_sqrt_cycles,
            "int_op_cycles" => &mut self.int_op_cycles,
            "barrier_base_cycles" => &mut self.barrier_base_cycles,
            "barrier_per_core_cycles" => &mut self.barrier_per_core_cycles,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouterKind {
    /// A small general-purpose core per node forwards packets in software.
    SoftwareCore,
    /// A stream switch forwards packets in hardware.
    HardwareSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowControl {
    StoreAndForward,
    CutThrough,
}

impl RouterKind {
    fn key(self) -> &'static str {
        match self {
            RouterKind::SoftwareCore => "software-core",
            RouterKind::HardwareSwitch => "hardware-switch",
        }
    }
}

impl FlowControl {
    fn key(self) -> &'static str {
        match self {
            FlowControl::StoreAndForward => "store-and-forward",
            FlowControl::CutThrough => "cut-through",
        }
    }
}

/// One explorable system point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    pub mesh_x: u32,
    pub mesh_y: u32,
    pub cores_per_node: u32,
    pub router_kind: RouterKind,
    pub flow_control: FlowControl,
    pub cache: CacheConfig,
    /// Local memory size of every node, indexed by node id.
    pub node_mem_bytes: Vec<u64>,
    pub coherence_enabled: bool,
    /// Reserved; the simulator has no virtual memory.
    pub mmu_enabled: bool,
    pub timing: TimingParams,
}

impl SystemConfig {
    pub fn node_count(&self) -> usize {
        self.mesh_x as usize * self.mesh_y as usize
    }

    pub fn total_cores(&self) -> usize {
        self.node_count() * self.cores_per_node as usize
    }

    pub fn total_mem_bytes(&self) -> u64 {
        self.node_mem_bytes.iter().sum()
    }

    /// Restrict the configuration to the cores a given arrangement uses.
    ///
    /// The arrangement occupies nodes `0..nodes`; each of them runs
    /// `cores_per_node` processing cores. The mesh keeps its full shape so
    /// hop distances are unchanged.
    pub fn with_arrangement(&self, arr: Arrangement) -> Result<SystemConfig, ConfigError> {
        if arr.nodes == 0 || arr.cores_per_node == 0 {
            return Err(ConfigError::OutOfRange {
                key: "arrangement".into(),
                reason: format!("{arr} must use at least one node and one core"),
            });
        }
        if arr.nodes as usize > self.node_count() {
            return Err(ConfigError::OutOfRange {
                key: "arrangement".into(),
                reason: format!(
                    "{arr} needs {} nodes but the mesh has {}",
                    arr.nodes,
                    self.node_count()
                ),
            });
        }
        let mut cfg = self.clone();
        cfg.cores_per_node = arr.cores_per_node;
        Ok(cfg)
    }

    /// Render as a complete configuration document (no preset indirection).
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n\n", Value::from(self.name.clone())));
        out.push_str("[system]\n");
        out.push_str(&format!("mesh_x = {}\n", self.mesh_x));
        out.push_str(&format!("mesh_y = {}\n", self.mesh_y));
        out.push_str(&format!("cores_per_node = {}\n", self.cores_per_node));
        out.push_str(&format!("coherence = {}\n", self.coherence_enabled));
        out.push_str(&format!("mmu = {}\n\n", self.mmu_enabled));
        out.push_str("[cache]\n");
        out.push_str(&format!("n_sets = {}\n", self.cache.n_sets));
        out.push_str(&format!("n_ways = {}\n", self.cache.n_ways));
        out.push_str(&format!("line_bytes = {}\n\n", self.cache.line_bytes));
        out.push_str("[noc]\n");
        out.push_str(&format!("router = \"{}\"\n", self.router_kind.key()));
        out.push_str(&format!("flow_control = \"{}\"\n\n", self.flow_control.key()));
        out.push_str("[memory]\n");
        let list: Vec<String> = self.node_mem_bytes.iter().map(|b| b.to_string()).collect();
        out.push_str(&format!("node_bytes = [{}]\n\n", list.join(", ")));
        out.push_str("[timing]\n");
        for (k, v) in self.timing.fields() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// How a workload is spread: `nodes` mesh nodes with `cores_per_node`
/// processing cores each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arrangement {
    pub nodes: u32,
    pub cores_per_node: u32,
}

impl Arrangement {
    pub const fn new(nodes: u32, cores_per_node: u32) -> Self {
        Self {
            nodes,
            cores_per_node,
        }
    }

    pub fn total_cores(&self) -> u32 {
        self.nodes * self.cores_per_node
    }

    pub fn is_smp(&self) -> bool {
        self.nodes == 1
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.nodes, self.cores_per_node)
    }
}

impl FromStr for Arrangement {
    type Err = String;

    /// Accepts `(4,4)`, `4,4` or `4x4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (a, b) = t
            .split_once(',')
            .or_else(|| t.split_once('x'))
            .ok_or_else(|| format!("malformed arrangement `{s}`"))?;
        let nodes: u32 = a.trim().parse().map_err(|_| format!("bad node count in `{s}`"))?;
        let cores: u32 = b.trim().parse().map_err(|_| format!("bad core count in `{s}`"))?;
        if nodes == 0 || cores == 0 {
            return Err(format!("arrangement `{s}` must be at least (1,1)"));
        }
        Ok(Arrangement::new(nodes, cores))
    }
}

/// Parse a comma/space separated list such as `(1,1),(4,4) (16,1)`.
pub fn parse_arrangements(s: &str) -> Result<Vec<Arrangement>, String> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        rest = rest.trim_start_matches([',', ' ', ';']);
        if rest.is_empty() {
            break;
        }
        if rest.starts_with('(') {
            let end = rest
                .find(')')
                .ok_or_else(|| format!("unterminated arrangement in `{s}`"))?;
            out.push(rest[..=end].parse()?);
            rest = &rest[end + 1..];
        } else {
            let end = rest.find([';', ' ']).unwrap_or(rest.len());
            out.push(rest[..end].parse()?);
            rest = &rest[end..];
        }
    }
    Ok(out)
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub type ValidationReport = Vec<Violation>;

fn is_pow2(v: u32) -> bool {
    v != 0 && v.is_power_of_two()
}

/// Check every configuration invariant; an empty report means valid.
pub fn validate(cfg: &SystemConfig) -> ValidationReport {
    let mut report = Vec::new();
    let mut fail = |field: &str, message: String| {
        report.push(Violation {
            field: field.to_string(),
            message,
        })
    };

    if cfg.mesh_x == 0 {
        fail("system.mesh_x", "must be at least 1".into());
    }
    if cfg.mesh_y == 0 {
        fail("system.mesh_y", "must be at least 1".into());
    }
    if cfg.cores_per_node == 0 {
        fail("system.cores_per_node", "must be at least 1".into());
    }

    let c = &cfg.cache;
    if !is_pow2(c.n_sets) {
        fail("cache.n_sets", format!("{} is not a power of two", c.n_sets));
    }
    if !is_pow2(c.n_ways) {
        fail("cache.n_ways", format!("{} is not a power of two", c.n_ways));
    } else if c.n_ways > 255 {
        fail("cache.n_ways", "at most 255 ways are supported".into());
    }
    if !is_pow2(c.line_bytes) || c.line_bytes < 8 {
        fail(
            "cache.line_bytes",
            format!("{} is not a power of two >= 8", c.line_bytes),
        );
    }

    let nodes = cfg.node_count();
    if cfg.node_mem_bytes.len() != nodes {
        fail(
            "memory.node_bytes",
            format!(
                "node memory map incomplete: {} entries for {} nodes",
                cfg.node_mem_bytes.len(),
                nodes
            ),
        );
    }
    let floor = 4 * c.total_bytes();
    for (id, &bytes) in cfg.node_mem_bytes.iter().enumerate() {
        if bytes < floor {
            fail(
                "memory.node_bytes",
                format!("node {id} has {bytes} bytes, below the working-set floor of {floor}"),
            );
        }
    }

    for (name, value) in cfg.timing.fields() {
        if name != "barrier_base_cycles" && value == 0 {
            fail(&format!("timing.{name}"), "must be at least 1".into());
        }
    }
    report
}

fn smp(name: &str, cores: u32, cache: CacheConfig) -> SystemConfig {
    SystemConfig {
        name: name.to_string(),
        mesh_x: 1,
        mesh_y: 1,
        cores_per_node: cores,
        router_kind: RouterKind::HardwareSwitch,
        flow_control: FlowControl::StoreAndForward,
        cache,
        node_mem_bytes: vec![16 * MIB],
        coherence_enabled: true,
        mmu_enabled: false,
        timing: TimingParams::calibrated(),
    }
}

fn noc(name: &str, router_kind: RouterKind, flow_control: FlowControl) -> SystemConfig {
    let mut node_mem_bytes = vec![256 * KIB; 16];
    node_mem_bytes[0] = 2 * MIB;
    SystemConfig {
        name: name.to_string(),
        mesh_x: 4,
        mesh_y: 4,
        cores_per_node: 4,
        router_kind,
        flow_control,
        cache: CacheConfig::new(64, 4, 64),
        node_mem_bytes,
        coherence_enabled: true,
        mmu_enabled: false,
        timing: TimingParams::calibrated(),
    }
}

/// A named configuration from the cache and network exploration tables.
pub fn preset(name: &str) -> Result<SystemConfig, ConfigError> {
    let base_cache = CacheConfig::new(64, 4, 64);
    Ok(match name {
        "BASE" => smp("BASE", 1, base_cache),
        "BASE32" => smp("BASE32", 32, base_cache),
        "C-64-8" => smp("C-64-8", 4, CacheConfig::new(64, 8, 64)),
        "C-64-16" => smp("C-64-16", 4, CacheConfig::new(64, 16, 64)),
        "NOC_BASE" => noc("NOC_BASE", RouterKind::SoftwareCore, FlowControl::StoreAndForward),
        "NOC_SW" => noc("NOC_SW", RouterKind::HardwareSwitch, FlowControl::StoreAndForward),
        "NOC_SW_C" => noc("NOC_SW_C", RouterKind::HardwareSwitch, FlowControl::CutThrough),
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    })
}

fn out_of_range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(out_of_range(key, format!("{i} is negative"))),
        other => Err(out_of_range(
            key,
            format!("expected a non-negative integer, found {}", other.type_str()),
        )),
    }
}

fn as_u32(key: &str, v: &Value) -> Result<u32, ConfigError> {
    let n = as_u64(key, v)?;
    u32::try_from(n).map_err(|_| out_of_range(key, format!("{n} does not fit in 32 bits")))
}

fn as_count(key: &str, v: &Value) -> Result<u32, ConfigError> {
    let n = as_u32(key, v)?;
    if n == 0 {
        return Err(out_of_range(key, "must be at least 1"));
    }
    Ok(n)
}

fn as_pow2(key: &str, v: &Value) -> Result<u32, ConfigError> {
    let n = as_u32(key, v)?;
    if !is_pow2(n) {
        return Err(out_of_range(key, format!("{n} is not a power of two")));
    }
    Ok(n)
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool()
        .ok_or_else(|| out_of_range(key, format!("expected a boolean, found {}", v.type_str())))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str()
        .ok_or_else(|| out_of_range(key, format!("expected a string, found {}", v.type_str())))
}

/// Memory keys are resolved after the whole document is read, because
/// their meaning depends on the final node count.
#[derive(Default)]
struct MemoryKeys {
    node_bytes: Option<Vec<u64>>,
    root_bytes: Option<u64>,
    other_bytes: Option<u64>,
}

/// Set a single dotted key (`cache.n_ways`, `timing.fp_add_cycles`, ...).
///
/// Used by the parser and by sweeps. Memory keys other than `node_bytes`
/// resize the node memory list to the current node count.
pub fn set_key(cfg: &mut SystemConfig, key: &str, value: &Value) -> Result<(), ConfigError> {
    let mut mem = MemoryKeys::default();
    apply_key(cfg, &mut mem, key, value)?;
    resolve_memory(cfg, mem);
    Ok(())
}

fn apply_key(
    cfg: &mut SystemConfig,
    mem: &mut MemoryKeys,
    key: &str,
    value: &Value,
) -> Result<(), ConfigError> {
    let (section, field) = key.split_once('.').unwrap_or(("", key));
    match (section, field) {
        ("", "name") => cfg.name = as_str(key, value)?.to_string(),
        ("system", "mesh_x") => cfg.mesh_x = as_count(key, value)?,
        ("system", "mesh_y") => cfg.mesh_y = as_count(key, value)?,
        ("system", "cores_per_node") => cfg.cores_per_node = as_count(key, value)?,
        ("system", "coherence") => cfg.coherence_enabled = as_bool(key, value)?,
        ("system", "mmu") => cfg.mmu_enabled = as_bool(key, value)?,
        ("cache", "n_sets") => cfg.cache.n_sets = as_pow2(key, value)?,
        ("cache", "n_ways") => {
            let n = as_pow2(key, value)?;
            if n > 255 {
                return Err(out_of_range(key, "at most 255 ways are supported"));
            }
            cfg.cache.n_ways = n;
        }
        ("cache", "line_bytes") => {
            let n = as_pow2(key, value)?;
            if n < 8 {
                return Err(out_of_range(key, format!("{n} is below the 8-byte minimum")));
            }
            cfg.cache.line_bytes = n;
        }
        ("noc", "router") => {
            cfg.router_kind = match as_str(key, value)? {
                "software-core" => RouterKind::SoftwareCore,
                "hardware-switch" => RouterKind::HardwareSwitch,
                other => return Err(out_of_range(key, format!("unknown router `{other}`"))),
            }
        }
        ("noc", "flow_control") => {
            cfg.flow_control = match as_str(key, value)? {
                "store-and-forward" => FlowControl::StoreAndForward,
                "cut-through" => FlowControl::CutThrough,
                other => {
                    return Err(out_of_range(key, format!("unknown flow control `{other}`")))
                }
            }
        }
        ("memory", "node_bytes") => {
            let arr = value
                .as_array()
                .ok_or_else(|| out_of_range(key, "expected an array of byte counts"))?;
            let list = arr
                .iter()
                .map(|v| as_u64(key, v))
                .collect::<Result<Vec<_>, _>>()?;
            mem.node_bytes = Some(list);
        }
        ("memory", "root_bytes") => mem.root_bytes = Some(as_u64(key, value)?),
        ("memory", "other_bytes") => mem.other_bytes = Some(as_u64(key, value)?),
        ("timing", f) => {
            let slot = cfg
                .timing
                .field_mut(f)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            let n = as_u64(key, value)?;
            if n == 0 && f != "barrier_base_cycles" {
                return Err(out_of_range(key, "must be at least 1"));
            }
            *slot = n;
        }
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

fn resolve_memory(cfg: &mut SystemConfig, mem: MemoryKeys) {
    if let Some(list) = mem.node_bytes {
        cfg.node_mem_bytes = list;
        return;
    }
    let nodes = cfg.node_count();
    if cfg.node_mem_bytes.len() == nodes && mem.root_bytes.is_none() && mem.other_bytes.is_none()
    {
        return;
    }
    let root = mem
        .root_bytes
        .or_else(|| cfg.node_mem_bytes.first().copied())
        .unwrap_or(16 * MIB);
    let other = mem
        .other_bytes
        .or_else(|| cfg.node_mem_bytes.get(1).copied())
        .unwrap_or(root);
    let mut list = vec![other; nodes];
    if let Some(first) = list.first_mut() {
        *first = root;
    }
    cfg.node_mem_bytes = list;
}

fn syntax_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let offset = err.span().map(|s| s.start).unwrap_or(0).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    ConfigError::Syntax {
        line,
        column,
        message: err.message().to_string(),
    }
}

/// Parse a configuration document.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e| syntax_error(text, &e))?;

    let mut cfg = match table.get("preset") {
        Some(v) => preset(as_str("preset", v)?)?,
        None => preset("BASE")?,
    };
    let mut mem = MemoryKeys::default();

    for (key, value) in &table {
        match (key.as_str(), value) {
            ("preset", _) => {}
            (section, Value::Table(inner))
                if matches!(section, "system" | "cache" | "noc" | "memory" | "timing") =>
            {
                for (field, v) in inner {
                    apply_key(&mut cfg, &mut mem, &format!("{section}.{field}"), v)?;
                }
            }
            ("name", v) => apply_key(&mut cfg, &mut mem, "name", v)?,
            (other, _) => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    resolve_memory(&mut cfg, mem);

    if let Some(v) = validate(&cfg).into_iter().next() {
        return Err(ConfigError::OutOfRange {
            key: v.field,
            reason: v.message,
        });
    }
    Ok(cfg)
}
