//! Design-space exploration: run a benchmark over arrangements or over a
//! grid of configuration values, derive speedups, saturation points and
//! SMP/NoC crossovers, and exchange result tables as CSV.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Value;

use crate::benchmarks::{
    matmul_run, nbody_run, stream_run, BenchError, MatmulParams, NbodyParams, StreamKernel, StreamParams,
};
use crate::config::{set_key, validate, Arrangement, ConfigError, SystemConfig};
use crate::engine::SimStats;

mod analysis;

pub use analysis::{analyze, Crossover, Report, Saturation, SpeedupEntry, MARGINAL_SPEEDUP_THRESHOLD};

#[derive(Debug, Error)]
pub enum DseError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{benchmark} on {config} {arrangement} failed")]
    Run {
        benchmark: String,
        config: String,
        arrangement: Arrangement,
        #[source]
        source: BenchError,
    },
    #[error("every sweep point is invalid:\n  {}", .0.join("\n  "))]
    NoValidPoints(Vec<String>),
    #[error("cannot analyze: {0}")]
    Insufficient(String),
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl DseError {
    /// Process exit code: 1 validation or verification (including a
    /// malformed input table), 2 deadlock, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            DseError::Run { source, .. } if source.is_deadlock() => 2,
            DseError::Io { .. } => 3,
            DseError::Csv { source, .. } if source.is_io_error() => 3,
            _ => 1,
        }
    }
}

/// A benchmark together with its problem parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Benchmark {
    Stream(StreamParams),
    Matmul(MatmulParams),
    Nbody(NbodyParams),
}

impl Benchmark {
    pub fn id(&self) -> &'static str {
        match self {
            Benchmark::Stream(_) => "stream",
            Benchmark::Matmul(_) => "matmul",
            Benchmark::Nbody(_) => "nbody",
        }
    }

    /// `n` for STREAM, `NxKxM` for Matmul, `N` bodies `x` timesteps for
    /// N-body. The leading number is the size analyses interpolate over.
    pub fn problem_size(&self) -> String {
        match self {
            Benchmark::Stream(p) => p.n.to_string(),
            Benchmark::Matmul(p) => format!("{}x{}x{}", p.n, p.k, p.m),
            Benchmark::Nbody(p) => format!("{}x{}", p.n, p.timesteps),
        }
    }

    fn with_seed(self, seed: u64) -> Self {
        match self {
            Benchmark::Stream(p) => Benchmark::Stream(p),
            Benchmark::Matmul(p) => Benchmark::Matmul(MatmulParams { seed, ..p }),
            Benchmark::Nbody(p) => Benchmark::Nbody(NbodyParams { seed, ..p }),
        }
    }
}

/// One benchmark on one configuration over a list of arrangements.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub config: SystemConfig,
    pub benchmark: Benchmark,
    pub arrangements: Vec<Arrangement>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), DseError> {
        let violations = validate(&self.config);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(DseError::Invalid(list.join("; ")));
        }
        for &arr in &self.arrangements {
            check_arrangement(&self.config, &self.benchmark, arr)?;
        }
        Ok(())
    }
}

fn check_arrangement(cfg: &SystemConfig, bench: &Benchmark, arr: Arrangement) -> Result<(), DseError> {
    cfg.with_arrangement(arr)?;
    if matches!(bench, Benchmark::Stream(_)) && !arr.is_smp() {
        return Err(DseError::Invalid(format!("STREAM runs on a single node, not {arr}")));
    }
    Ok(())
}

/// CSV column names, in order.
pub const COLUMNS: [&str; 12] = [
    "config_id",
    "benchmark",
    "problem_size",
    "arrangement",
    "cycles",
    "bandwidth_bytes_per_cycle",
    "speedup_vs_single",
    "cache_hit_rate",
    "bus_utilization",
    "flit_hops",
    "packets",
    "flops_per_cycle",
];

/// Metrics of one benchmark run on one arrangement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_id: String,
    pub benchmark: String,
    pub problem_size: String,
    #[serde(with = "arrangement_text")]
    pub arrangement: Arrangement,
    pub cycles: u64,
    /// STREAM COPY bandwidth; empty for other benchmarks.
    pub bandwidth_bytes_per_cycle: Option<f64>,
    /// Empty when the same table holds no `(1,1)` run of this problem.
    pub speedup_vs_single: Option<f64>,
    pub cache_hit_rate: f64,
    pub bus_utilization: f64,
    pub flit_hops: u64,
    pub packets: u64,
    /// N-body only.
    pub flops_per_cycle: Option<f64>,
}

mod arrangement_text {
    use super::Arrangement;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Arrangement, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(a)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arrangement, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl ResultRow {
    fn from_stats(cfg: &SystemConfig, bench: &Benchmark, arr: Arrangement, stats: &SimStats) -> Self {
        Self {
            config_id: cfg.name.clone(),
            benchmark: bench.id().to_string(),
            problem_size: bench.problem_size(),
            arrangement: arr,
            cycles: stats.total_cycles,
            bandwidth_bytes_per_cycle: None,
            speedup_vs_single: None,
            cache_hit_rate: stats.hit_rate(),
            bus_utilization: stats.bus_utilization(),
            flit_hops: stats.flit_hops,
            packets: stats.packets_sent,
            flops_per_cycle: None,
        }
    }

    /// The numeric problem size (the leading number of `problem_size`).
    pub fn size(&self) -> Option<u64> {
        let digits: String = self.problem_size.chars().take_while(|c| c.is_ascii_digit()).collect();
        digits.parse().ok()
    }

    fn same_problem(&self, other: &ResultRow) -> bool {
        self.config_id == other.config_id
            && self.benchmark == other.benchmark
            && self.problem_size == other.problem_size
    }
}

fn run_one(cfg: &SystemConfig, bench: &Benchmark, arr: Arrangement, seed: u64) -> Result<ResultRow, DseError> {
    let wrap = |source: BenchError| DseError::Run {
        benchmark: bench.id().to_string(),
        config: cfg.name.clone(),
        arrangement: arr,
        source,
    };
    let bench = bench.with_seed(seed);
    check_arrangement(cfg, &bench, arr)?;
    Ok(match &bench {
        Benchmark::Stream(p) => {
            let r = stream_run(p, arr.cores_per_node as usize, cfg).map_err(wrap)?;
            let mut row = ResultRow::from_stats(cfg, &bench, arr, &r.stats);
            row.bandwidth_bytes_per_cycle = Some(r.bandwidth_of(StreamKernel::Copy));
            row
        }
        Benchmark::Matmul(p) => {
            let r = matmul_run(p, arr, cfg).map_err(wrap)?;
            ResultRow::from_stats(cfg, &bench, arr, &r.stats)
        }
        Benchmark::Nbody(p) => {
            let r = nbody_run(p, arr, cfg).map_err(wrap)?;
            let mut row = ResultRow::from_stats(cfg, &bench, arr, &r.stats);
            row.flops_per_cycle = Some(r.flops_per_cycle());
            row
        }
    })
}

/// Set `speedup_vs_single` of every row that has a `(1,1)` run of the
/// same problem on the same configuration in `rows`.
pub fn fill_speedups(rows: &mut [ResultRow]) {
    let single = Arrangement::new(1, 1);
    let bases: Vec<Option<u64>> = rows
        .iter()
        .map(|r| {
            rows.iter()
                .find(|b| b.arrangement == single && b.same_problem(r))
                .map(|b| b.cycles)
        })
        .collect();
    for (row, base) in rows.iter_mut().zip(bases) {
        row.speedup_vs_single = base.map(|b| b as f64 / row.cycles as f64);
    }
}

/// Run the benchmark once per arrangement, in order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, DseError> {
    spec.validate()?;
    let mut rows = spec
        .arrangements
        .iter()
        .map(|&arr| run_one(&spec.config, &spec.benchmark, arr, spec.seed))
        .collect::<Result<Vec<_>, _>>()?;
    fill_speedups(&mut rows);
    Ok(rows)
}

/// One grid dimension: a configuration key (`cache.n_ways`, or an
/// unambiguous bare field name such as `n_ways`), `cores` for
/// single-node arrangements, or `arrangement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for Axis {
    type Err = String;

    /// Parses `key=v1,v2,...`; `arrangement` values are separated by `;`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, rest) = s.split_once('=').ok_or_else(|| format!("axis `{s}` lacks `=`"))?;
        let key = key.trim().to_string();
        let sep = if key == "arrangement" { ';' } else { ',' };
        let values: Vec<String> = rest
            .split(sep)
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if key.is_empty() || values.is_empty() {
            return Err(format!("axis `{s}` needs a key and at least one value"));
        }
        Ok(Self { key, values })
    }
}

/// An experiment whose configuration and arrangements vary over a grid.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    /// One diagnostic per skipped grid point.
    pub skipped: Vec<String>,
}

const SECTIONS: [&str; 5] = ["system", "cache", "noc", "memory", "timing"];

fn axis_value(text: &str) -> Value {
    if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(b) = text.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(text.to_string())
    }
}

/// Apply `key = text` to `cfg`, resolving a bare field name to the one
/// section that accepts it.
fn apply_axis(cfg: &mut SystemConfig, key: &str, text: &str) -> Result<(), ConfigError> {
    let value = axis_value(text);
    if key.contains('.') {
        return set_key(cfg, key, &value);
    }
    let mut accepted = Vec::new();
    for section in SECTIONS {
        let mut probe = cfg.clone();
        match set_key(&mut probe, &format!("{section}.{key}"), &value) {
            Err(ConfigError::UnknownKey(_)) => {}
            result => accepted.push((probe, result)),
        }
    }
    match accepted.len() {
        1 => {
            let (probe, result) = accepted.pop().expect("one candidate");
            result?;
            *cfg = probe;
            Ok(())
        }
        0 => Err(ConfigError::UnknownKey(key.to_string())),
        _ => Err(ConfigError::OutOfRange {
            key: key.to_string(),
            reason: "ambiguous; qualify it with its section".into(),
        }),
    }
}

/// Every grid point's configuration and arrangements, or why it is invalid.
fn grid_points(spec: &SweepSpec) -> Vec<Result<(SystemConfig, Vec<Arrangement>), String>> {
    let mut points = vec![(Vec::<(usize, usize)>::new())];
    for (a, axis) in spec.axes.iter().enumerate() {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..axis.values.len()).map(move |v| {
                    let mut q = p.clone();
                    q.push((a, v));
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|choice| {
            let mut cfg = spec.base.config.clone();
            let mut arrangements = spec.base.arrangements.clone();
            let mut labels = Vec::new();
            let here: Vec<String> = choice
                .iter()
                .map(|&(a, v)| format!("{}={}", spec.axes[a].key, spec.axes[a].values[v]))
                .collect();
            let here = here.join(" ");
            for &(a, v) in &choice {
                let key = spec.axes[a].key.as_str();
                let text = spec.axes[a].values[v].as_str();
                match key {
                    "cores" => {
                        let c: u32 = text.parse().map_err(|_| format!("{here}: bad core count `{text}`"))?;
                        arrangements = vec![Arrangement::new(1, c)];
                    }
                    "arrangement" => {
                        let arr: Arrangement = text.parse().map_err(|e| format!("{here}: {e}"))?;
                        arrangements = vec![arr];
                    }
                    _ => {
                        apply_axis(&mut cfg, key, text).map_err(|e| format!("{here}: {e}"))?;
                        labels.push(format!("{key}={text}"));
                    }
                }
            }
            let violations = validate(&cfg);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(format!("{here}: {}", list.join("; ")));
            }
            for &arr in &arrangements {
                check_arrangement(&cfg, &spec.base.benchmark, arr).map_err(|e| format!("{here}: {e}"))?;
            }
            if !labels.is_empty() {
                cfg.name = format!("{}[{}]", cfg.name, labels.join(";"));
            }
            Ok((cfg, arrangements))
        })
        .collect()
}

/// Simulate every valid point of the grid on up to `jobs` threads. Rows
/// come back in grid order (first axis slowest, then arrangement order)
/// whatever the thread count.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepOutcome, DseError> {
    let mut skipped = Vec::new();
    let mut runs = Vec::new();
    for point in grid_points(spec) {
        match point {
            Ok((cfg, arrangements)) => runs.extend(arrangements.into_iter().map(|arr| (cfg.clone(), arr))),
            Err(why) => skipped.push(why),
        }
    }
    if runs.is_empty() && !skipped.is_empty() {
        return Err(DseError::NoValidPoints(skipped));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| DseError::Invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    let bench = spec.base.benchmark;
    let seed = spec.base.seed;
    let results: Vec<Result<ResultRow, DseError>> = pool.install(|| {
        runs.par_iter()
            .map(|(cfg, arr)| run_one(cfg, &bench, *arr, seed))
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    fill_speedups(&mut rows);
    Ok(SweepOutcome { rows, skipped })
}

/// Serialize rows as CSV with a header line, even when `rows` is empty.
pub fn write_csv_to(rows: &[ResultRow], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_from(input: impl Read) -> Result<Vec<ResultRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), DseError> {
    let file = File::create(path).map_err(|source| DseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(rows, file).map_err(|source| DseError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, DseError> {
    let file = File::open(path).map_err(|source| DseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file).map_err(|source| DseError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

impl fmt::Display for ResultRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} {:<7} {:<12} {:<8} {:>14}",
            self.config_id,
            self.benchmark,
            self.problem_size,
            self.arrangement.to_string(),
            self.cycles
        )?;
        match self.speedup_vs_single {
            Some(s) => write!(f, " {s:>8.2}")?,
            None => write!(f, " {:>8}", "-")?,
        }
        write!(f, " {:>6.3} {:>6.3}", self.cache_hit_rate, self.bus_utilization)?;
        if let Some(bw) = self.bandwidth_bytes_per_cycle {
            write!(f, "  {bw:.3} B/cycle")?;
        }
        if let Some(fpc) = self.flops_per_cycle {
            write!(f, "  {fpc:.3} FLOP/cycle")?;
        }
        if self.packets > 0 {
            write!(f, "  {} packets, {} flit-hops", self.packets, self.flit_hops)?;
        }
        Ok(())
    }
}

/// Column captions matching [`ResultRow`]'s `Display`.
pub const TABLE_HEADER: &str = "config                   bench   size         arr              cycles  speedup    hit   util";
