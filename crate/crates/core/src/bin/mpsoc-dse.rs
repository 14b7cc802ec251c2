//! Command-line driver: run one experiment, sweep a parameter grid,
//! analyze a result table, or list the presets.
//!
//! Exit codes: 0 success, 1 validation or verification failure, 2
//! simulation deadlock, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mpsoc_sim::benchmarks::{MatmulParams, NbodyParams, StreamParams};
use mpsoc_sim::config::{parse_arrangements, parse_config, preset, validate, Arrangement, SystemConfig, PRESET_NAMES};
use mpsoc_sim::dse::{
    analyze, emit_csv, read_csv, run_experiment, sweep, Axis, Benchmark, DseError, ExperimentSpec, ResultRow,
    SweepSpec, TABLE_HEADER,
};

#[derive(Parser)]
#[command(name = "mpsoc-dse", version, about = "Design-space exploration for clustered MPSoCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark over a list of arrangements.
    Run(ExperimentArgs),
    /// Run one benchmark over the Cartesian product of parameter axes.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Grid axis `key=v1,v2,...`; keys are config keys, `cores` or
        /// `arrangement` (values separated by `;`). Repeatable.
        #[arg(long = "axis", value_name = "KEY=VALUES")]
        axes: Vec<Axis>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Report speedups, saturation and crossovers of a result CSV.
    Analyze {
        /// CSV written by `run` or `sweep`.
        input: PathBuf,
    },
    /// List the named configurations.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchmarkId {
    Stream,
    Matmul,
    Nbody,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Configuration file; its `preset` key names the base.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration used when no file is given.
    #[arg(long, default_value = "BASE32")]
    preset: String,
    #[arg(long, value_enum)]
    benchmark: BenchmarkId,
    /// STREAM array length, matrix rows N, or body count.
    #[arg(long)]
    n: Option<usize>,
    /// Matmul inner dimension (default N).
    #[arg(long)]
    k: Option<usize>,
    /// Matmul columns of the result (default N).
    #[arg(long)]
    m: Option<usize>,
    /// N-body timesteps.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// STREAM repetitions.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Arrangements such as `(1,1),(4,4)`; defaults to every node of the
    /// configuration with its configured cores.
    #[arg(long)]
    arrangements: Option<String>,
    /// Write the result table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the random inputs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ExperimentArgs {
    fn load_config(&self) -> Result<SystemConfig> {
        let cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| DseError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config(&text)
                    .map_err(DseError::from)
                    .with_context(|| format!("in {}", path.display()))?
            }
            None => preset(&self.preset).map_err(DseError::from)?,
        };
        let violations = validate(&cfg);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(DseError::Invalid(list.join("; ")).into());
        }
        Ok(cfg)
    }

    fn benchmark(&self) -> Benchmark {
        match self.benchmark {
            BenchmarkId::Stream => Benchmark::Stream(StreamParams {
                reps: self.reps,
                ..StreamParams::new(self.n.unwrap_or(128_000))
            }),
            BenchmarkId::Matmul => {
                let n = self.n.unwrap_or(128);
                Benchmark::Matmul(MatmulParams {
                    n,
                    k: self.k.unwrap_or(n),
                    m: self.m.unwrap_or(n),
                    seed: self.seed,
                })
            }
            BenchmarkId::Nbody => Benchmark::Nbody(NbodyParams::new(self.n.unwrap_or(4096), self.steps, self.seed)),
        }
    }

    fn spec(&self) -> Result<ExperimentSpec> {
        let config = self.load_config()?;
        let arrangements = match &self.arrangements {
            Some(text) => parse_arrangements(text).map_err(DseError::Invalid)?,
            None => vec![Arrangement::new(config.node_count() as u32, config.cores_per_node)],
        };
        Ok(ExperimentSpec {
            config,
            benchmark: self.benchmark(),
            arrangements,
            seed: self.seed,
        })
    }
}

fn print_rows(rows: &[ResultRow]) {
    println!("{TABLE_HEADER}");
    for r in rows {
        println!("{r}");
    }
}

fn finish(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    print_rows(rows);
    if let Some(path) = out {
        emit_csv(rows, path)?;
        eprintln!("wrote {} rows to {}", rows.len(), path.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let rows = run_experiment(&args.spec()?)?;
            finish(&rows, args.out.as_deref())
        }
        Command::Sweep { experiment, axes, jobs } => {
            let spec = SweepSpec {
                base: experiment.spec()?,
                axes,
            };
            let outcome = sweep(&spec, jobs)?;
            for why in &outcome.skipped {
                eprintln!("skipped {why}");
            }
            finish(&outcome.rows, experiment.out.as_deref())
        }
        Command::Analyze { input } => {
            let rows = read_csv(&input)?;
            print!("{}", analyze(&rows)?);
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                let cfg = preset(name).map_err(DseError::from)?;
                println!(
                    "{name:<8} {}x{} mesh, {} cores/node, {}-way {} B cache, {:?}, {:?}",
                    cfg.mesh_x,
                    cfg.mesh_y,
                    cfg.cores_per_node,
                    cfg.cache.n_ways,
                    cfg.cache.total_bytes(),
                    cfg.router_kind,
                    cfg.flow_control
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<DseError>().map_or(1, DseError::exit_code);
            ExitCode::from(code)
        }
    }
}
