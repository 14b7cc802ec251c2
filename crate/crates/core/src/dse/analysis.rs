//! Derived metrics over a result table: speedups, the core count where
//! scaling stalls, and the problem size where a distributed arrangement
//! overtakes a single node with the same core count.

use std::collections::BTreeSet;
use std::fmt;

use crate::config::Arrangement;

use super::{DseError, ResultRow};

/// Marginal speedup below which adding cores counts as saturated.
pub const MARGINAL_SPEEDUP_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupEntry {
    pub config_id: String,
    pub benchmark: String,
    pub problem_size: String,
    pub arrangement: Arrangement,
    pub cycles: u64,
    pub speedup: Option<f64>,
    pub flops_per_cycle: Option<f64>,
}

/// Saturation of one single-node scaling series.
#[derive(Debug, Clone, PartialEq)]
pub struct Saturation {
    pub config_id: String,
    pub benchmark: String,
    pub problem_size: String,
    /// Smallest sampled core count whose speedup over the previous sampled
    /// count is below the threshold; `None` if scaling never stalls.
    pub cores: Option<u32>,
}

/// Where a distributed arrangement starts beating a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub benchmark: String,
    pub smp: Arrangement,
    pub distributed: Arrangement,
    /// Interpolated problem size of the crossover; `None` if the
    /// distributed arrangement never wins at the sampled sizes.
    pub size: Option<f64>,
    /// The distributed arrangement already wins at the smallest sampled
    /// size, so the crossover lies at or below `size`.
    pub at_or_below: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub speedups: Vec<SpeedupEntry>,
    pub saturation: Vec<Saturation>,
    pub crossovers: Vec<Crossover>,
}

/// Analyze rows from one run or sweep.
pub fn analyze(rows: &[ResultRow]) -> Result<Report, DseError> {
    if rows.is_empty() {
        return Err(DseError::Insufficient("no result rows".into()));
    }
    let speedups = rows
        .iter()
        .map(|r| SpeedupEntry {
            config_id: r.config_id.clone(),
            benchmark: r.benchmark.clone(),
            problem_size: r.problem_size.clone(),
            arrangement: r.arrangement,
            cycles: r.cycles,
            speedup: r.speedup_vs_single,
            flops_per_cycle: r.flops_per_cycle,
        })
        .collect();
    Ok(Report {
        speedups,
        saturation: saturation(rows),
        crossovers: crossovers(rows),
    })
}

fn saturation(rows: &[ResultRow]) -> Vec<Saturation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for r in rows {
        let key = (r.config_id.clone(), r.benchmark.clone(), r.problem_size.clone());
        if !seen.insert(key) {
            continue;
        }
        let mut series: Vec<(u32, u64)> = rows
            .iter()
            .filter(|s| s.arrangement.is_smp() && s.same_problem(r))
            .map(|s| (s.arrangement.cores_per_node, s.cycles))
            .collect();
        series.sort();
        series.dedup_by_key(|p| p.0);
        if series.len() < 2 {
            continue;
        }
        let cores = series
            .windows(2)
            .find(|w| (w[0].1 as f64 / w[1].1 as f64) - 1.0 < MARGINAL_SPEEDUP_THRESHOLD)
            .map(|w| w[1].0);
        out.push(Saturation {
            config_id: r.config_id.clone(),
            benchmark: r.benchmark.clone(),
            problem_size: r.problem_size.clone(),
            cores,
        });
    }
    out
}

/// Cycles of `arr` at each problem size, smallest size first.
fn series(rows: &[ResultRow], benchmark: &str, arr: Arrangement) -> Vec<(u64, u64)> {
    let mut s: Vec<(u64, u64)> = rows
        .iter()
        .filter(|r| r.benchmark == benchmark && r.arrangement == arr)
        .filter_map(|r| Some((r.size()?, r.cycles)))
        .collect();
    s.sort();
    s.dedup_by_key(|p| p.0);
    s
}

fn crossovers(rows: &[ResultRow]) -> Vec<Crossover> {
    let mut out = Vec::new();
    let benchmarks: BTreeSet<&str> = rows.iter().map(|r| r.benchmark.as_str()).collect();
    for bench in benchmarks {
        let arrs: BTreeSet<Arrangement> = rows.iter().filter(|r| r.benchmark == bench).map(|r| r.arrangement).collect();
        for &smp in arrs.iter().filter(|a| a.is_smp()) {
            for &dist in arrs.iter().filter(|a| !a.is_smp() && a.total_cores() == smp.total_cores()) {
                let a = series(rows, bench, smp);
                let b = series(rows, bench, dist);
                // Relative advantage of the distributed arrangement per size.
                let adv: Vec<(f64, f64)> = a
                    .iter()
                    .filter_map(|&(n, sc)| {
                        let (_, dc) = b.iter().find(|p| p.0 == n)?;
                        Some((n as f64, sc as f64 / *dc as f64 - 1.0))
                    })
                    .collect();
                if adv.len() < 2 {
                    continue;
                }
                out.push(crossover_of(bench, smp, dist, &adv));
            }
        }
    }
    out
}

fn crossover_of(bench: &str, smp: Arrangement, dist: Arrangement, adv: &[(f64, f64)]) -> Crossover {
    let mut c = Crossover {
        benchmark: bench.to_string(),
        smp,
        distributed: dist,
        size: None,
        at_or_below: false,
    };
    match adv.iter().position(|&(_, d)| d > 0.0) {
        Some(0) => {
            c.size = Some(adv[0].0);
            c.at_or_below = true;
        }
        Some(k) => {
            let (n0, d0) = adv[k - 1];
            let (n1, d1) = adv[k];
            c.size = Some(n0 + (n1 - n0) * (-d0) / (d1 - d0));
        }
        None => {}
    }
    c
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "speedup")?;
        for e in &self.speedups {
            write!(
                f,
                "  {:<24} {:<7} {:<12} {:<8} {:>14}",
                e.config_id,
                e.benchmark,
                e.problem_size,
                e.arrangement.to_string(),
                e.cycles
            )?;
            match e.speedup {
                Some(s) => write!(f, " {s:>8.2}x")?,
                None => write!(f, " {:>9}", "-")?,
            }
            if let Some(fpc) = e.flops_per_cycle {
                write!(f, "  {fpc:.3} FLOP/cycle")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "saturation (marginal speedup < {:.0}%)", MARGINAL_SPEEDUP_THRESHOLD * 100.0)?;
        if self.saturation.is_empty() {
            writeln!(f, "  no single-node scaling series")?;
        }
        for s in &self.saturation {
            write!(f, "  {} {} {}: ", s.config_id, s.benchmark, s.problem_size)?;
            match s.cores {
                Some(c) => writeln!(f, "{c} cores")?,
                None => writeln!(f, "none")?,
            }
        }
        writeln!(f, "crossover")?;
        if self.crossovers.is_empty() {
            writeln!(f, "  no comparable single-node and distributed series")?;
        }
        for c in &self.crossovers {
            write!(f, "  {} {} vs {}: ", c.benchmark, c.smp, c.distributed)?;
            match (c.size, c.at_or_below) {
                (Some(n), true) => writeln!(f, "<= {n:.0}")?,
                (Some(n), false) => writeln!(f, "{n:.0}")?,
                (None, _) => writeln!(f, "none")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(config: &str, bench: &str, size: &str, arr: (u32, u32), cycles: u64) -> ResultRow {
        ResultRow {
            config_id: config.into(),
            benchmark: bench.into(),
            problem_size: size.into(),
            arrangement: Arrangement::new(arr.0, arr.1),
            cycles,
            bandwidth_bytes_per_cycle: None,
            speedup_vs_single: None,
            cache_hit_rate: 1.0,
            bus_utilization: 0.0,
            flit_hops: 0,
            packets: 0,
            flops_per_cycle: None,
        }
    }

    #[test]
    fn empty_input_is_insufficient() {
        assert!(matches!(analyze(&[]), Err(DseError::Insufficient(_))));
    }

    #[test]
    fn ideal_scaling_has_no_saturation() {
        let rows: Vec<_> = [1, 2, 4, 8].iter().map(|&c| row("B", "matmul", "64x64x64", (1, c), 8000 / c as u64)).collect();
        let r = analyze(&rows).unwrap();
        assert_eq!(r.saturation.len(), 1);
        assert_eq!(r.saturation[0].cores, None);
    }

    #[test]
    fn saturation_is_first_small_step() {
        let cycles = [(1, 1000), (2, 500), (4, 260), (8, 240), (16, 200)];
        let rows: Vec<_> = cycles.iter().map(|&(c, y)| row("B", "matmul", "64x64x64", (1, c), y)).collect();
        assert_eq!(analyze(&rows).unwrap().saturation[0].cores, Some(8));
    }

    #[test]
    fn crossover_interpolates_between_sizes() {
        // Advantage -0.5 at 1024 and +0.5 at 2048 crosses halfway.
        let rows = vec![
            row("S", "nbody", "1024x1", (1, 32), 100),
            row("D", "nbody", "1024x1", (16, 2), 200),
            row("S", "nbody", "2048x1", (1, 32), 300),
            row("D", "nbody", "2048x1", (16, 2), 200),
        ];
        let c = &analyze(&rows).unwrap().crossovers[0];
        assert_eq!(c.size, Some(1536.0));
        assert!(!c.at_or_below);
        assert_eq!((c.smp, c.distributed), (Arrangement::new(1, 32), Arrangement::new(16, 2)));
    }

    #[test]
    fn distributed_always_better_is_at_or_below_smallest() {
        let rows = vec![
            row("S", "nbody", "512x1", (1, 8), 300),
            row("D", "nbody", "512x1", (2, 4), 200),
            row("S", "nbody", "1024x1", (1, 8), 900),
            row("D", "nbody", "1024x1", (2, 4), 500),
        ];
        let c = &analyze(&rows).unwrap().crossovers[0];
        assert_eq!((c.size, c.at_or_below), (Some(512.0), true));
        assert!(analyze(&rows).unwrap().to_string().contains("<= 512"));
    }

    #[test]
    fn distributed_never_better_has_no_crossover() {
        let rows = vec![
            row("S", "nbody", "512x1", (1, 8), 100),
            row("D", "nbody", "512x1", (2, 4), 200),
            row("S", "nbody", "1024x1", (1, 8), 300),
            row("D", "nbody", "1024x1", (2, 4), 400),
        ];
        assert_eq!(analyze(&rows).unwrap().crossovers[0].size, None);
    }

    #[test]
    fn analysis_is_pure() {
        let rows = vec![row("S", "nbody", "512x1", (1, 1), 100), row("S", "nbody", "512x1", (1, 2), 60)];
        assert_eq!(analyze(&rows).unwrap(), analyze(&rows).unwrap());
    }
}
