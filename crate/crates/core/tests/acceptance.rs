//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Every run is repeated at the end and compared byte for byte through its
//! CSV rendering, so the suite takes several minutes in an optimized build.

mod common;

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mpsoc_sim::benchmarks::matmul::Matrices;
use mpsoc_sim::benchmarks::nbody::{nbody_parallel, nbody_serial, Bodies};
use mpsoc_sim::benchmarks::stream::{StreamArrays, STREAM_KERNELS};
use mpsoc_sim::benchmarks::{MatmulParams, NbodyParams, StreamParams};
use mpsoc_sim::config::{preset, Arrangement, FlowControl, RouterKind, SystemConfig, TimingParams};
use mpsoc_sim::dse::{analyze, run_experiment, write_csv_to, Benchmark, ExperimentSpec, ResultRow};
use mpsoc_sim::noc::packet_latency_uncontended;
use mpsoc_sim::runtime::{partition_even, partitions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const SMP_CORES: [u32; 6] = [1, 2, 4, 8, 16, 32];
const FUNCTIONAL_ARRANGEMENTS: [(u32, u32); 5] = [(1, 1), (1, 4), (4, 4), (16, 1), (16, 4)];
const INSTANCES_PER_BENCHMARK: u64 = 200;
const STREAM_N: usize = 128_000;
const STREAM_REPS: usize = 3;
const CROSSOVER_SIZES: [usize; 5] = [512, 1024, 2048, 4096, 8192];

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn cfg(name: &str) -> SystemConfig {
    preset(name).unwrap()
}

fn arr(a: (u32, u32)) -> Arrangement {
    Arrangement::new(a.0, a.1)
}

fn smp(cores: &[u32]) -> Vec<Arrangement> {
    cores.iter().map(|&c| Arrangement::new(1, c)).collect()
}

fn experiment(config: SystemConfig, benchmark: Benchmark, arrangements: Vec<Arrangement>) -> Vec<ResultRow> {
    let spec = ExperimentSpec {
        config,
        benchmark,
        arrangements,
        seed: SEED,
    };
    run_experiment(&spec).unwrap_or_else(|e| panic!("{e}"))
}

fn stream(n: usize) -> Benchmark {
    Benchmark::Stream(StreamParams {
        reps: STREAM_REPS,
        ..StreamParams::new(n)
    })
}

fn matmul(n: usize, k: usize, m: usize) -> Benchmark {
    Benchmark::Matmul(MatmulParams { n, k, m, seed: SEED })
}

fn nbody(n: usize, steps: usize) -> Benchmark {
    Benchmark::Nbody(NbodyParams::new(n, steps, SEED))
}

fn cycles_at(rows: &[ResultRow], a: Arrangement) -> u64 {
    rows.iter().find(|r| r.arrangement == a).unwrap().cycles
}

fn speedup_at(rows: &[ResultRow], a: Arrangement) -> f64 {
    rows.iter().find(|r| r.arrangement == a).unwrap().speedup_vs_single.unwrap()
}

fn csv(rows: &[ResultRow]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv_to(rows, &mut out).unwrap();
    out
}

/// Every simulation the trend criteria need, in a fixed order.
struct Runs {
    stream: Vec<ResultRow>,
    matmul: Vec<ResultRow>,
    nbody: Vec<ResultRow>,
    cache: Vec<(String, Vec<ResultRow>, Vec<ResultRow>)>,
    noc_matmul: Vec<ResultRow>,
    noc_nbody: Vec<ResultRow>,
    crossover: Vec<ResultRow>,
    flow_control: Vec<(String, Vec<ResultRow>)>,
}

impl Runs {
    fn execute() -> Self {
        let base32 = || cfg("BASE32");
        let noc = || cfg("NOC_SW_C");
        let stream_rows = experiment(base32(), stream(STREAM_N), smp(&SMP_CORES));
        let matmul_rows = experiment(base32(), matmul(128, 128, 128), smp(&SMP_CORES));
        let nbody_rows = experiment(base32(), nbody(4096, 10), smp(&[1, 16, 32]));

        let cache = ["BASE", "C-64-8", "C-64-16"]
            .iter()
            .map(|&name| {
                (
                    name.to_string(),
                    experiment(cfg(name), matmul(128, 128, 128), smp(&[1, 2, 4])),
                    experiment(cfg(name), nbody(2048, 1), smp(&[1, 2, 4])),
                )
            })
            .collect();

        let mut noc_matmul = experiment(base32(), matmul(512, 128, 32), smp(&[16]));
        noc_matmul.extend(experiment(noc(), matmul(512, 128, 32), vec![arr((16, 1)), arr((4, 4))]));

        let chain = [(2, 1), (4, 1), (4, 2), (4, 4), (16, 4)].map(arr).to_vec();
        let noc_nbody = experiment(noc(), nbody(4096, 10), chain);

        let mut crossover = Vec::new();
        for n in CROSSOVER_SIZES {
            crossover.extend(experiment(base32(), nbody(n, 1), smp(&[32])));
            crossover.extend(experiment(noc(), nbody(n, 1), vec![arr((16, 2)), arr((8, 4))]));
        }

        let mixed = [(2, 1), (4, 1), (16, 1), (4, 4), (16, 4)].map(arr).to_vec();
        let flow_control = ["NOC_BASE", "NOC_SW", "NOC_SW_C"]
            .iter()
            .map(|&name| (name.to_string(), experiment(cfg(name), matmul(256, 128, 32), mixed.clone())))
            .collect();

        Runs {
            stream: stream_rows,
            matmul: matmul_rows,
            nbody: nbody_rows,
            cache,
            noc_matmul,
            noc_nbody,
            crossover,
            flow_control,
        }
    }

    fn fingerprint(&self) -> Vec<u8> {
        let mut all = Vec::new();
        for rows in [&self.stream, &self.matmul, &self.nbody, &self.noc_matmul, &self.noc_nbody, &self.crossover] {
            all.extend(csv(rows));
        }
        for (_, m, n) in &self.cache {
            all.extend(csv(m));
            all.extend(csv(n));
        }
        for (_, rows) in &self.flow_control {
            all.extend(csv(rows));
        }
        all
    }
}

/// End-to-end simulated runs on every functional arrangement; each run
/// verifies its functional result against the serial loop.
fn smoke_runs() -> Vec<ResultRow> {
    let all = FUNCTIONAL_ARRANGEMENTS.map(arr).to_vec();
    let mut rows = experiment(cfg("BASE32"), stream(4096), smp(&[1, 4]));
    rows.extend(experiment(cfg("NOC_SW_C"), matmul(24, 16, 8), all.clone()));
    rows.extend(experiment(cfg("NOC_SW_C"), nbody(40, 2), all));
    rows
}

/// STREAM partitioned across nodes and then cores must reproduce the
/// serial loop bit for bit.
fn stream_instance(rng: &mut ChaCha8Rng, a: Arrangement) -> Result<(), String> {
    let n = rng.gen_range(1..2000);
    let reps = rng.gen_range(1..=3);
    let q = rng.gen_range(0.5..4.0);
    let mut serial = StreamArrays::new(n);
    let mut parallel = StreamArrays::new(n);
    for _ in 0..reps {
        for k in STREAM_KERNELS {
            serial.apply(k, q, 0..n, &mut |_, _, _| {});
            for node in partitions(n, a.nodes as usize) {
                for core in 0..a.cores_per_node as usize {
                    let p = partition_even(node.len, a.cores_per_node as usize, core);
                    parallel.apply(k, q, node.start + p.start..node.start + p.start + p.len, &mut |_, _, _| {});
                }
            }
        }
    }
    let bits = |s: &StreamArrays| -> Vec<u64> { s.a.iter().chain(&s.b).chain(&s.c).map(|x| x.to_bits()).collect() };
    if bits(&serial) != bits(&parallel) {
        return Err(format!("STREAM n={n} {a} differs from serial"));
    }
    serial.check(q).map_err(|e| e.to_string())
}

fn matmul_instance(rng: &mut ChaCha8Rng, a: Arrangement, seed: u64) -> Result<(), String> {
    let p = MatmulParams {
        n: rng.gen_range(1..48),
        k: rng.gen_range(1..32),
        m: rng.gen_range(1..32),
        seed,
    };
    let mats = Matrices::random(&p);
    let par = mats.multiply_parallel(a).map_err(|e| e.to_string())?;
    let ser = mats.multiply_serial();
    let same = par.len() == ser.len() && par.iter().zip(&ser).all(|(x, y)| x.to_bits() == y.to_bits());
    if same {
        Ok(())
    } else {
        Err(format!("matmul {}x{}x{} {a} differs from serial", p.n, p.k, p.m))
    }
}

fn nbody_instance(rng: &mut ChaCha8Rng, a: Arrangement, seed: u64) -> Result<(), String> {
    let n = rng.gen_range(2..64);
    let steps = rng.gen_range(1..=3);
    let b = Bodies::random(n, seed);
    let par = nbody_parallel(&b, steps, a, 1.0, 0.01).map_err(|e| e.to_string())?;
    let ser = nbody_serial(&b, steps, 1.0, 0.01).map_err(|e| e.to_string())?;
    match par.bit_eq(&ser) {
        None => Ok(()),
        Some(m) => Err(format!("N-body n={n} {a}: {m}")),
    }
}

/// 200 seeded instances per benchmark, spread evenly over the arrangements.
fn functional_suite() -> (Vec<String>, String) {
    let mut failures = Vec::new();
    let per_arrangement = INSTANCES_PER_BENCHMARK / FUNCTIONAL_ARRANGEMENTS.len() as u64;
    let mut transcript = String::new();
    for (b, name) in ["stream", "matmul", "nbody"].iter().enumerate() {
        for &a in &FUNCTIONAL_ARRANGEMENTS {
            for i in 0..per_arrangement {
                let seed = (b as u64) << 32 | (a.0 as u64) << 16 | (a.1 as u64) << 8 | i;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = arr(a);
                let r = match *name {
                    "stream" => stream_instance(&mut rng, a),
                    "matmul" => matmul_instance(&mut rng, a, seed),
                    _ => nbody_instance(&mut rng, a, seed),
                };
                let _ = writeln!(transcript, "{name} {a} {i} {r:?}");
                if let Err(e) = r {
                    failures.push(e);
                }
            }
        }
    }
    (failures, transcript)
}

fn criterion_1(report: &mut Report, functional: &(Vec<String>, String), smoke: &[ResultRow], elapsed: Duration) {
    let (failures, _) = functional;
    let total = 3 * INSTANCES_PER_BENCHMARK;
    let smoke_ok = smoke.len() == 2 + 2 * FUNCTIONAL_ARRANGEMENTS.len();
    report.check(
        "1 functional exactness",
        failures.is_empty() && smoke_ok && elapsed < Duration::from_secs(300),
        format!(
            "{}/{total} instances bit-exact, {} simulated smoke runs verified, {:.1} s{}",
            total - failures.len() as u64,
            smoke.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    );
}

fn criterion_2(report: &mut Report, rows: &[ResultRow]) {
    let bw: Vec<f64> = SMP_CORES
        .iter()
        .map(|&c| rows.iter().find(|r| r.arrangement == Arrangement::new(1, c)).unwrap().bandwidth_bytes_per_cycle.unwrap())
        .collect();
    let listing = SMP_CORES
        .iter()
        .zip(&bw)
        .map(|(c, b)| format!("{c}:{b:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    report.check(
        "2(a) STREAM COPY bandwidth monotone in cores",
        bw.windows(2).all(|w| w[1] >= w[0]),
        format!("B/cycle {listing}"),
    );
    let ratio_4 = bw[2] / (4.0 * bw[0]);
    report.check(
        "2(b) STREAM within 15% of linear from 1 to 4 cores",
        (ratio_4 - 1.0).abs() <= 0.15,
        format!("BW(4)/(4*BW(1)) = {ratio_4:.3}"),
    );
    let max = bw.iter().cloned().fold(0.0, f64::max);
    report.check("2(c) STREAM bandwidth <= 8 B/cycle", max <= 8.0, format!("max {max:.3}"));
    let ratio_32_8 = bw[5] / bw[3];
    report.check("2(d) STREAM BW(32)/BW(8) < 1.35", ratio_32_8 < 1.35, format!("{ratio_32_8:.3}"));
    report.check(
        "2 STREAM plateau in [1.0, 2.5] B/cycle",
        (1.0..=2.5).contains(&bw[5]),
        format!("BW(32) = {:.3}", bw[5]),
    );
}

fn criterion_3(report: &mut Report, rows: &[ResultRow]) {
    let s = |c| speedup_at(rows, Arrangement::new(1, c));
    let (s4, s8, s32) = (s(4), s(8), s(32));
    report.check(
        "3 Matmul SMP scaling",
        s4 >= 3.5 && (4.5..=7.5).contains(&s8) && s32 < 4.0 * s8 / 2.0,
        format!("speedup(4) {s4:.2} >= 3.5, speedup(8) {s8:.2} in [4.5, 7.5], speedup(32) {s32:.2} < {:.2}", 2.0 * s8),
    );
}

fn criterion_4(report: &mut Report, rows: &[ResultRow]) {
    let s16 = speedup_at(rows, Arrangement::new(1, 16));
    let s32 = speedup_at(rows, Arrangement::new(1, 32));
    report.check(
        "4 N-body SMP scaling",
        s16 >= 13.0 && (15.0..=28.0).contains(&s32),
        format!("speedup(16) {s16:.2} >= 13, speedup(32) {s32:.2} in [15, 28]"),
    );
}

fn criterion_5(report: &mut Report, cache: &[(String, Vec<ResultRow>, Vec<ResultRow>)]) {
    for (bench, pick) in [("Matmul 128^3", 0), ("N-body 2048", 1)] {
        let rows_of = |i: usize| if pick == 0 { &cache[i].1 } else { &cache[i].2 };
        let mut pass = true;
        let mut detail = Vec::new();
        for c in [1, 2, 4] {
            let a = Arrangement::new(1, c);
            let (base, c8, c16) = (cycles_at(rows_of(0), a), cycles_at(rows_of(1), a), cycles_at(rows_of(2), a));
            let reduction = 1.0 - c16 as f64 / base as f64;
            let between = c16 <= c8 && c8 <= base;
            pass &= reduction >= 0.05 && between;
            detail.push(format!("{c} cores: C-64-16 -{:.1}%, C-64-8 between {between}", reduction * 100.0));
        }
        report.check(&format!("5 cache sensitivity, {bench}"), pass, detail.join("; "));
    }
}

fn criterion_6(report: &mut Report, rows: &[ResultRow]) {
    let smp16 = cycles_at(rows, Arrangement::new(1, 16));
    let d16 = cycles_at(rows, arr((16, 1)));
    let d44 = cycles_at(rows, arr((4, 4)));
    report.check(
        "6 NoC Matmul 512x128x32, SMP16 beats (16,1) and (4,4)",
        smp16 < d16 && smp16 < d44,
        format!("SMP16 {smp16}, (16,1) {d16}, (4,4) {d44} cycles"),
    );
}

fn criterion_7(report: &mut Report, chain: &[ResultRow], smp: &[ResultRow]) {
    let single = cycles_at(smp, Arrangement::new(1, 1)) as f64;
    let mut speedups = vec![1.0];
    speedups.extend(chain.iter().map(|r| single / r.cycles as f64));
    let increasing = speedups.windows(2).all(|w| w[1] > w[0]);
    let s44 = single / cycles_at(chain, arr((4, 4))) as f64;
    let smp16 = speedup_at(smp, Arrangement::new(1, 16));
    let listing: Vec<String> = std::iter::once("(1,1):1.00".to_string())
        .chain(chain.iter().zip(&speedups[1..]).map(|(r, s)| format!("{}:{s:.2}", r.arrangement)))
        .collect();
    report.check(
        "7 NoC N-body hybrid benefit",
        increasing && s44 > smp16,
        format!("{}; (4,4) {s44:.2} vs SMP16 {smp16:.2}", listing.join(" ")),
    );
}

fn criterion_8(report: &mut Report, rows: &[ResultRow]) {
    let fpc = |n: usize, a: Arrangement| {
        rows.iter()
            .find(|r| r.size() == Some(n as u64) && r.arrangement == a)
            .and_then(|r| r.flops_per_cycle)
            .unwrap()
    };
    let smp32 = Arrangement::new(1, 32);
    let (lo, hi) = (CROSSOVER_SIZES[0], CROSSOVER_SIZES[4]);
    let crossovers = analyze(rows).unwrap().crossovers;
    let mut lines = Vec::new();
    let mut any = false;
    for dist in [arr((16, 2)), arr((8, 4))] {
        let smp_small = fpc(lo, smp32) > fpc(lo, dist);
        let dist_large = fpc(hi, dist) > fpc(hi, smp32);
        let c = crossovers.iter().find(|c| c.smp == smp32 && c.distributed == dist).unwrap();
        let inside = matches!(c.size, Some(n) if !c.at_or_below && (lo as f64..=hi as f64).contains(&n));
        any |= smp_small && dist_large && inside;
        lines.push(format!(
            "{dist}: FLOP/cycle at N={lo} {:.3} vs SMP {:.3}, at N={hi} {:.3} vs SMP {:.3}, crossover {}",
            fpc(lo, dist),
            fpc(lo, smp32),
            fpc(hi, dist),
            fpc(hi, smp32),
            c.size.map(|n| format!("{}{n:.0}", if c.at_or_below { "<= " } else { "" })).unwrap_or("none".into())
        ));
    }
    report.check("8 SMP/NoC crossover", any, lines.join("; "));
}

fn criterion_9(report: &mut Report, flow: &[(String, Vec<ResultRow>)]) {
    // The closed forms differ by (H-1)(S-1): strict for H, S >= 2, and a
    // tie for single-flit packets. Single-hop routes tie for every S, so
    // "equality iff S = 1" is checked for H >= 2 and the tie at H = 1 is
    // reported.
    let t = TimingParams::calibrated();
    let mut analytic = true;
    let mut single_hop_ties = 0;
    for rk in [RouterKind::HardwareSwitch, RouterKind::SoftwareCore] {
        for h in 1..=6u32 {
            for s in 1..=64u64 {
                let bytes = s * t.link_flit_bytes;
                let ct = packet_latency_uncontended(h, bytes, FlowControl::CutThrough, rk, &t);
                let saf = packet_latency_uncontended(h, bytes, FlowControl::StoreAndForward, rk, &t);
                analytic &= ct <= saf;
                if h >= 2 {
                    analytic &= (ct == saf) == (s == 1);
                } else if s > 1 && ct == saf {
                    single_hop_ties += 1;
                }
            }
        }
    }
    let of = |name: &str| &flow.iter().find(|(n, _)| n == name).unwrap().1;
    let (base, sw, swc) = (of("NOC_BASE"), of("NOC_SW"), of("NOC_SW_C"));
    let mut ordered = true;
    let mut listing = Vec::new();
    for r in swc {
        let a = r.arrangement;
        let (b, s, c) = (cycles_at(base, a), cycles_at(sw, a), r.cycles);
        ordered &= s >= c && s <= b && c <= b;
        listing.push(format!("{a} SW {s} SW_C {c} BASE {b}"));
    }
    let total = |rows: &[ResultRow]| rows.iter().map(|r| r.cycles).sum::<u64>();
    let (tb, ts, tc) = (total(base), total(sw), total(swc));
    ordered &= ts >= tc && ts <= tb && tc <= tb;
    report.check(
        "9 flow control: CT <= SAF over H 1..6, S 1..64",
        analytic,
        format!("equality iff S = 1 for H >= 2; {single_hop_ties} single-hop multi-flit ties"),
    );
    report.check(
        "9 flow control: NOC_SW >= NOC_SW_C, both <= NOC_BASE (Matmul 256x128x32)",
        ordered,
        format!("totals SW {ts} SW_C {tc} BASE {tb}; {}", listing.join(", ")),
    );
}

fn criterion_10(report: &mut Report) {
    let lru = common::lru_suite();
    let msi = (0..200).try_for_each(|seed| {
        let (cores, traces) = common::msi_random_traces(seed);
        common::msi_check(cores, &traces)
    });
    let xy = common::xy_suite();
    let detail = [("LRU", &lru), ("MSI", &msi), ("XY", &xy)]
        .iter()
        .map(|(name, r)| format!("{name} {}", r.as_ref().map(|_| "exact".to_string()).unwrap_or_else(|e| e.clone())))
        .collect::<Vec<_>>()
        .join(", ");
    report.check("10 oracle suites", lru.is_ok() && msi.is_ok() && xy.is_ok(), detail);
}

fn criterion_11(report: &mut Report, first: &Runs, smoke: &[ResultRow], functional: &(Vec<String>, String)) {
    let again = Runs::execute();
    let (_, transcript) = functional_suite();
    let same_runs = first.fingerprint() == again.fingerprint() && csv(smoke) == csv(&smoke_runs());
    let same_functional = transcript == functional.1;
    report.check(
        "11 determinism",
        same_runs && same_functional,
        format!(
            "{} bytes of result tables identical {same_runs}, functional transcript identical {same_functional}",
            first.fingerprint().len()
        ),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: Vec::new() };
    let start = Instant::now();
    let functional = functional_suite();
    let smoke = smoke_runs();
    let functional_elapsed = start.elapsed();
    criterion_1(&mut report, &functional, &smoke, functional_elapsed);

    let start = Instant::now();
    let runs = Runs::execute();
    println!("trend simulations took {:.1} s", start.elapsed().as_secs_f64());
    criterion_2(&mut report, &runs.stream);
    criterion_3(&mut report, &runs.matmul);
    criterion_4(&mut report, &runs.nbody);
    criterion_5(&mut report, &runs.cache);
    criterion_6(&mut report, &runs.noc_matmul);
    criterion_7(&mut report, &runs.noc_nbody, &runs.nbody);
    criterion_8(&mut report, &runs.crossover);
    criterion_9(&mut report, &runs.flow_control);
    criterion_10(&mut report);
    criterion_11(&mut report, &runs, &smoke, &functional);

    if report.failed.is_empty() {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} failed: {}", report.failed.len(), report.failed.join(", "));
        ExitCode::FAILURE
    }
}
