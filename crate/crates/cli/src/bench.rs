//! Benchmark harness: runs × instances solves, per-run CSV rows, aggregate
//! Best/Avg gap tables and per-second gap curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use unics::cascade::solve;
use unics::instance::{parse_tsplib, TspInstance};
use unics::transition::{gap_curve, ConvergenceTrace, GapSampling};

use crate::args::SolverArgs;
use crate::error::CliError;

pub const CSV_HEADER: [&str; 9] = ["instance", "n", "run", "seed", "length", "bks", "gap", "t_trans", "wall_s"];

/// Seed spacing between consecutive runs of the same instance.
pub const SEED_STRIDE: u64 = 60;

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub bks: Option<i64>,
    /// Benchmark group for the aggregate table (default "all").
    #[serde(default)]
    pub group: Option<String>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

pub fn load_instance(path: &Path) -> Result<TspInstance, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse_tsplib(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn relative_gap(length: i64, bks: i64) -> f64 {
    (length - bks) as f64 / bks as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    pub length: i64,
    pub bks: Option<i64>,
    pub gap: Option<f64>,
    pub new_best: bool,
    pub t_trans: f64,
    pub wall_s: f64,
    pub trace: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub instance: String,
    pub group: String,
    pub n: usize,
    pub runs: usize,
    pub bks: Option<i64>,
    pub best_length: i64,
    pub avg_length: f64,
    pub best_gap: Option<f64>,
    pub avg_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub instances: usize,
    pub best_gap: Option<f64>,
    pub avg_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub instance: String,
    pub run: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub runs: Vec<RunRecord>,
    pub instances: Vec<InstanceSummary>,
    pub groups: Vec<GroupSummary>,
    pub failures: Vec<Failure>,
}

struct Loaded {
    name: String,
    group: String,
    bks: Option<i64>,
    inst: TspInstance,
}

fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("UNICS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn min_f(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::min)
}

/// Run the benchmark and write `runs.csv`, `report.json`, `gap_curves.csv`
/// and one trace per run under `out`.
pub fn run_bench(
    entries: &[ManifestEntry],
    solver: &SolverArgs,
    runs: usize,
    base_seed: u64,
    out: &Path,
) -> Result<BenchReport, CliError> {
    // Surface configuration mistakes once, before any work.
    solver.config(base_seed)?;
    let io = |e: std::io::Error| CliError::Other(format!("{}: {e}", out.display()));
    fs::create_dir_all(out.join("traces")).map_err(io)?;

    let mut failures = Vec::new();
    let mut loaded = Vec::new();
    for e in entries {
        let label = e.path.file_stem().map_or_else(|| e.path.display().to_string(), |s| s.to_string_lossy().into_owned());
        match load_instance(&e.path) {
            Ok(inst) => loaded.push(Loaded {
                name: if inst.name().is_empty() { label } else { inst.name().to_string() },
                group: e.group.clone().unwrap_or_else(|| "all".into()),
                bks: e.bks,
                inst,
            }),
            Err(err) => {
                log::error!("{err}");
                failures.push(Failure {
                    instance: label,
                    run: None,
                    error: err.to_string(),
                });
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..loaded.len()).flat_map(|i| (0..runs).map(move |r| (i, r))).collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..worker_count(jobs.len()) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, run)) = jobs.get(j) else { break };
                let seed = base_seed + SEED_STRIDE * run as u64;
                let outcome = solver
                    .config(seed)
                    .and_then(|cfg| solve(&loaded[i].inst, &cfg).map_err(|e| CliError::Config(e.to_string())));
                results.lock().expect("no worker panicked").push((i, run, seed, outcome));
            });
        }
    });
    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|r| (r.0, r.1));

    let mut records = Vec::new();
    let mut traces: Vec<(usize, usize, ConvergenceTrace)> = Vec::new();
    for (i, run, seed, outcome) in results {
        let item = &loaded[i];
        match outcome {
            Ok((tour, trace, report)) => {
                let file = format!("{}_run{}.jsonl", item.name, run);
                fs::write(out.join("traces").join(&file), trace.to_json_lines()).map_err(io)?;
                let gap = item.bks.map(|b| relative_gap(tour.len(), b));
                records.push(RunRecord {
                    instance: item.name.clone(),
                    n: item.inst.n(),
                    run,
                    seed,
                    length: tour.len(),
                    bks: item.bks,
                    gap,
                    new_best: item.bks.is_some_and(|b| tour.len() < b),
                    t_trans: report.t_trans,
                    wall_s: report.wall_s,
                    trace: format!("traces/{file}"),
                });
                traces.push((i, run, trace));
            }
            Err(err) => {
                log::error!("{} run {run}: {err}", item.name);
                failures.push(Failure {
                    instance: item.name.clone(),
                    run: Some(run),
                    error: err.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        return Err(CliError::Other("every benchmark run failed".into()));
    }

    write_runs_csv(&out.join("runs.csv"), &records)?;
    write_gap_curves(&out.join("gap_curves.csv"), &loaded, &records, &traces, solver.t_max)?;

    let mut instances = Vec::new();
    for (i, item) in loaded.iter().enumerate() {
        let rows: Vec<&RunRecord> = records.iter().filter(|r| r.instance == item.name && traces.iter().any(|t| t.0 == i)).collect();
        if rows.is_empty() {
            continue;
        }
        let lengths: Vec<f64> = rows.iter().map(|r| r.length as f64).collect();
        let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
        instances.push(InstanceSummary {
            instance: item.name.clone(),
            group: item.group.clone(),
            n: item.inst.n(),
            runs: rows.len(),
            bks: item.bks,
            best_length: rows.iter().map(|r| r.length).min().expect("non-empty"),
            avg_length: mean(&lengths).expect("non-empty"),
            best_gap: min_f(&gaps),
            avg_gap: mean(&gaps),
        });
    }
    let mut by_group: BTreeMap<&str, Vec<&InstanceSummary>> = BTreeMap::new();
    for s in &instances {
        by_group.entry(&s.group).or_default().push(s);
    }
    let groups = by_group
        .into_iter()
        .map(|(g, members)| {
            let best: Vec<f64> = members.iter().filter_map(|s| s.best_gap).collect();
            let avg: Vec<f64> = members.iter().filter_map(|s| s.avg_gap).collect();
            GroupSummary {
                group: g.to_string(),
                instances: members.len(),
                best_gap: mean(&best),
                avg_gap: mean(&avg),
            }
        })
        .collect();

    let report = BenchReport {
        runs: records,
        instances,
        groups,
        failures,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(out.join("report.json"), json).map_err(io)?;
    Ok(report)
}

fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Other(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.instance.clone(),
            r.n.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.length.to_string(),
            r.bks.map_or_else(String::new, |b| b.to_string()),
            r.gap.map_or_else(String::new, |g| g.to_string()),
            r.t_trans.to_string(),
            format!("{:.3}", r.wall_s),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

/// Per-second gap of every run against the BKS, or against the best length
/// over all runs of the instance when no BKS is known.
fn write_gap_curves(
    path: &Path,
    loaded: &[Loaded],
    records: &[RunRecord],
    traces: &[(usize, usize, ConvergenceTrace)],
    t_max: f64,
) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Other(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["instance", "run", "t", "gap"]).map_err(err)?;
    for (i, run, trace) in traces {
        let item = &loaded[*i];
        let reference = item.bks.unwrap_or_else(|| {
            records
                .iter()
                .filter(|r| r.instance == item.name)
                .map(|r| r.length)
                .min()
                .expect("instance has runs")
        });
        let sampling = GapSampling::per_second(t_max);
        let Ok(curve) = gap_curve(trace, reference, sampling) else { continue };
        for (k, g) in curve.iter().enumerate() {
            let t = sampling.interval * (k + 1) as f64;
            w.write_record([item.name.clone(), run.to_string(), t.to_string(), g.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}
