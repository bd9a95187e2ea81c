mod args;
mod bench;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use unics::cascade::solve;
use unics::instance::{Metric, TspInstance};
use unics::transition::{collect_policy_samples, fit_policy, PolicyInstance, TransitionError};

use args::{read_policy, SolverArgs};
use bench::{load_instance, read_manifest, relative_gap, run_bench};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "unics", version, about = "Cascaded local-search / EAX solver for Euclidean TSP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one TSPLIB instance and print a JSON summary.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Best-known length, to report the relative gap.
        #[arg(long)]
        bks: Option<i64>,
        /// Write the convergence trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the tour, one 1-based node id per line.
        #[arg(long)]
        tour: Option<PathBuf>,
    },
    /// Run every manifest instance several times and write gap tables.
    Bench {
        manifest: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Seed of the first run; run k uses seed + 60k.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Generate uniform random instances (unit square scaled by 10^6).
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the size → transition-time policy from grid runs.
    FitPolicy {
        manifest: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Transition times to try, in seconds.
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Gap sampling interval in seconds.
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
        /// Fit from a CSV of `n,t_trans` rows instead of running the solver.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value = "policy.txt")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("unics: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve {
            instance,
            solver,
            seed,
            bks,
            trace,
            tour,
        } => cmd_solve(&instance, &solver, seed, bks, trace.as_deref(), tour.as_deref()),
        Command::Bench {
            manifest,
            solver,
            runs,
            seed,
            out,
        } => {
            if runs == 0 {
                return Err(CliError::Config("--runs must be at least 1".into()));
            }
            let entries = read_manifest(&manifest)?;
            let report = run_bench(&entries, &solver, runs, seed, &out)?;
            for s in &report.instances {
                let pct = |g: Option<f64>| g.map_or_else(|| "-".into(), |g| format!("{:.3}%", 100.0 * g));
                println!(
                    "{:<24} n={:<7} best={:<12} avg={:<14.1} best_gap={:<9} avg_gap={}",
                    s.instance,
                    s.n,
                    s.best_length,
                    s.avg_length,
                    pct(s.best_gap),
                    pct(s.avg_gap)
                );
            }
            for f in &report.failures {
                eprintln!("failed: {} {:?}: {}", f.instance, f.run, f.error);
            }
            Ok(())
        }
        Command::Gen { n, count, seed, out } => cmd_gen(n, count, seed, &out),
        Command::FitPolicy {
            manifest,
            solver,
            grid,
            seed,
            interval,
            samples,
            out,
        } => cmd_fit_policy(&manifest, &solver, &grid, seed, interval, samples.as_deref(), &out),
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    name: &'a str,
    n: usize,
    length: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    t_trans: f64,
    seed: u64,
    wall_s: f64,
}

fn cmd_solve(
    path: &Path,
    solver: &SolverArgs,
    seed: u64,
    bks: Option<i64>,
    trace_out: Option<&Path>,
    tour_out: Option<&Path>,
) -> Result<(), CliError> {
    let inst = load_instance(path)?;
    let cfg = solver.config(seed)?;
    let (tour, trace, report) = solve(&inst, &cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let write = |p: &Path, text: String| fs::write(p, text).map_err(|e| CliError::Other(format!("{}: {e}", p.display())));
    if let Some(p) = trace_out {
        write(p, trace.to_json_lines())?;
    }
    if let Some(p) = tour_out {
        let text: String = tour.order().iter().map(|v| format!("{}\n", v + 1)).collect();
        write(p, text)?;
    }
    let summary = SolveSummary {
        name: inst.name(),
        n: inst.n(),
        length: tour.len(),
        gap: bks.map(|b| relative_gap(tour.len(), b)),
        t_trans: report.t_trans,
        seed,
        wall_s: report.wall_s,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn cmd_gen(n: usize, count: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if n < 3 {
        return Err(CliError::Config(format!("n must be at least 3, got {n}")));
    }
    fs::create_dir_all(out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let coords = (0..n)
            .map(|_| ((rng.gen::<f64>() * 1e6).floor(), (rng.gen::<f64>() * 1e6).floor()))
            .collect();
        let name = format!("uniform{n}_s{seed}_{i}");
        let inst = TspInstance::new(&name, coords, Metric::Euc2d).map_err(|e| CliError::Other(e.to_string()))?;
        let path = out.join(format!("{name}.tsp"));
        fs::write(&path, inst.to_tsplib()).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let err = |e: csv::Error| CliError::Parse(format!("{}: {e}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(err)?;
    let mut samples = Vec::new();
    for rec in r.deserialize::<(usize, f64)>() {
        samples.push(rec.map_err(err)?);
    }
    Ok(samples)
}

fn cmd_fit_policy(
    manifest: &Path,
    solver: &SolverArgs,
    grid: &[f64],
    seed: u64,
    interval: f64,
    samples_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let samples = match samples_path {
        Some(p) => read_samples(p)?,
        None => {
            let entries = read_manifest(manifest)?;
            let mut items = Vec::with_capacity(entries.len());
            for e in &entries {
                let inst = load_instance(&e.path)?;
                items.push(PolicyInstance {
                    n: inst.n(),
                    bks: e.bks,
                    instance: inst,
                });
            }
            let mut sizes: Vec<usize> = items.iter().map(|i| i.n).collect();
            sizes.sort_unstable();
            sizes.dedup();
            if sizes.len() < 2 {
                return Err(CliError::DegenerateSamples(format!(
                    "manifest covers {} distinct instance size(s), need at least 2",
                    sizes.len()
                )));
            }
            solver.config(seed)?;
            collect_policy_samples(&items, grid, solver.t_max, interval, |inst, t| {
                let mut s = solver.clone();
                s.t_trans = Some(t);
                let cfg = s.config(seed)?;
                let (_, trace, _) = solve(inst, &cfg).map_err(|e| CliError::Config(e.to_string()))?;
                log::info!("{} t_trans={t}: {:?}", inst.name(), trace.best());
                Ok::<_, CliError>(trace)
            })
            .map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    for (n, t) in &samples {
        println!("sample n={n} t_trans={t}");
    }
    let mut policy = fit_policy(&samples).map_err(|e| match e {
        TransitionError::DegenerateSamples => CliError::DegenerateSamples(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    if let Some(p) = &solver.policy {
        // Keep the clamps of an existing policy file.
        let old = read_policy(p)?;
        policy.clamp_min = old.clamp_min;
        policy.clamp_fraction = old.clamp_fraction;
    }
    println!("a={} b={}", policy.slope, policy.intercept);
    fs::write(out, format!("{policy}\n")).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    Ok(())
}
