//! Command-line entry point: binds JSON run configs to the simulation,
//! condition-checking, generator and ergodicity experiments, with
//! reproducible manifests.
//!
//! Exit codes: 0 success, 2 validation error (config parse or invariant),
//! 3 inconclusive condition verdict under `--strict`, 1 numerical defect
//! or I/O failure.

mod config;
mod output;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{load_config, Manifest, RunConfig};
use mucogarch_core::seeding::child_seed;
use output::{flatten_scalars, write_atomic};
use tasks::execute;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "mucogarch",
    about = "Exact simulation and ergodicity diagnostics for the MUCOGARCH(1,1) volatility process",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Path to a run config or a previously written manifest.json.
    #[arg(long)]
    config: PathBuf,
    /// Override the task seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "mucogarch-out")]
    out: PathBuf,
    /// Exit with code 3 when a condition verdict is inconclusive.
    #[arg(long)]
    strict: bool,
    /// Worker threads (results are identical for any value).
    #[arg(long)]
    threads: Option<usize>,
    /// Config overrides as dotted.path=json-value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one volatility path and log the full event skeleton.
    Simulate(RunArgs),
    /// Evaluate stationarity / moment / ergodicity conditions.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Override task.p.
        #[arg(long)]
        p: Option<f64>,
        /// Override task.k.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Extended-generator evaluations, drift scans and moment bounds.
    Generator(RunArgs),
    /// Ergodicity experiments.
    Ergolab {
        #[command(subcommand)]
        sub: ErgolabCmd,
    },
    /// Re-run a config across values of one numeric field.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted config path to sweep, e.g. noise.rate or task.p.
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values.
        #[arg(long)]
        values: String,
    },
}

#[derive(Subcommand)]
enum ErgolabCmd {
    /// Synchronous-coupling decay fit.
    Coupling(RunArgs),
    /// Long-run stationary moment estimate.
    Moments(RunArgs),
    /// Multi-start convergence of terminal-time laws.
    Multistart(RunArgs),
    /// Full-rank frequency of the jump-accumulated state.
    RankProbe {
        #[command(flatten)]
        run: RunArgs,
        /// Override task.l (number of jumps).
        #[arg(long)]
        l: Option<usize>,
    },
    /// No-jump flow contraction constants and return-time bound.
    Aperiodicity(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(CliError::Validation(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical defect: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Io(m)) => {
            eprintln!("io error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate(run) => single_run(run, &["simulate"], vec![]),
        Command::Check { run, p, k } => {
            let mut extra = Vec::new();
            if let Some(p) = p {
                extra.push(("task.p".to_string(), p.to_string()));
            }
            if let Some(k) = k {
                extra.push(("task.k".to_string(), k.to_string()));
            }
            single_run(run, &["check"], extra)
        }
        Command::Generator(run) => single_run(
            run,
            &[
                "generator_evaluate",
                "generator_dynkin",
                "generator_foster_scan",
                "generator_gronwall",
            ],
            vec![],
        ),
        Command::Ergolab { sub } => match sub {
            ErgolabCmd::Coupling(run) => single_run(run, &["coupling"], vec![]),
            ErgolabCmd::Moments(run) => single_run(run, &["moments"], vec![]),
            ErgolabCmd::Multistart(run) => single_run(run, &["multistart"], vec![]),
            ErgolabCmd::RankProbe { run, l } => {
                let mut extra = Vec::new();
                if let Some(l) = l {
                    extra.push(("task.l".to_string(), l.to_string()));
                }
                single_run(run, &["rank_probe"], extra)
            }
            ErgolabCmd::Aperiodicity(run) => single_run(run, &["aperiodicity"], vec![]),
        },
        Command::Sweep { run, axis, values } => sweep_run(run, axis, values),
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // ignore the error if a pool already exists (tests call twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn parse_overrides(args: &RunArgs) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("--set expects KEY=VALUE, got '{s}'"))
        })?;
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn load_run_config(
    args: &RunArgs,
    allowed_tasks: &[&str],
    extra_overrides: Vec<(String, String)>,
) -> Result<RunConfig, CliError> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", args.config.display())))?;
    let mut overrides = parse_overrides(args)?;
    overrides.extend(extra_overrides);
    let mut cfg = load_config(&raw, &overrides)?;
    if let Some(seed) = args.seed {
        cfg.task.set_seed(seed);
    }
    if !allowed_tasks.is_empty() && !allowed_tasks.contains(&cfg.task.type_name()) {
        return Err(CliError::Validation(format!(
            "task type '{}' does not match this subcommand (expected one of {:?})",
            cfg.task.type_name(),
            allowed_tasks
        )));
    }
    Ok(cfg)
}

fn write_run_artifacts(dir: &Path, cfg: &RunConfig, out: &tasks::TaskOutput) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest::for_config(cfg.clone());
    write_atomic(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    write_atomic(
        &dir.join("results.json"),
        &serde_json::to_string_pretty(&out.results).expect("results serialize"),
    )?;
    for (name, content) in &out.files {
        write_atomic(&dir.join(name), content)?;
    }
    Ok(())
}

fn single_run(
    args: RunArgs,
    allowed_tasks: &[&str],
    extra_overrides: Vec<(String, String)>,
) -> Result<ExitCode, CliError> {
    init_threads(args.threads);
    let cfg = load_run_config(&args, allowed_tasks, extra_overrides)?;
    let out = execute(&cfg)?;
    write_run_artifacts(&args.out, &cfg, &out)?;
    println!(
        "{}: wrote {}",
        cfg.task.type_name(),
        args.out.join("results.json").display()
    );
    if args.strict && out.inconclusive {
        eprintln!("strict mode: at least one condition verdict is inconclusive");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_run(args: RunArgs, axis: String, values: String) -> Result<ExitCode, CliError> {
    init_threads(args.threads);
    let values: Vec<f64> = values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad sweep value '{s}': {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }

    // base config determines the seed namespace for the per-value runs
    let base = load_run_config(&args, &[], vec![])?;
    let base_seed = args.seed.or(base.task.seed()).unwrap_or(0);

    fs::create_dir_all(&args.out)?;
    let mut any_inconclusive = false;
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let extra = vec![(axis.clone(), v.to_string())];
        let mut cfg = load_run_config(&args, &[], extra)?;
        cfg.task.set_seed(child_seed(base_seed, "sweep", i as u64));
        let out = execute(&cfg)?;
        any_inconclusive |= out.inconclusive;

        let dir = args.out.join(format!("sweep_{i:03}"));
        write_run_artifacts(&dir, &cfg, &out)?;

        let mut flat = Vec::new();
        flatten_scalars(&out.results, "", 3, &mut flat);
        flat.sort();
        if columns.is_empty() {
            columns = flat.iter().map(|(k, _)| k.clone()).collect();
        }
        let mut row = vec![v.to_string()];
        for c in &columns {
            row.push(
                flat.iter()
                    .find(|(k, _)| k == c)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default(),
            );
        }
        rows.push(row);
    }

    let mut csv = String::from("value");
    for c in &columns {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_atomic(&args.out.join("combined.csv"), &csv)?;
    write_atomic(
        &args.out.join("sweep.json"),
        &serde_json::to_string_pretty(&serde_json::json!({
            "axis": axis,
            "values": values,
            "base_seed": base_seed,
        }))
        .expect("serializes"),
    )?;
    println!("sweep: wrote {}", args.out.join("combined.csv").display());
    if args.strict && any_inconclusive {
        eprintln!("strict mode: at least one condition verdict is inconclusive");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
