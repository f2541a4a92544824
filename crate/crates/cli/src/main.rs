#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifact;
mod commands;
mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use artifact::{sha256_hex, write_all, Manifest};
use commands::{Command, Output};
use config::{preset, ExperimentConfig, Level, PRESETS};
use error::CliError;

/// Busy-cycle area experiments for GI/GI/1 queues.
#[derive(Parser)]
#[command(name = "areatail", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate cycles and write one row per cycle plus summary statistics.
    Cycles(RunArgs),
    /// Estimate tails and overlay asymptotic curves.
    Tail(RunArgs),
    /// Fit a log-tail model to one estimated tail.
    Fit(RunArgs),
    /// Average path shape of cycles with a large area.
    Profile(ProfileArgs),
    /// Moments and tail of the integrated negative part of a risk process.
    Risk(RunArgs),
    /// Joint area tails of two servers fed by the same arrivals.
    Joint(JointArgs),
    /// Re-run a finished run from its manifest and compare every file.
    Verify(VerifyArgs),
    /// List the named presets.
    Presets,
    /// Print the resolved configuration without running anything.
    Config(RunArgs),
}

#[derive(Args, Clone)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// JSON experiment configuration.
    #[arg(long, group = "source")]
    config: Option<PathBuf>,
    /// Named preset, see `areatail presets`.
    #[arg(long, group = "source")]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding the configured count without being
    /// recorded; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; files go to `<out>/<command>/`.
    #[arg(long)]
    out: Option<String>,
    /// Number of cycles (paths for `risk`).
    #[arg(long)]
    cycles: Option<u64>,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Conditioning level, overriding the configured one.
    #[arg(long)]
    x_level: Option<f64>,
}

#[derive(Args)]
struct JointArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Service-time ratio of server one.
    #[arg(long)]
    b: Option<f64>,
    /// Level ratio of server two.
    #[arg(long)]
    a: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory holding `run.json`.
    dir: PathBuf,
    /// Worker threads for the re-run.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut c = match (&args.source.config, &args.source.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ExperimentConfig::from_json(&text).map_err(|e| CliError::ConfigParse(e.to_string()))?
        }
        (None, Some(name)) => preset(name).ok_or_else(|| CliError::UnknownPreset(name.clone()))?,
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(s) = args.seed {
        c.master_seed = s;
    }
    if let Some(o) = &args.out {
        c.out = o.clone();
    }
    if let Some(n) = args.cycles {
        c.n_cycles = n;
    }
    Ok(c)
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs on a pool of `workers` threads, falling back to the configured count.
fn execute(command: Command, config: &ExperimentConfig, workers: Option<usize>) -> Result<Output, CliError> {
    in_pool(workers.or(config.workers), || commands::run(command, config))?
}

fn run_and_write(command: Command, config: ExperimentConfig, workers: Option<usize>) -> Result<(), CliError> {
    let output = execute(command, &config, workers)?;
    let dir = Path::new(&config.out).join(command.name());
    write_all(&dir, command.name(), &config, &output.artifacts)?;
    for line in &output.report {
        println!("{line}");
    }
    for a in &output.artifacts {
        println!("wrote {}", dir.join(&a.name).display());
    }
    Ok(())
}

/// Returns whether every file matched.
fn verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let manifest = Manifest::load(&args.dir)?;
    let command = Command::from_name(&manifest.command)
        .ok_or_else(|| CliError::Manifest(format!("unknown command {:?}", manifest.command)))?;
    let fresh = execute(command, &manifest.config, args.workers)?;
    let mut all = fresh.artifacts.len() == manifest.files.len();
    let mut files = Vec::new();
    for entry in &manifest.files {
        let rerun = fresh
            .artifacts
            .iter()
            .find(|a| a.name == entry.name)
            .map(|a| sha256_hex(&a.bytes));
        let on_disk = fs::read(args.dir.join(&entry.name)).ok().map(|b| sha256_hex(&b));
        let ok = rerun.as_deref() == Some(entry.sha256.as_str()) && on_disk.as_deref() == Some(entry.sha256.as_str());
        all &= ok;
        files.push(json!({
            "name": entry.name,
            "expected": entry.sha256,
            "rerun": rerun,
            "on_disk": on_disk,
            "match": ok,
        }));
    }
    let report = json!({
        "verified": all,
        "command": manifest.command,
        "recorded_version": manifest.version,
        "version": artifact::VERSION,
        "files": files,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json serializes"));
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::Cycles(a) => load(&a).and_then(|c| run_and_write(Command::Cycles, c, a.workers)),
        Sub::Tail(a) => load(&a).and_then(|c| run_and_write(Command::Tail, c, a.workers)),
        Sub::Fit(a) => load(&a).and_then(|c| run_and_write(Command::Fit, c, a.workers)),
        Sub::Risk(a) => load(&a).and_then(|c| run_and_write(Command::Risk, c, a.workers)),
        Sub::Profile(a) => load(&a.run).and_then(|mut c| {
            if let Some(p) = c.profile.as_mut() {
                if let Some(x) = a.x_level {
                    p.level = Level::Value { x };
                }
                if a.run.cycles.is_some() {
                    p.n_cycles = None;
                }
            }
            run_and_write(Command::Profile, c, a.run.workers)
        }),
        Sub::Joint(a) => load(&a.run).and_then(|mut c| {
            if let Some(j) = c.joint.as_mut() {
                j.b = a.b.unwrap_or(j.b);
                j.a = a.a.unwrap_or(j.a);
            }
            run_and_write(Command::Joint, c, a.run.workers)
        }),
        Sub::Verify(a) => match verify(&a) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Sub::Presets => {
            for p in PRESETS {
                println!("{}\n    {}", p.name, p.claim);
            }
            Ok(())
        }
        Sub::Config(a) => load(&a).map(|c| println!("{}", c.to_json())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
