use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedsim::attacks::AttackKind;
use fedsim::engine::{AggregatorKind, AttackConfig, FedConfig, RunOptions};
use fedsim::error::{Error, Result};
use fedsim::io::{
    execute_run, expand_sweep, export_plots, parse_config, parse_sweep, rerun_from_manifest, run_sweep,
    ExperimentManifest,
};
use fedsim::rng::Seeds;
use fedsim::verify;

#[derive(Parser)]
#[command(name = "fedsim", version, about = "Federated-learning aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Run a grid of experiments from a sweep file.
    Sweep(SweepArgs),
    /// Check the implementation against independent oracles.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collect run directories into per-figure CSV tables.
    ExportPlots {
        /// Directory holding run outputs (searched recursively).
        input: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Master seed; overrides all four seed streams.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    aggregator: Option<String>,
    /// Attack name, or `none` to disable.
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Dirichlet concentration of the data partition.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the experiment recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory; defaults to `runs/<config name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep file with `base` and `[grid]`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "runs/sweep")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

fn parse_attack(name: &str) -> Result<Option<AttackKind>> {
    match name {
        "none" => Ok(None),
        "noise" => Ok(Some(AttackKind::Noise)),
        "sign-flip" | "signflip" => Ok(Some(AttackKind::SignFlip)),
        "label-flip" | "labelflip" => Ok(Some(AttackKind::LabelFlip)),
        other => Err(Error::config("attack", format!("unknown attack `{other}`"))),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut FedConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seeds = Seeds::from_master(s);
        }
        if let Some(a) = &self.aggregator {
            cfg.aggregator.kind = AggregatorKind::parse(a)?;
        }
        if let Some(a) = &self.attack {
            cfg.attack = match parse_attack(a)? {
                None => None,
                Some(kind) => {
                    let ratio = self
                        .ratio
                        .or(cfg.attack.as_ref().map(|a| a.ratio))
                        .ok_or_else(|| Error::config("ratio", "an attack needs --ratio"))?;
                    let mut atk = cfg.attack.clone().unwrap_or_else(|| AttackConfig::new(kind, ratio));
                    atk.kind = kind;
                    atk.ratio = ratio;
                    Some(atk)
                }
            };
        } else if let Some(r) = self.ratio {
            cfg.attack
                .as_mut()
                .ok_or_else(|| Error::config("ratio", "--ratio needs an attack"))?
                .ratio = r;
        }
        if let Some(b) = self.beta {
            cfg.data.beta = b;
        }
        if let Some(t) = self.rounds {
            cfg.federation.rounds = t;
        }
        cfg.validate()
    }
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("FEDSIM_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::config("FEDSIM_THREADS", format!("`{v}` is not a positive integer"))),
        },
    }
}

fn run(args: RunArgs) -> Result<()> {
    let opts = RunOptions { threads: threads()? };
    if let Some(m) = &args.manifest {
        let out = args.out.clone().unwrap_or_else(|| m.parent().unwrap_or(Path::new(".")).join("rerun"));
        let (manifest, records) = rerun_from_manifest(m, &out, opts)?;
        report(&manifest, records.len(), &out);
        return Ok(());
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::config("config", "pass --config or --manifest"))?;
    let mut cfg = parse_config(path)?;
    args.overrides.apply(&mut cfg)?;
    let out = args.out.clone().unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    let (manifest, records) = execute_run(&cfg, &out, args.overrides.seed, opts)?;
    report(&manifest, records.len(), &out);
    Ok(())
}

fn report(m: &ExperimentManifest, rounds: usize, out: &Path) {
    println!("{}: {rounds} rounds written to {} (config {})", m.name, out.display(), &m.config_hash[..12]);
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (mut base, grid) = parse_sweep(&args.config)?;
    args.overrides.apply(&mut base)?;
    let runs = expand_sweep(&base, &grid)?;
    let labels = run_sweep(&runs, &args.out, threads()?)?;
    println!("{} runs written to {}", labels.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify { seed } => {
            let report = verify::run_all(seed);
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if report.all_passed() {
                Ok(())
            } else {
                Err(Error::Verification("one or more checks failed".into()))
            }
        }
        Command::ExportPlots { input, out } => export_plots(&input, &out).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
