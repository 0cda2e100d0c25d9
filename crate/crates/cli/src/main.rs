use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use nlh_core::harness::config::{ExperimentKind, LoadedConfig};
use nlh_core::harness::criteria::{self, Context};
use nlh_core::harness::run::{self, RunManifest};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

mod bundled;

#[derive(Parser)]
#[command(name = "nlh", version, about = "Experiments for nonlocal evolution equations with rough kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file; defaults to the bundled config of the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a bundled config (see `nlh configs`).
    #[arg(long, conflicts_with = "config")]
    bundled: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "NLH_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the kernel conditions and write a condition report.
    CheckKernel(Common),
    /// Apply the operator to the initial datum.
    OperatorTest(Common),
    /// Explicit solve of the linear equation.
    SolveLinear(Common),
    /// Explicit solve of the nonlinear equation and induced-kernel certificate.
    SolveNonlinear(Common),
    /// Fit the class constants on a double-bump ensemble.
    Calibrate(Common),
    /// Track ensemble members against the scheduled envelope.
    TrackEvolution {
        #[command(flatten)]
        common: Common,
        /// Constants file written by `calibrate`; overrides the config.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Holder persistence across horizons.
    VerifyEstimates(Common),
    /// One acceptance criterion.
    Criterion {
        #[command(flatten)]
        common: Common,
        id: Option<u8>,
    },
    /// All acceptance criteria, one line each.
    VerifyAll {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "NLH_THREADS")]
        threads: Option<usize>,
    },
    /// List the bundled configs, or print one.
    Configs { name: Option<String> },
}

fn threads(n: Option<usize>) {
    if let Some(n) = n {
        nlh_core::exec::set_threads(n);
    }
}

fn load(common: &Common, kind: ExperimentKind, default: &str) -> Result<LoadedConfig> {
    let cfg = match (&common.config, &common.bundled) {
        (Some(p), _) => LoadedConfig::from_path(p).with_context(|| format!("loading {}", p.display()))?,
        (None, name) => {
            let name = name.as_deref().unwrap_or(default);
            let src = bundled::get(name).with_context(|| format!("no bundled config {name:?}; see `nlh configs`"))?;
            LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from("."))?
        }
    };
    if cfg.config.experiment != kind {
        bail!("config is a {:?} experiment, not {:?}", cfg.config.experiment, kind);
    }
    Ok(cfg)
}

fn execute(cfg: &LoadedConfig, common: &Common) -> Result<bool> {
    threads(common.threads);
    let out = run::output_dir(cfg, common.out.as_deref());
    let m = run::run(cfg, &out, common.seed)?;
    print_manifest(&m, &out);
    Ok(m.pass)
}

fn print_manifest(m: &RunManifest, out: &Path) {
    for s in &m.summary {
        println!("{s}");
    }
    println!("{} in {:.1} s; {} files under {}", if m.pass { "PASS" } else { "FAIL" }, m.wall_time, m.files.len(), out.display());
}

#[derive(Serialize)]
struct VerifyAllManifest {
    version: &'static str,
    config_hashes: Vec<(String, String)>,
    seed: u64,
    wall_time: f64,
    pass: bool,
    criteria: Vec<criteria::CriterionOutcome>,
}

fn verify_all(out: Option<PathBuf>, seed: Option<u64>) -> Result<bool> {
    let t0 = Instant::now();
    let out = out.unwrap_or_else(|| PathBuf::from("nlh-out/verify-all"));
    std::fs::create_dir_all(&out)?;
    let mut hashes = Vec::new();
    let mut seeds = Vec::new();
    for id in 1..=10u8 {
        let name = format!("criterion-{id}");
        let src = bundled::get(&name).with_context(|| format!("missing bundled {name}"))?;
        let cfg = LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from("."))?;
        if cfg.config.criterion != Some(id) {
            bail!("bundled {name} names criterion {:?}", cfg.config.criterion);
        }
        seeds.push(cfg.seed());
        hashes.push((name, cfg.hash));
    }
    let seed = seed.unwrap_or(seeds[0]);
    let ctx = Context { out: Some(out.clone()), seed };
    let outcomes = criteria::run_all(&ctx, |o| println!("{}", o.line()));
    let pass = outcomes.iter().all(|o| o.pass);
    let m = VerifyAllManifest { version: run::ARTIFACT_VERSION, config_hashes: hashes, seed, wall_time: t0.elapsed().as_secs_f64(), pass, criteria: outcomes };
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&m)?)?;
    println!("{}/10 criteria pass in {:.1} s", m.criteria.iter().filter(|o| o.pass).count(), m.wall_time);
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::CheckKernel(c) => load(&c, ExperimentKind::CheckKernel, "check-kernel").and_then(|cfg| execute(&cfg, &c)),
        Command::OperatorTest(c) => load(&c, ExperimentKind::OperatorTest, "operator-test").and_then(|cfg| execute(&cfg, &c)),
        Command::SolveLinear(c) => load(&c, ExperimentKind::SolveLinear, "solve-linear").and_then(|cfg| execute(&cfg, &c)),
        Command::SolveNonlinear(c) => load(&c, ExperimentKind::SolveNonlinear, "solve-nonlinear").and_then(|cfg| execute(&cfg, &c)),
        Command::Calibrate(c) => load(&c, ExperimentKind::Calibrate, "calibrate").and_then(|cfg| execute(&cfg, &c)),
        Command::TrackEvolution { common, constants } => load(&common, ExperimentKind::TrackEvolution, "track-evolution").and_then(|mut cfg| {
            if let Some(p) = constants {
                cfg.config.constants_file = Some(std::path::absolute(&p)?);
                cfg.validate()?;
            }
            execute(&cfg, &common)
        }),
        Command::VerifyEstimates(c) => load(&c, ExperimentKind::VerifyEstimates, "verify-estimates").and_then(|cfg| execute(&cfg, &c)),
        Command::Criterion { common, id } => {
            let default = format!("criterion-{}", id.unwrap_or(1));
            load(&common, ExperimentKind::Criterion, &default).and_then(|mut cfg| {
                if let Some(id) = id {
                    cfg.config.criterion = Some(id);
                    cfg.validate()?;
                }
                execute(&cfg, &common)
            })
        }
        Command::VerifyAll { out, seed, threads: t } => {
            threads(t);
            verify_all(out, seed)
        }
        Command::Configs { name: None } => {
            for (n, _) in bundled::ALL {
                println!("{n}");
            }
            Ok(true)
        }
        Command::Configs { name: Some(n) } => match bundled::get(&n) {
            Some(s) => {
                print!("{s}");
                Ok(true)
            }
            None => Err(anyhow::anyhow!("no bundled config {n:?}")),
        },
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
