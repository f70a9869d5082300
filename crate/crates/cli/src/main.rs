//! `colombeau-lab`: run one experiment from a JSON config and stamp its outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use colombeau_lab::config::RunConfig;
use colombeau_lab::run;

#[derive(Parser)]
#[command(name = "colombeau-lab", version, about = "Numerical experiments on Colombeau generalized functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; falls back to COLOMBEAU_LAB_THREADS.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Number of dyadic ε levels, counted from the config's `j_min`.
    #[arg(long, global = true, value_name = "J")]
    eps_levels: Option<i32>,
    /// Cell side of the spatial estimators.
    #[arg(long, global = true, value_name = "H")]
    resolution: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Classify generalized numbers by their ε-asymptotics.
    Classify,
    /// Estimate a generalized graph.
    Graph,
    /// Estimate a wavefront set.
    Wavefront,
    /// Estimate `D_f` for a generalized map.
    Pullback,
    /// Check the stationary-phase bound.
    Statphase,
    /// Transport equation with a discontinuous coefficient.
    HurdSattinger,
    /// Product of two crossing mollified lines.
    Multiply,
    /// Pullback inclusion for the crossing-lines product.
    CheckTheorem,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Classify => "classify",
            Self::Graph => "graph",
            Self::Wavefront => "wavefront",
            Self::Pullback => "pullback",
            Self::Statphase => "statphase",
            Self::HurdSattinger => "hurd-sattinger",
            Self::Multiply => "multiply",
            Self::CheckTheorem => "check-theorem",
        }
    }
}

#[derive(Serialize)]
struct FileDigest {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Stage {
    name: String,
    seconds: f64,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config: &'a RunConfig,
    verdict: Option<&'static str>,
    timings: Vec<Stage>,
    files: Vec<FileDigest>,
}

fn load(cli: &Cli, name: &str) -> Result<RunConfig, String> {
    let path = cli.config.as_ref().ok_or("--config PATH is required")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(j) = cli.eps_levels {
        if j < 1 {
            return Err(format!("--eps-levels must be at least 1, got {j}"));
        }
        cfg.eps.j_max = cfg.eps.j_min + j - 1;
    }
    if let Some(h) = cli.resolution {
        cfg.resolution = Some(h);
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate(name)?;
    Ok(cfg)
}

fn threads(cli: &Cli) -> Result<Option<usize>, String> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("COLOMBEAU_LAB_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("COLOMBEAU_LAB_THREADS must be a count, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn write_outputs(dir: &Path, name: &'static str, cfg: &RunConfig, outcome: &run::Outcome) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut files = Vec::new();
    for (file, bytes) in &outcome.files {
        let path = dir.join(file);
        std::fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        files.push(FileDigest { name: file.clone(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
    }
    let manifest = RunManifest {
        tool: "colombeau-lab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        config: cfg,
        verdict: outcome.verdict.map(|p| if p { "PASS" } else { "FAIL" }),
        timings: outcome.stages.iter().map(|(n, s)| Stage { name: n.clone(), seconds: *s }).collect(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn execute(cli: &Cli) -> Result<Option<bool>, String> {
    let name = cli.command.name();
    let cfg = load(cli, name)?;
    if let Some(n) = threads(cli)? {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let outcome = run::dispatch(name, &cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("colombeau-out").join(name));
    write_outputs(&dir, name, &cfg, &outcome)?;
    let label = outcome.verdict.map_or("DONE", |p| if p { "PASS" } else { "FAIL" });
    println!("{name}: {label} ({} files in {})", outcome.files.len() + 1, dir.display());
    Ok(outcome.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Some(false)) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
