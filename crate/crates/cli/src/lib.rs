//! `hardyflow` command-line driver: flat configs, CSV/SVG outputs and
//! sealed manifests that `replay` re-executes and verifies byte for byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use commands::{execute, FileDigest, Invocation};
use config::Config;
use error::{CliError, CliResult};
use manifest::{RunManifest, MANIFEST_FILE, VERSION};

pub const THREADS_VAR: &str = "HARDYFLOW_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "hardyflow",
    version,
    about = "Heat flow with an inverse-square potential on radial domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override `key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Principal eigenpair, optional mu sweep and spectrum.
    Eigen {
        #[command(flatten)]
        common: Common,
        #[arg(long = "mu-list")]
        mu_list: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Bifurcation branch from onset to `lambda-max`.
    Branch {
        #[command(flatten)]
        common: Common,
        #[arg(long = "lambda-max")]
        lambda_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long = "uniqueness-starts")]
        uniqueness_starts: Option<usize>,
    },
    /// Annulus approximations for shrinking inner radii.
    Excision {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radii: String,
        #[arg(long)]
        lambda: f64,
    },
    /// Fixed-step trajectory of the semiflow.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        phi0: String,
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long)]
        dt: f64,
    },
    /// Long-time limit classification.
    Omega {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        phi0: String,
    },
    /// Branch solutions as mu approaches mu*.
    #[command(name = "mu-limit")]
    MuLimit {
        #[command(flatten)]
        common: Common,
        #[arg(long = "mu-list")]
        mu_list: String,
        /// Fixed value, per-row list, or `onset+a,b,c`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// SVG diagram from a branch or mu-limit CSV.
    Figure {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// SVG file name inside the output directory.
        #[arg(long)]
        output: Option<String>,
        /// Onset `lambda_1`; estimated from the data when absent.
        #[arg(long)]
        onset: Option<f64>,
    },
    /// Re-execute a manifest and verify every output digest.
    Replay {
        manifest: PathBuf,
        /// Not allowed: manifests are sealed.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn absolute(p: &Path) -> String {
    std::path::absolute(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .display()
        .to_string()
}

/// `file:` initial data is pinned to an absolute path.
fn pin_phi0(spec: String) -> String {
    match spec.strip_prefix("file:") {
        Some(p) => format!("file:{}", absolute(Path::new(p))),
        None => spec,
    }
}

fn shortest(x: f64) -> String {
    format!("{x:?}")
}

struct Request {
    invocation: Invocation,
    config: Config,
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>, set: &[String]) -> CliResult<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for s in set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn request(cmd: Command) -> CliResult<Option<Request>> {
    let (inv, common) = match cmd {
        Command::Eigen { common, mu_list, k } => (
            Invocation::new("eigen")
                .with("mu-list", mu_list)
                .with("k", k.map(|k| k.to_string())),
            common,
        ),
        Command::Branch {
            common,
            lambda_max,
            steps,
            uniqueness_starts,
        } => (
            Invocation::new("branch")
                .with("lambda-max", Some(shortest(lambda_max)))
                .with("steps", Some(steps.to_string()))
                .with(
                    "uniqueness-starts",
                    uniqueness_starts.map(|n| n.to_string()),
                ),
            common,
        ),
        Command::Excision {
            common,
            radii,
            lambda,
        } => (
            Invocation::new("excision")
                .with("radii", Some(radii))
                .with("lambda", Some(shortest(lambda))),
            common,
        ),
        Command::Evolve {
            common,
            phi0,
            t_end,
            dt,
        } => (
            Invocation::new("evolve")
                .with("phi0", Some(pin_phi0(phi0)))
                .with("T", Some(shortest(t_end)))
                .with("dt", Some(shortest(dt))),
            common,
        ),
        Command::Omega { common, phi0 } => (
            Invocation::new("omega").with("phi0", Some(pin_phi0(phi0))),
            common,
        ),
        Command::MuLimit {
            common,
            mu_list,
            lambda,
        } => (
            Invocation::new("mu-limit")
                .with("mu-list", Some(mu_list))
                .with("lambda", Some(lambda)),
            common,
        ),
        Command::Figure {
            input,
            config,
            out,
            set,
            output,
            onset,
        } => {
            let cfg = load_config(config.as_deref(), &set)?;
            let inv = Invocation::new("figure")
                .with("input", Some(absolute(&input)))
                .with("output", output)
                .with("onset", onset.map(shortest));
            return Ok(Some(Request {
                invocation: inv,
                config: cfg,
                out,
            }));
        }
        Command::Replay { .. } => return Ok(None),
    };
    let cfg = load_config(Some(&common.config), &common.set)?;
    Ok(Some(Request {
        invocation: inv,
        config: cfg,
        out: common.out,
    }))
}

pub fn threads() -> CliResult<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::usage(format!(
                "{THREADS_VAR}={v:?} is not a positive integer"
            ))),
        },
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_diagnostic(dir: &Path, inv: &Invocation, err: &CliError) {
    let text = format!(
        "command: {}\nargs: {:?}\nerror: {err}\n",
        inv.command, inv.args
    );
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join("diagnostic.txt"), text);
    }
}

fn run(req: Request) -> CliResult<()> {
    let threads = threads()?;
    let dir = req
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(req.config.text("output.dir")));
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let art = match execute(&req.invocation, &req.config, threads) {
        Ok(a) => a,
        Err(e) => {
            if e.exit_code() == 1 {
                write_diagnostic(&dir, &req.invocation, &e);
            }
            return Err(e);
        }
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    for (name, bytes) in &art.files {
        write_file(&dir.join(name), bytes)?;
    }
    for line in &art.summary {
        println!("{line}");
    }
    if let Some(e) = art.failure {
        write_diagnostic(&dir, &req.invocation, &e);
        return Err(e);
    }
    let m = RunManifest {
        artifact: "hardyflow".into(),
        version: VERSION.into(),
        invocation: req.invocation,
        config: req.config.values().clone(),
        tolerances: req.config.tolerances(),
        threads,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        inputs: art.inputs.clone(),
        outputs: art.digests(),
    };
    write_file(&dir.join(MANIFEST_FILE), m.to_json().as_bytes())?;
    println!(
        "wrote {} files and {} to {}",
        m.outputs.len(),
        MANIFEST_FILE,
        dir.display()
    );
    Ok(())
}

fn on_disk(dir: &Path, recorded: &[FileDigest]) -> Vec<FileDigest> {
    recorded
        .iter()
        .filter_map(|r| {
            std::fs::read(dir.join(&r.file)).ok().map(|b| FileDigest {
                file: r.file.clone(),
                sha256: commands::digest(&b),
            })
        })
        .collect()
}

fn replay(path: &Path, set: &[String]) -> CliResult<()> {
    if !set.is_empty() {
        return Err(CliError::usage(
            "manifest is sealed: replay does not accept overrides",
        ));
    }
    let m = RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let cfg = Config::from_map(&m.config)?;
    let mut bad = manifest::compare(&m.outputs, &on_disk(dir, &m.outputs));
    let art = execute(&m.invocation, &cfg, threads()?)?;
    if let Some(e) = art.failure.as_ref() {
        return Err(CliError::Numerical(format!("replay failed: {e}")));
    }
    bad.extend(manifest::compare(&m.outputs, &art.digests()));
    bad.extend(
        manifest::compare(&m.inputs, &art.inputs)
            .into_iter()
            .map(|f| format!("input {f}")),
    );
    bad.sort();
    bad.dedup();
    if bad.is_empty() {
        println!(
            "replay ok: {} outputs reproduced bit-identically",
            m.outputs.len()
        );
        Ok(())
    } else {
        Err(CliError::Divergent(bad))
    }
}

/// Parses `args` and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Replay { manifest, set } => replay(&manifest, &set),
        cmd => request(cmd).and_then(|r| run(r.expect("non-replay request"))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hardyflow: {e}");
            e.exit_code()
        }
    }
}
