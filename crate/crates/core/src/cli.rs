//! Command-line driver: runs the reference solvers and the trajectory
//! ensemble for one model and writes CSV series plus a run manifest.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::file::{ModelFile, JAYNES_CUMMINGS};
use crate::model::jc_rate_integrals;
use crate::solver::{solve_extended, solve_tcl, write_extended_csv, write_tcl_csv, SolveOptions};
use crate::trajectory::{run_ensemble, write_estimate_csv, EnsembleConfig, TrajectoryOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const MANIFEST: &str = "manifest.json";
pub const TCL_CSV: &str = "tcl.csv";
pub const EMBEDDED_CSV: &str = "embedded.csv";
pub const MC_CSV: &str = "mc_estimate.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Tcl,
    Embedded,
    Trajectories,
    All,
}

impl Mode {
    fn tcl(self) -> bool {
        matches!(self, Mode::Tcl | Mode::All)
    }

    fn embedded(self) -> bool {
        matches!(self, Mode::Embedded | Mode::All)
    }

    fn trajectories(self) -> bool {
        matches!(self, Mode::Trajectories | Mode::All)
    }
}

#[derive(Debug, Parser)]
#[command(name = "nmqj", version, about = "Quantum jumps for time-local non-Markovian master equations")]
pub struct Cli {
    /// `jc` / `jaynes_cummings`, or a path to a JSON model file
    #[arg(long, default_value = JAYNES_CUMMINGS)]
    pub model: String,
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long = "t-end", default_value_t = 3.0)]
    pub t_end: f64,
    /// Output grid points on `[0, t_end]`
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 100_000)]
    pub ntraj: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Local error target of every integrator
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Worker threads (defaults to available cores); never changes results
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Re-run the configuration stored in a manifest; only `--out` and
    /// `--workers` are taken from the command line
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

/// Complete description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// The resolved model, embedded so a manifest is self-contained.
    pub model: ModelFile,
    /// Where the model came from (informational).
    pub model_source: String,
    pub t_end: f64,
    pub n_points: usize,
    pub ntraj: usize,
    pub seed: u64,
    pub tol: f64,
    pub workers: usize,
    pub mode: Mode,
    pub out: PathBuf,
}

/// The part of the configuration that determines the outputs.
#[derive(Serialize)]
struct HashedInputs<'a> {
    model: &'a ModelFile,
    t_end: f64,
    n_points: usize,
    ntraj: usize,
    seed: u64,
    tol: f64,
    mode: Mode,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::config("t_end", "must be positive and finite"));
        }
        if self.n_points < 2 {
            return Err(Error::config("points", "must be at least 2"));
        }
        if self.ntraj < 1 {
            return Err(Error::config("ntraj", "must be at least 1"));
        }
        if !(self.tol > 1e-14 && self.tol <= 1e-2) {
            return Err(Error::config("tol", "must lie in (1e-14, 1e-2]"));
        }
        if self.workers < 1 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        self.model.to_spec::<f64>()?;
        self.model.initial_state::<f64>()?;
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_points - 1;
        (0..=n).map(|k| self.t_end * k as f64 / n as f64).collect()
    }

    /// SHA-256 of the canonical JSON of all output-determining inputs,
    /// framed like a git blob (`blob <len>\0<content>`).
    pub fn input_hash(&self) -> String {
        let inputs = HashedInputs {
            model: &self.model,
            t_end: self.t_end,
            n_points: self.n_points,
            ntraj: self.ntraj,
            seed: self.seed,
            tol: self.tol,
            mode: self.mode,
        };
        let body = serde_json::to_vec(&inputs).expect("inputs serialize");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(&body);
        hex::encode(h.finalize())
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve_model(cli: &Cli) -> Result<(ModelFile, String)> {
    match cli.model.as_str() {
        "jc" | JAYNES_CUMMINGS => Ok((
            ModelFile::jaynes_cummings(cli.gamma0, cli.lambda, cli.delta),
            JAYNES_CUMMINGS.to_string(),
        )),
        path => {
            let p = Path::new(path);
            if !p.is_file() {
                return Err(Error::config(
                    "model",
                    format!("`{path}` is neither a built-in model nor a readable file"),
                ));
            }
            Ok((ModelFile::load(p)?, path.to_string()))
        }
    }
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig> {
        let mut cfg = if let Some(path) = &self.from_manifest {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config("from_manifest", format!("{}: {e}", path.display())))?;
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::config("from_manifest", e.to_string()))?;
            let mut cfg = manifest.config;
            cfg.out = self.out.clone();
            cfg
        } else {
            let (model, model_source) = resolve_model(&self)?;
            RunConfig {
                model,
                model_source,
                t_end: self.t_end,
                n_points: self.points,
                ntraj: self.ntraj,
                seed: self.seed,
                tol: self.tol,
                workers: default_workers(),
                mode: self.mode,
                out: self.out.clone(),
            }
        };
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub input_hash: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct RunError {
    pub stage: &'static str,
    pub error: Error,
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self.error {
            Error::Config { .. } | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
            _ if self.stage == "config" => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, RunError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, RunError> {
        self.map_err(|error| RunError { stage, error })
    }
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    Ok(fs::File::create(dir.join(name))?)
}

/// Executes `cfg`, writing the requested files into `cfg.out`.
pub fn run(cfg: &RunConfig) -> std::result::Result<Manifest, RunError> {
    let start = Instant::now();
    cfg.validate().stage("config")?;
    let spec = cfg.model.to_spec::<f64>().stage("config")?;
    let phi = cfg.model.initial_state::<f64>().stage("config")?;
    fs::create_dir_all(&cfg.out).map_err(Error::from).stage("config")?;
    let rho0 = CMatrix::outer(&phi, &phi);
    let grid = cfg.grid();
    let mut outputs = Vec::new();

    if cfg.mode.tcl() {
        let states = solve_tcl(&spec, &rho0, &grid, &SolveOptions::new(cfg.tol)).stage("tcl solver")?;
        write_tcl_csv(create(&cfg.out, TCL_CSV).stage("output")?, &grid, &states).stage("output")?;
        outputs.push(TCL_CSV.to_string());
    }
    if cfg.mode.embedded() {
        let points =
            solve_extended(&spec, &rho0, &grid, &SolveOptions::new(cfg.tol)).stage("embedded solver")?;
        write_extended_csv(create(&cfg.out, EMBEDDED_CSV).stage("output")?, &points).stage("output")?;
        outputs.push(EMBEDDED_CSV.to_string());
    }
    if cfg.mode.trajectories() {
        let ens = EnsembleConfig {
            ntraj: cfg.ntraj,
            seed: cfg.seed,
            workers: cfg.workers,
            opts: TrajectoryOptions::new(cfg.tol),
        };
        let acc = run_ensemble(&spec, &phi, &grid, &ens).stage("trajectories")?;
        let exact = match spec.jc_params() {
            Some(p) => {
                let ints = jc_rate_integrals(p, &grid).stage("trajectories")?;
                let pg: Vec<f64> = ints.iter().map(|r| 1.0 - (-r.gamma).exp()).collect();
                let den: Vec<f64> = ints.iter().map(|r| r.coherence_decay()).collect();
                Some((pg, den))
            }
            None => None,
        };
        let exact_ref = exact.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
        write_estimate_csv(create(&cfg.out, MC_CSV).stage("output")?, &acc, exact_ref)
            .stage("trajectories")?;
        outputs.push(MC_CSV.to_string());
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        input_hash: cfg.input_hash(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from).stage("output")?;
    fs::write(cfg.out.join(MANIFEST), text + "\n").map_err(Error::from).stage("output")?;
    Ok(manifest)
}

/// Parses `args`, runs, reports on stdout/stderr and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nmqj: config: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&cfg) {
        Ok(m) => {
            for f in &m.outputs {
                println!("wrote {}", cfg.out.join(f).display());
            }
            println!("wrote {}", cfg.out.join(MANIFEST).display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("nmqj: {e}");
            e.exit_code()
        }
    }
}
