//! `dbo`: run directories for Birkhoff and PDE evolutions, comparisons and sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 engine error,
//! 3 a run completed but failed its checks.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use dbo_core::diagnostics::{diagnose, DiagnosticReport};
use dbo_core::integrator::Trajectory;
use dbo_core::io::{read_trajectory_csv, write_json, write_trajectory_csv};
use dbo_core::pde::{cross_validate, pde_evolve};
use dbo_core::{birkhoff_forward, evolve, initial_state, InitialData, RunConfig};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Largest action discrepancy accepted by `compare`.
const COMPARE_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "dbo", version, about = "Damped Benjamin-Ono dynamics in Birkhoff coordinates")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; run directories are created inside it.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for `sweep` (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the seed of random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only warnings and errors on stderr, nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map the initial data to Birkhoff coordinates and write the spectrum.
    Birkhoff,
    /// Integrate in Birkhoff coordinates.
    Evolve,
    /// Integrate the PDE pseudospectrally.
    Pde,
    /// Run both solvers and compare their actions.
    Compare,
    /// Recompute diagnostics for an existing run directory.
    Diagnose {
        run: PathBuf,
    },
    /// One-gap initial data over r ∈ {0.1, …, 0.9} × α ∈ {0.1, 0.5, 1.0}.
    Sweep,
}

enum Failure {
    Usage(anyhow::Error),
    Engine(anyhow::Error),
    Checks(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Engine(_) => 2,
            Failure::Checks(_) => 3,
        }
    }
}

fn engine<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Engine(e.into())
}

type Outcome = Result<(), Failure>;

struct Ctx {
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            // a closed pipe downstream is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{}", text.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Engine(e) => eprintln!("engine error: {e:#}"),
                Failure::Checks(msg) => eprintln!("checks failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    let config = || -> Result<RunConfig, Failure> {
        let path = cli
            .config
            .as_deref()
            .ok_or_else(|| Failure::Usage(anyhow!("--config is required for this command")))?;
        load_config(path, cli.seed)
    };
    match cli.command {
        Command::Birkhoff => cmd_birkhoff(&ctx, &config()?),
        Command::Evolve => cmd_evolve(&ctx, &config()?),
        Command::Pde => cmd_pde(&ctx, &config()?),
        Command::Compare => cmd_compare(&ctx, &config()?),
        Command::Diagnose { run } => cmd_diagnose(&ctx, &run),
        Command::Sweep => {
            let base = match cli.config {
                Some(_) => Some(config()?),
                None => None,
            };
            cmd_sweep(&ctx, base, cli.workers)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Usage)?;
    let mut cfg: RunConfig = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Usage)?;
    // sample files are resolved relative to the configuration
    if let InitialData::File { path: p } = &mut cfg.initial_data {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    if let Some(s) = seed {
        match &mut cfg.initial_data {
            InitialData::Random { seed, .. } => *seed = s,
            _ => log::warn!("--seed ignored: initial data is not random"),
        }
    }
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(cfg)
}

/// Hex sha256 of the compact JSON serialization; field order is fixed by the type.
fn run_id(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("configuration serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Serialize)]
struct ManifestEntry {
    name: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    run_id: String,
    command: String,
    version: String,
    files: Vec<ManifestEntry>,
}

struct RunDir {
    path: PathBuf,
    id: String,
    command: &'static str,
    files: Vec<String>,
}

impl RunDir {
    fn create(root: &Path, command: &'static str, cfg: &RunConfig) -> Result<Self, Failure> {
        let id = run_id(cfg);
        let path = root.join(format!("{command}-{}", &id[..16]));
        fs::create_dir_all(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(engine)?;
        let mut dir = RunDir {
            path,
            id,
            command,
            files: Vec::new(),
        };
        dir.json("config.json", cfg)?;
        Ok(dir)
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> Outcome {
        let path = self.path.join(name);
        let file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(engine)?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| Ok(w.flush()?)).map_err(engine)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome {
        self.write(name, |w| Ok(write_json(value, w)?))
    }

    fn trajectory(&mut self, name: &str, traj: &Trajectory) -> Outcome {
        self.write(name, |w| Ok(write_trajectory_csv(traj, w)?))
    }

    /// Writes manifest.json over every file written so far.
    fn finish(self) -> Result<PathBuf, Failure> {
        let files = self
            .files
            .iter()
            .map(|name| {
                let bytes = fs::read(self.path.join(name))?;
                Ok(ManifestEntry {
                    name: name.clone(),
                    bytes: bytes.len() as u64,
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()
            .map_err(engine)?;
        let manifest = Manifest {
            run_id: self.id,
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            files,
        };
        let file = File::create(self.path.join("manifest.json")).map_err(engine)?;
        write_json(&manifest, BufWriter::new(file)).map_err(engine)?;
        Ok(self.path)
    }
}

fn report_outcome(ctx: &Ctx, dir: &Path, report: &DiagnosticReport) -> Outcome {
    ctx.say(report.summary());
    ctx.say(format!("wrote {}", dir.display()));
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks(format!("diagnostics failed in {}", dir.display())))
    }
}

fn cmd_birkhoff(ctx: &Ctx, cfg: &RunConfig) -> Outcome {
    let u = cfg.initial_data.potential(cfg.grid).map_err(engine)?;
    let (state, spec) = birkhoff_forward(&u, cfg.n_modes, cfg.m_cut()).map_err(engine)?;
    let dump = spec.dump();
    let mut table = format!("{:>4} {:>14} {:>14} {:>14} {:>14} {:>10}\n", "n", "lambda", "gamma", "kappa", "|zeta|", "arg zeta");
    for n in 0..=cfg.n_modes {
        let (g, z) = if n == 0 {
            (1.0, (1.0, 0.0))
        } else {
            let z = state.zeta[n - 1];
            (z.norm_sqr(), (z.norm(), z.arg()))
        };
        table.push_str(&format!(
            "{n:>4} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>10.6}\n",
            dump.lambda[n], g, dump.kappa[n], z.0, z.1
        ));
    }
    let mut dir = RunDir::create(&ctx.out, "birkhoff", cfg)?;
    dir.json("spectrum.json", &dump)?;
    dir.write("spectrum.txt", |w| Ok(w.write_all(table.as_bytes())?))?;
    let path = dir.finish()?;
    ctx.say(table);
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

fn cmd_evolve(ctx: &Ctx, cfg: &RunConfig) -> Outcome {
    let (state, _) = initial_state(cfg).map_err(engine)?;
    let traj = evolve(&state, cfg).map_err(engine)?;
    log::info!("{} steps, {} rejected", traj.stats.accepted, traj.stats.rejected);
    let report = diagnose(&traj).map_err(engine)?;
    let mut dir = RunDir::create(&ctx.out, "evolve", cfg)?;
    dir.trajectory("trajectory.csv", &traj)?;
    dir.json("diagnostics.json", &report)?;
    let path = dir.finish()?;
    report_outcome(ctx, &path, &report)
}

fn cmd_pde(ctx: &Ctx, cfg: &RunConfig) -> Outcome {
    let u0 = cfg.initial_data.potential(cfg.grid).map_err(engine)?;
    let traj = pde_evolve(&u0, cfg).map_err(engine)?;
    let report = diagnose(&traj).map_err(engine)?;
    let mut dir = RunDir::create(&ctx.out, "pde", cfg)?;
    dir.trajectory("trajectory.csv", &traj)?;
    dir.json("diagnostics.json", &report)?;
    let path = dir.finish()?;
    report_outcome(ctx, &path, &report)
}

fn cmd_compare(ctx: &Ctx, cfg: &RunConfig) -> Outcome {
    let u0 = cfg.initial_data.potential(cfg.grid).map_err(engine)?;
    let run = cross_validate(&u0, cfg).map_err(engine)?;
    let report = diagnose(&run.birkhoff).map_err(engine)?;
    let mut dir = RunDir::create(&ctx.out, "compare", cfg)?;
    dir.trajectory("trajectory.csv", &run.birkhoff)?;
    dir.trajectory("pde_trajectory.csv", &run.pde)?;
    dir.json("comparison.json", &run.report)?;
    dir.json("diagnostics.json", &report)?;
    let path = dir.finish()?;
    let r = &run.report;
    ctx.say(format!(
        "modes 1..={}: max action error {:.3e} (n = {}, t = {}), max zeta error {:.3e}",
        r.compared_modes, r.max_action_error, r.worst_mode, r.worst_time, r.max_zeta_error
    ));
    report_outcome(ctx, &path, &report)?;
    if r.max_action_error > COMPARE_TOLERANCE {
        return Err(Failure::Checks(format!(
            "action error {:.3e} exceeds {COMPARE_TOLERANCE:.0e}",
            r.max_action_error
        )));
    }
    Ok(())
}

fn cmd_diagnose(ctx: &Ctx, run: &Path) -> Outcome {
    let cfg = load_config(&run.join("config.json"), None)?;
    let csv = run.join("trajectory.csv");
    let file = File::open(&csv)
        .with_context(|| format!("opening {}", csv.display()))
        .map_err(Failure::Usage)?;
    let traj = read_trajectory_csv(BufReader::new(file), cfg).map_err(|e| Failure::Usage(e.into()))?;
    let report = diagnose(&traj).map_err(engine)?;
    let file = File::create(run.join("diagnostics.json")).map_err(engine)?;
    write_json(&report, BufWriter::new(file)).map_err(engine)?;
    report_outcome(ctx, run, &report)
}

#[derive(Serialize)]
struct SweepEntry {
    r: f64,
    alpha: f64,
    run_id: String,
    dir: Option<PathBuf>,
    passed: bool,
    error: Option<String>,
    final_l2_norm_sq: Option<f64>,
    gap_tail_fraction: Option<f64>,
}

fn sweep_one(ctx: &Ctx, cfg: &RunConfig, r: f64) -> SweepEntry {
    let mut entry = SweepEntry {
        r,
        alpha: cfg.alpha,
        run_id: run_id(cfg),
        dir: None,
        passed: false,
        error: None,
        final_l2_norm_sq: None,
        gap_tail_fraction: None,
    };
    let result = (|| -> Result<(PathBuf, DiagnosticReport, Trajectory), Failure> {
        let (state, _) = initial_state(cfg).map_err(engine)?;
        let traj = evolve(&state, cfg).map_err(engine)?;
        let report = diagnose(&traj).map_err(engine)?;
        let mut dir = RunDir::create(&ctx.out, "evolve", cfg)?;
        dir.trajectory("trajectory.csv", &traj)?;
        dir.json("diagnostics.json", &report)?;
        Ok((dir.finish()?, report, traj))
    })();
    match result {
        Ok((dir, report, traj)) => {
            entry.dir = Some(dir);
            entry.passed = report.passed();
            entry.final_l2_norm_sq = traj.channel("l2_norm_sq").and_then(|c| c.last().copied());
            entry.gap_tail_fraction = report.check("gap integral tail fraction").map(|c| c.value);
        }
        Err(Failure::Usage(e) | Failure::Engine(e)) => entry.error = Some(format!("{e:#}")),
        Err(Failure::Checks(m)) => entry.error = Some(m),
    }
    entry
}

fn cmd_sweep(ctx: &Ctx, base: Option<RunConfig>, workers: Option<usize>) -> Outcome {
    let base = base.unwrap_or_else(|| {
        // r = 0.9 decays like 0.9ⁿ, so the Lax matrix needs a few hundred modes
        let mut c = RunConfig::new(0.5, 16, 20.0, InitialData::OneGap { r: 0.5 });
        c.grid = 512;
        c.m_cut = Some(256);
        c
    });
    let mut jobs = Vec::new();
    for alpha in [0.1, 0.5, 1.0] {
        for i in 1..=9 {
            let r = i as f64 / 10.0;
            let mut cfg = base.clone();
            cfg.alpha = alpha;
            cfg.initial_data = InitialData::OneGap { r };
            cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
            jobs.push((cfg, r));
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(Failure::Usage(anyhow!("--workers must be at least 1")));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(engine)?;
    let entries: Vec<SweepEntry> = pool.install(|| jobs.par_iter().map(|(cfg, r)| sweep_one(ctx, cfg, *r)).collect());

    fs::create_dir_all(&ctx.out).map_err(engine)?;
    let file = File::create(ctx.out.join("sweep.json")).map_err(engine)?;
    write_json(&entries, BufWriter::new(file)).map_err(engine)?;

    let mut table = format!("{:>5} {:>5} {:>18} {:>14} {:>8}\n", "r", "alpha", "run", "final |u|^2", "status");
    for e in &entries {
        let status = match (&e.error, e.passed) {
            (Some(_), _) => "error",
            (None, true) => "pass",
            (None, false) => "FAIL",
        };
        table.push_str(&format!(
            "{:>5.1} {:>5.1} {:>18} {:>14.6e} {:>8}\n",
            e.r,
            e.alpha,
            &e.run_id[..16],
            e.final_l2_norm_sq.unwrap_or(f64::NAN),
            status
        ));
    }
    ctx.say(table);
    if let Some(e) = entries.iter().find(|e| e.error.is_some()) {
        return Err(Failure::Engine(anyhow!(
            "run r = {}, alpha = {}: {}",
            e.r,
            e.alpha,
            e.error.as_deref().unwrap_or_default()
        )));
    }
    let failed = entries.iter().filter(|e| !e.passed).count();
    if failed > 0 {
        return Err(Failure::Checks(format!("{failed} of {} sweep runs failed diagnostics", entries.len())));
    }
    Ok(())
}
