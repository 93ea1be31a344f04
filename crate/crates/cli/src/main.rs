//! `cellprice`: generate, validate, simulate and verify zonal-pricing scenarios.
//!
//! Exit codes: 0 ok, 1 a checked property failed (or a scenario is invalid),
//! 2 runtime error.

mod scenarios;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cellprice::netmodel::{validate_network, DEFAULT_SEED};
use cellprice::simulator::{
    integrate_partial, scenario_digest, write_csv, write_manifest, Model, SimOptions,
};
use cellprice::Scenario;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cellprice", version, about = "Distributed zonal pricing on lossy AC grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a built-in scenario to a JSON file and print its digest.
    Gen {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        out: OutDir,
    },
    /// Check a scenario for structural problems.
    Validate {
        #[command(flatten)]
        src: Source,
    },
    /// Integrate a scenario; writes `<name>.csv`, `<name>.manifest.json` and
    /// `<name>.windows.json` (states ending each inter-event window).
    Simulate {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Check frequency, price consensus, KKT residuals and the centralized
    /// optimum on every converged window. Prints a JSON report.
    Verify {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        run: RunArgs,
        /// Window file written by `simulate`; simulates afresh when absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Frequency and consensus tolerance; KKT and optimum use ten times this.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in name (ieee57-I..IV, toy-2bus, toy-3cell[-I..IV], random-small) or scenario file.
    #[arg(long)]
    scenario: String,
    /// Seed of the randomized parameters.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Horizon in seconds (default: the scenario's).
    #[arg(long)]
    t_end: Option<f64>,
    /// Integration step in seconds.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Output step in seconds (default: the scenario's).
    #[arg(long)]
    dt_out: Option<f64>,
    /// Stop with an error when a tie line reaches its limit.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "CELLPRICE_OUT", default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn options(&self, record_states: bool) -> Result<SimOptions<f64>> {
        if !(self.dt > 0.0) {
            bail!("--dt must be positive");
        }
        if let Some(h) = self.dt_out {
            if !(h > 0.0) {
                bail!("--dt-out must be positive");
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                bail!("--t-end must not be negative");
            }
        }
        Ok(SimOptions {
            dt: self.dt,
            output_step: self.dt_out,
            horizon: self.t_end,
            strict_congestion: self.strict,
            record_states,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Gen { src, out } => {
            let sc = scenarios::load(&src.scenario, src.seed)?;
            let path = out_path(&out.out, &sc.name, "json")?;
            fs::write(&path, serde_json::to_vec_pretty(&sc)?)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("{} {}", path.display(), scenario_digest(&sc)?);
            Ok(0)
        }
        Command::Validate { src } => {
            let sc = scenarios::load(&src.scenario, src.seed)?;
            let issues = validate_network(&sc.network);
            for m in &issues {
                println!("{m}");
            }
            if issues.is_empty() {
                if let Err(e) = sc.validate() {
                    println!("{e}");
                    return Ok(1);
                }
                println!("{}: valid ({} nodes, {} lines)", sc.name, sc.network.n_nodes(), sc.network.lines.len());
                Ok(0)
            } else {
                Ok(1)
            }
        }
        Command::Simulate { src, run, out } => {
            let sc = scenarios::load(&src.scenario, src.seed)?;
            simulate(sc, &run, &out.out)
        }
        Command::Verify { src, run, trajectory, tolerance } => {
            if !(tolerance > 0.0) {
                bail!("--tolerance must be positive");
            }
            let sc = scenarios::load(&src.scenario, src.seed)?;
            let model = Model::new(&sc)?;
            let nominal = sc.network.bases.nominal_frequency_hz;
            let windows = match trajectory {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    verify::from_json(&serde_json::from_str(&text)?)?
                }
                None => {
                    let traj = integrate_partial(sc, run.options(true)?)?;
                    if let Some(why) = &traj.stopped {
                        eprintln!("run stopped early: {why}");
                    }
                    verify::window_ends(&traj)
                }
            };
            let (ok, report) = verify::check(&model, &windows, nominal, tolerance);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn simulate(sc: Scenario, run: &RunArgs, dir: &Path) -> Result<u8> {
    let opts = run.options(true)?;
    let traj = integrate_partial(sc.clone(), opts.clone())?;
    let mut csv = Vec::new();
    write_csv(&traj, &mut csv)?;
    let csv_path = out_path(dir, &sc.name, "csv")?;
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let mut manifest = Vec::new();
    let m = write_manifest(&sc, &opts, &traj, &csv, &mut manifest)?;
    fs::write(out_path(dir, &sc.name, "manifest.json")?, &manifest)?;
    let windows = verify::to_json(&verify::window_ends(&traj))?;
    fs::write(out_path(dir, &sc.name, "windows.json")?, serde_json::to_vec(&windows)?)?;

    println!("{}: {} samples -> {}", sc.name, m.samples, csv_path.display());
    if let Some(t) = m.first_congestion_flag {
        println!("tie line at its limit first at t = {t} s");
    }
    match traj.stopped {
        Some(why) => {
            eprintln!("error: run stopped early: {why}");
            Ok(2)
        }
        None => Ok(0),
    }
}

fn out_path(dir: &Path, stem: &str, ext: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(format!("{stem}.{ext}")))
}
