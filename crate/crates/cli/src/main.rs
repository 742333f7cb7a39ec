use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use porodelay_core::analysis::{self, SweepAxis};
use porodelay_core::solver::RunStatus;
use porodelay_core::{acceptance, io, solver, spectral, Error, Scenario};

/// Simulation and verification runner for the delayed porous-elastic system.
#[derive(Parser)]
#[command(name = "porodelay", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write diagnostics CSV and JSON summary.
    Run(Common),
    /// Assemble the linear generator and write its eigenvalues.
    Spectrum(Common),
    /// Run criteria A1-A7 on a scenario and print a pass/fail table.
    Verify(Common),
    /// Sweep one parameter and tabulate decay fits.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "speed-defect")]
        axis: Axis,
        #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    SpeedDefect,
    DampingRatio,
    Tau,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file; the built-in default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted `key=value` override, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<(Scenario, PathBuf), Error> {
        let mut sc = match &self.scenario {
            Some(p) => Scenario::from_file(p, &self.overrides)?,
            None if self.overrides.is_empty() => Scenario::default_a1(),
            None => {
                return Err(Error::Scenario(
                    "--override needs --scenario (the built-in default has no file)".into(),
                ))
            }
        };
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&sc.output.dir));
        Ok((sc, out))
    }
}

const EXIT_FAILED: u8 = 1;
const EXIT_INTERRUPTED: u8 = 130;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Grid(_)
        | Error::Forcing(_)
        | Error::InitialData { .. }
        | Error::Incommensurate { .. }
        | Error::Hypothesis(_)
        | Error::LyapunovConfig(_)
        | Error::Scenario(_)
        | Error::HashMismatch { .. } => 2,
        Error::BlowUp { .. } | Error::NonFinite { .. } => 3,
        Error::ResourceCap(_) => 4,
        _ => 5,
    }
}

fn wants(sc: &Scenario, fmt: &str) -> bool {
    sc.output.formats.iter().any(|f| f == fmt)
}

fn cmd_run(c: &Common) -> Result<u8, Error> {
    let (sc, out) = c.load()?;
    for w in sc.validate()? {
        eprintln!("warning: {w}");
    }
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let flag = cancel.clone();
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed));
    }
    eprintln!(
        "running N = {}, M = {}, t_end = {}, dt = {:.4e}",
        sc.grid.n,
        sc.grid.m,
        sc.time.t_end,
        sc.dt()?
    );
    let traj = solver::run(&sc, Some(cancel), true)?;
    let hash = sc.hash();
    let lcfg = sc.lyapunov_config();
    let summary = io::summarize(&traj, &sc.params, &sc.diagnostics, lcfg.as_ref(), &hash);
    io::write_text(&out.join("trajectory.csv"), &io::trajectory_csv(&traj, &hash))?;
    io::write_json(&out.join("summary.json"), &summary)?;
    if wants(&sc, "bin") {
        io::write_snapshot_file(&out.join("final.bin"), &traj.last, &sc.short_hash())?;
    }
    eprintln!("wrote {}", out.display());
    Ok(match traj.meta.status {
        RunStatus::Completed => 0,
        RunStatus::BlowUp { t } => {
            eprintln!("error: blow-up detected at t = {t}");
            3
        }
        RunStatus::Interrupted { t } => {
            eprintln!("interrupted at t = {t}; partial output written");
            EXIT_INTERRUPTED
        }
    })
}

fn cmd_spectrum(c: &Common) -> Result<u8, Error> {
    let (sc, out) = c.load()?;
    let g = sc.grid_spec()?;
    spectral::check_dimension(&g)?;
    for w in sc.validate()? {
        eprintln!("warning: {w}");
    }
    eprintln!("assembling generator of dimension {}", g.generator_dim());
    let gm = spectral::assemble_generator(&g, &sc.params);
    let eigs = spectral::spectrum(&gm)?;
    let abscissa = spectral::spectral_abscissa(&eigs);
    let worst = spectral::dissipativity_check(&gm, 200, sc.seed);
    let hash = sc.hash();
    io::write_text(&out.join("eigenvalues.csv"), &io::eigenvalues_csv(&eigs, &hash))?;
    let summary = serde_json::json!({
        "abscissa": abscissa,
        "n": g.n,
        "m": g.m,
        "dim": gm.dim(),
        "worst_rayleigh": worst,
        "params_hash": hash,
        "scenario_hash": hash,
    });
    io::write_json(&out.join("spectrum.json"), &summary)?;
    println!("abscissa = {abscissa:.6e}, max Rayleigh quotient = {worst:.3e}");
    Ok(0)
}

fn cmd_verify(c: &Common) -> Result<u8, Error> {
    let (sc, out) = c.load()?;
    sc.validate()?;
    let report = sc.validate_params();
    if !report.admissible {
        return Err(Error::Hypothesis(report.summary()));
    }
    if !report.decay_hypothesis {
        return Err(Error::Hypothesis(format!(
            "decay requires mu2 < mu1 (mu2 = {}, mu1 = {})",
            sc.params.mu2, sc.params.mu1
        )));
    }
    let verdicts = acceptance::verify_scenario(&sc)?;
    for v in &verdicts {
        println!("{}", v.line());
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    let hash = sc.hash();
    io::write_json(
        &out.join("verify.json"),
        &serde_json::json!({ "scenario_hash": hash, "verdicts": verdicts }),
    )?;
    if failed.is_empty() {
        println!("all criteria passed");
        Ok(0)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(EXIT_FAILED)
    }
}

fn cmd_sweep(c: &Common, axis: Axis, from: f64, to: f64, points: usize) -> Result<u8, Error> {
    let (sc, out) = c.load()?;
    sc.validate()?;
    let (axis, name) = match axis {
        Axis::SpeedDefect => (SweepAxis::SpeedDefect, "defect"),
        Axis::DampingRatio => (SweepAxis::DampingRatio, "mu2_over_mu1"),
        Axis::Tau => (SweepAxis::Tau, "tau"),
    };
    let values = analysis::linspace(from, to, points.max(1));
    eprintln!("sweeping {name} over {} values", values.len());
    let rows = analysis::sweep(&sc, axis, &values);
    let csv = io::sweep_csv(&rows, name, &sc.hash());
    io::write_text(&out.join("sweep.csv"), &csv)?;
    print!("{}", csv.lines().skip(1).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Run(c) => cmd_run(c),
        Command::Spectrum(c) => cmd_spectrum(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Sweep {
            common,
            axis,
            from,
            to,
            points,
        } => cmd_sweep(common, *axis, *from, *to, *points),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
