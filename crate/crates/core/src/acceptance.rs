//! Acceptance criteria A1–A9 as reusable checks. Each returns a [`Verdict`]
//! with the measured values; none of them panics on failure.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    self, convergence_study, default_spatial_levels, fit_decay_rate, linspace, temporal_convergence,
    transport_convergence, SweepAxis,
};
use crate::diagnostics::{auto_lyapunov_config, dissipation_check, dissipation_tolerance};
use crate::error::Result;
use crate::model::validate_params;
use crate::scenario::Scenario;
use crate::solver::{self, history, integrate, stable_dt, RunConfig, Trajectory};
use crate::spectral;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub measured: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{} {:<4} {:<38} {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.seconds
        )
    }

    fn error(id: &'static str, title: &'static str, e: crate::error::Error, t0: Instant) -> Self {
        Verdict {
            id,
            title,
            pass: false,
            measured: format!("error: {e}"),
            seconds: t0.elapsed().as_secs_f64(),
        }
    }
}

/// Grid used by the spectral criteria.
pub const SPECTRAL_GRID: (usize, usize) = (40, 11);

/// Base trajectory shared by A1–A3 (every step sampled).
pub fn base_run(sc: &Scenario) -> Result<(Trajectory, f64)> {
    let t0 = Instant::now();
    let mut sc = sc.clone();
    sc.time.out_every = 1;
    let traj = solver::run(&sc, None, false)?;
    Ok((traj, t0.elapsed().as_secs_f64()))
}

pub fn a1_monotonicity(traj: &Trajectory, run_seconds: f64) -> Verdict {
    let t0 = Instant::now();
    let e: Vec<f64> = traj.energies();
    let e0 = e.first().copied().unwrap_or(0.0);
    let tol = 1e-8 * e0;
    let worst = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let bad = e.windows(2).filter(|w| w[1] > w[0] + tol).count();
    let secs = run_seconds + t0.elapsed().as_secs_f64();
    Verdict {
        id: "A1",
        title: "energy monotonicity",
        pass: traj.is_complete() && bad == 0 && secs < 30.0,
        measured: format!(
            "max dE = {worst:.3e} (tol {tol:.3e}), {bad} increases over {} pairs",
            e.len().saturating_sub(1)
        ),
        seconds: secs,
    }
}

pub fn a2_dissipation(traj: &Trajectory, sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    match dissipation_check(traj, &sc.params, &sc.diagnostics) {
        Ok(r) => Verdict {
            id: "A2",
            title: "quantitative dissipation",
            pass: r.violations == 0 && r.c_e > 0.0,
            measured: format!(
                "C_E = {:.4}, worst margin = {:.3e}, tol = {:.3e}, violations = {}/{}",
                r.c_e, r.worst_margin, r.tol, r.violations, r.intervals
            ),
            seconds: t0.elapsed().as_secs_f64(),
        },
        Err(e) => Verdict::error("A2", "quantitative dissipation", e, t0),
    }
}

pub fn a3_decay(traj: &Trajectory, sc: &Scenario, run_seconds: f64) -> Verdict {
    let t0 = Instant::now();
    let t = sc.time.t_end;
    let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.energy.total)).collect();
    match fit_decay_rate(&series, Some((0.25 * t, 0.75 * t))) {
        Ok(f) => {
            let secs = run_seconds + t0.elapsed().as_secs_f64();
            Verdict {
                id: "A3",
                title: "exponential decay fit",
                pass: f.r2 >= 0.98 && f.gamma > 0.0 && secs < 30.0,
                measured: format!(
                    "gamma = {:.5}, r2 = {:.5} on [{}, {}]",
                    f.gamma, f.r2, f.window.0, f.window.1
                ),
                seconds: secs,
            }
        }
        Err(e) => Verdict::error("A3", "exponential decay fit", e, t0),
    }
}

/// Transport run vs ring-buffer run on the linear variant with `dt = τ/K`.
pub fn a4_history_oracle(sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    let f = || -> Result<(f64, f64)> {
        let mut lin = sc.linear();
        lin.time.t_end = sc.time.t_end.min(10.0);
        let g = lin.grid_spec()?;
        let dt_max = stable_dt(&g, &lin.params, lin.time.cfl);
        let k = (lin.params.tau / dt_max).ceil();
        lin.time.dt = Some(lin.params.tau / k);
        lin.time.out_every = 5;
        let sys = lin.system()?;
        let init = lin.sample_initial()?;
        let mut cfg = lin.run_config()?;
        cfg.lyapunov = None;
        cfg.keep_state_every = Some(1);
        let a = integrate(init.state.clone(), &sys, &cfg)?;
        let b = history::history_buffer_reference_run(&init.state, &lin.initial.f0, &sys, &cfg)?;
        let mut worst: f64 = 0.0;
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in x.phi().iter().zip(y.phi()) {
                worst = worst.max((p - q).abs());
            }
        }
        if a.states.len() != b.states.len() || a.states.is_empty() {
            worst = f64::INFINITY;
        }
        Ok((worst, 10.0 * (g.h * g.h + g.dy)))
    };
    match f() {
        Ok((worst, bound)) => Verdict {
            id: "A4",
            title: "delay representation oracle",
            pass: worst <= bound,
            measured: format!("max |phi_z - phi_hist| = {worst:.3e} (bound {bound:.3e})"),
            seconds: t0.elapsed().as_secs_f64(),
        },
        Err(e) => Verdict::error("A4", "delay representation oracle", e, t0),
    }
}

pub fn a5_spectral_consistency(sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    let f = || -> Result<(f64, f64, f64)> {
        let (n, m) = SPECTRAL_GRID;
        let lin = sc.linear().with_grid(n, m);
        let g = lin.grid_spec()?;
        let gm = spectral::assemble_generator(&g, &lin.params);
        let sigma = spectral::spectral_abscissa(&spectral::spectrum(&gm)?);
        let sys = lin.system()?;
        let init = lin.sample_initial()?.state;
        let cfg = RunConfig::new(lin.time.t_end, lin.dt()?);
        let traj = integrate(init, &sys, &cfg)?;
        let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.energy.total)).collect();
        let t = lin.time.t_end;
        let fit = fit_decay_rate(&series, Some((0.25 * t, 0.75 * t)))?;
        Ok((sigma, fit.gamma, fit.r2))
    };
    match f() {
        Ok((sigma, gamma, r2)) => {
            let target = 2.0 * sigma.abs();
            let rel = (gamma - target).abs() / target;
            let secs = t0.elapsed().as_secs_f64();
            Verdict {
                id: "A5",
                title: "spectral consistency",
                pass: sigma < 0.0 && rel <= 0.25 && secs < 60.0,
                measured: format!(
                    "sigma = {sigma:.4e}, gamma_fit = {gamma:.4e} (r2 {r2:.3}), 2|sigma| = {target:.4e}, rel diff = {rel:.3}"
                ),
                seconds: secs,
            }
        }
        Err(e) => Verdict::error("A5", "spectral consistency", e, t0),
    }
}

pub fn a6_dissipativity(sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    let (n, m) = SPECTRAL_GRID;
    let g = match sc.with_grid(n, m).grid_spec() {
        Ok(g) => g,
        Err(e) => return Verdict::error("A6", "discrete dissipativity", e, t0),
    };
    let admissible = validate_params(&sc.params).admissible;
    let gm = spectral::assemble_generator(&g, &sc.params);
    let worst = spectral::dissipativity_check(&gm, 1000, sc.seed);
    let mut x = nalgebra::DVector::zeros(gm.dim());
    for i in 0..g.n {
        x[g.n + i] = (std::f64::consts::PI * g.x(i) * 3.0).sin() + 0.2;
    }
    let v_only = spectral::rayleigh_quotient(&gm, &x);
    Verdict {
        id: "A6",
        title: "discrete dissipativity",
        pass: admissible && worst <= 1e-6 && v_only.abs() <= 1e-12,
        measured: format!("max Rayleigh = {worst:.3e} over 1000 states, v-only = {v_only:.1e}"),
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn a7_lyapunov(sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    let f = || -> Result<(f64, f64, f64, f64, usize)> {
        let lin = sc.linear();
        let l = auto_lyapunov_config(&lin.params, &lin.forcing, &lin.diagnostics)?;
        let sys = lin.system()?;
        let init = lin.sample_initial()?.state;
        let mut cfg = lin.run_config()?;
        cfg.out_every = 1;
        cfg.lyapunov = Some(l);
        let traj = integrate(init, &sys, &cfg)?;
        let (g1, g2) = crate::diagnostics::equivalence_range(&traj, &l).unwrap_or((f64::NAN, f64::NAN));
        let e0 = traj.samples[0].energy.total;
        let tol = dissipation_tolerance(&sys.grid, cfg.dt, e0);
        let mut worst = f64::NEG_INFINITY;
        let mut bad = 0;
        for w in traj.samples.windows(2) {
            let dt = w[1].t - w[0].t;
            let de = w[1].energy.total - w[0].energy.total;
            let dq = w[1].lyapunov_perturbation.unwrap_or(f64::NAN)
                - w[0].lyapunov_perturbation.unwrap_or(f64::NAN);
            let rate = (l.mw * de + dq) / dt;
            worst = worst.max(rate);
            if !(rate <= tol) {
                bad += 1;
            }
        }
        Ok((g1, g2, worst, tol, bad))
    };
    match f() {
        Ok((g1, g2, worst, tol, bad)) => Verdict {
            id: "A7",
            title: "Lyapunov equivalence and decrease",
            pass: g1 > 0.0 && g2.is_finite() && bad == 0,
            measured: format!(
                "L/E in [{g1:.6e}, {g2:.6e}], max dL/dt = {worst:.3e} (tol {tol:.3e}), {bad} violations"
            ),
            seconds: t0.elapsed().as_secs_f64(),
        },
        Err(e) => Verdict::error("A7", "Lyapunov equivalence and decrease", e, t0),
    }
}

pub fn a8_convergence(sc: &Scenario) -> Verdict {
    let t0 = Instant::now();
    let f = || -> Result<String> {
        let mut lin = sc.linear();
        lin.time.t_end = 2.0;
        let levels = default_spatial_levels(&lin.params, 21, lin.time.cfl)?;
        let spatial = convergence_study(&lin, &levels)?;

        let mut coarse = lin.with_grid(24, 11);
        coarse.time.t_end = 1.0;
        let dt0 = stable_dt(&coarse.grid_spec()?, &coarse.params, coarse.time.cfl);
        let dts: Vec<f64> = (0..4).map(|k| dt0 / f64::from(1 << k)).collect();
        let temporal = temporal_convergence(&coarse, &dts)?;

        let transport = transport_convergence(lin.params.tau, 3.0);

        let so = spatial.finest_order().unwrap_or(f64::NAN);
        let to = temporal.finest_order().unwrap_or(f64::NAN);
        let yo = transport.finest_order().unwrap_or(f64::NAN);
        let ok = (1.8..=2.2).contains(&so) && to >= 3.8 && (0.85..=1.15).contains(&yo);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
        Ok(format!(
            "{}spatial {} [{:?}], temporal {} [{:?}], transport {} [{:?}]",
            if ok { "" } else { "! " },
            fmt(&spatial.orders),
            spatial.status,
            fmt(&temporal.orders),
            temporal.status,
            fmt(&transport.orders),
            transport.status
        ))
    };
    match f() {
        Ok(msg) => {
            let secs = t0.elapsed().as_secs_f64();
            let ok = !msg.starts_with('!');
            Verdict {
                id: "A8",
                title: "convergence orders",
                pass: ok && secs < 180.0,
                measured: msg.trim_start_matches("! ").to_string(),
                seconds: secs,
            }
        }
        Err(e) => Verdict::error("A8", "convergence orders", e, t0),
    }
}

pub fn a9_sweep(sc: &Scenario) -> (Verdict, Vec<analysis::SweepRow>) {
    let t0 = Instant::now();
    let values = linspace(-0.5, 0.5, 11);
    let rows = analysis::sweep(sc, SweepAxis::SpeedDefect, &values);
    let admissible: Vec<_> = rows.iter().filter(|r| !r.skipped).collect();
    let bad: Vec<String> = admissible
        .iter()
        .filter(|r| !r.r2.is_some_and(|x| x >= 0.9))
        .map(|r| format!("{:+.1}", r.value))
        .collect();
    let has_equal = rows.iter().any(|r| r.equal_speed);
    let min_r2 = admissible
        .iter()
        .filter_map(|r| r.r2)
        .fold(f64::INFINITY, f64::min);
    let v = Verdict {
        id: "A9",
        title: "equal-speed sweep",
        pass: rows.len() == 11 && has_equal && bad.is_empty(),
        measured: format!(
            "{} rows, {} admissible, min r2 = {min_r2:.4}, equal-speed row {}{}",
            rows.len(),
            admissible.len(),
            if has_equal { "present" } else { "missing" },
            if bad.is_empty() {
                String::new()
            } else {
                format!(", poor fits at defect {}", bad.join(" "))
            }
        ),
        seconds: t0.elapsed().as_secs_f64(),
    };
    (v, rows)
}

/// A1–A7 on one scenario, as run by `verify`.
pub fn verify_scenario(sc: &Scenario) -> Result<Vec<Verdict>> {
    let (traj, secs) = base_run(sc)?;
    Ok(vec![
        a1_monotonicity(&traj, secs),
        a2_dissipation(&traj, sc),
        a3_decay(&traj, sc, secs),
        a4_history_oracle(sc),
        a5_spectral_consistency(sc),
        a6_dissipativity(sc),
        a7_lyapunov(sc),
    ])
}
