//! Decay-rate fits, refinement studies and parameter sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{admissible_eta_interval, validate_params, PhysicalParams};
use crate::scenario::Scenario;
use crate::solver::{self, integrate, stable_dt, transport, GridSpec, RunConfig};
use crate::spectral;

/// Samples below `FLOOR_REL · E(0)` are dropped before taking logs.
pub const FLOOR_REL: f64 = 1e-14;
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares line through `(t, ln E)` on `window` (default: the middle
/// half of the series' time span).
pub fn fit_decay_rate(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::TooShort(0, MIN_FIT_SAMPLES)),
    };
    let (t0, t1) = window.unwrap_or_else(|| {
        let span = last.0 - first.0;
        (first.0 + 0.25 * span, first.0 + 0.75 * span)
    });
    if !(t0 < t1) {
        return Err(Error::Fit(format!("empty window [{t0}, {t1}]")));
    }
    let floor = FLOOR_REL * first.1;
    let in_window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t0 && t <= t1)
        .collect();
    let pts: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|&&(_, e)| e > floor && e > 0.0)
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    if pts.is_empty() && !in_window.is_empty() {
        return Err(Error::Fit("energy already at floor".into()));
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooShort(pts.len(), MIN_FIT_SAMPLES));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    Ok(DecayFit {
        gamma: -slope,
        c: intercept.exp(),
        r2,
        window: (t0, t1),
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub m: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    /// All errors vanish.
    Exact,
    Asymptotic,
    /// Errors did not decrease monotonically.
    PreAsymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub kind: &'static str,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub status: OrderStatus,
}

impl ConvergenceReport {
    fn from_errors(kind: &'static str, errors: Vec<f64>, ratio: f64) -> Self {
        if errors.iter().all(|&e| e == 0.0) {
            return ConvergenceReport {
                kind,
                errors,
                orders: Vec::new(),
                status: OrderStatus::Exact,
            };
        }
        let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect();
        let monotone = errors.windows(2).all(|w| w[1] < w[0]);
        ConvergenceReport {
            kind,
            errors,
            orders,
            status: if monotone {
                OrderStatus::Asymptotic
            } else {
                OrderStatus::PreAsymptotic
            },
        }
    }

    /// Order between the two finest levels.
    pub fn finest_order(&self) -> Option<f64> {
        self.orders.last().copied()
    }
}

fn phi_at_end(sc: &Scenario, level: &Level) -> Result<(GridSpec, Vec<f64>)> {
    let sc = sc.with_grid(level.n, level.m);
    let sys = sc.system()?;
    let init = sc.sample_initial()?.state;
    let mut cfg = RunConfig::new(sc.time.t_end, level.dt);
    cfg.out_every = usize::MAX;
    cfg.keep_state_every = None;
    let mut state = init;
    state.sync_inflow();
    let steps = cfg.steps();
    let mut rk = solver::Rk4::new(state.as_slice().len());
    for k in 0..steps {
        let dt = if k + 1 == steps { sc.time.t_end - state.t } else { level.dt };
        rk.step(&mut state, dt, &sys)?;
    }
    Ok((sys.grid, state.phi().to_vec()))
}

/// Spatial refinement: successive L² differences of φ(·, t_end) between
/// nested levels, restricted to the coarser nodes. Each level must halve h.
pub fn convergence_study(sc: &Scenario, levels: &[Level]) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::Grid(format!("need at least 3 levels, got {}", levels.len())));
    }
    for w in levels.windows(2) {
        if w[1].n + 1 != 2 * (w[0].n + 1) {
            return Err(Error::Grid(format!(
                "levels must be nested with h halved: N = {} then {}",
                w[0].n, w[1].n
            )));
        }
    }
    let fields: Vec<(GridSpec, Vec<f64>)> = levels
        .par_iter()
        .map(|l| phi_at_end(sc, l))
        .collect::<Result<_>>()?;
    let errors = fields
        .windows(2)
        .map(|w| {
            let (gc, coarse) = &w[0];
            let (_, fine) = &w[1];
            let s: f64 = coarse
                .iter()
                .enumerate()
                .map(|(i, c)| (c - fine[2 * i + 1]).powi(2))
                .sum();
            (gc.h * s).sqrt()
        })
        .collect();
    Ok(ConvergenceReport::from_errors("spatial", errors, 2.0))
}

/// Standard spatial levels `N + 1 ∈ {25, 50, 100, 200}` with M and dt
/// fixed at the finest level's stable step.
pub fn default_spatial_levels(p: &PhysicalParams, m: usize, cfl: f64) -> Result<Vec<Level>> {
    let finest = GridSpec::new(199, m)?;
    let dt = stable_dt(&finest, p, cfl);
    Ok([24, 49, 99, 199].iter().map(|&n| Level { n, m, dt }).collect())
}

/// Temporal refinement on a fixed grid: successive max-norm differences of
/// the full state at t_end as dt is halved.
pub fn temporal_convergence(sc: &Scenario, dts: &[f64]) -> Result<ConvergenceReport> {
    let states: Vec<Vec<f64>> = dts
        .par_iter()
        .map(|&dt| {
            let sys = sc.system()?;
            let mut s = sc.sample_initial()?.state;
            s.sync_inflow();
            let steps = (sc.time.t_end / dt).round() as usize;
            let mut rk = solver::Rk4::new(s.as_slice().len());
            for _ in 0..steps {
                rk.step(&mut s, dt, &sys)?;
            }
            Ok(s.as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    let errors = states
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    Ok(ConvergenceReport::from_errors("temporal", errors, 2.0))
}

/// Upwind transport with inflow `g(t) = sin(2t)` against the exact
/// `g(t − τy)` on `M − 1 ∈ {20, 40, 80, 160}`; dt fixed by the finest level.
pub fn transport_convergence(tau: f64, t_end: f64) -> ConvergenceReport {
    let ms = [21, 41, 81, 161];
    let dt = 0.5 * tau / 160.0;
    let errors = ms
        .iter()
        .map(|&m| transport::transport_error(m, tau, |t| (2.0 * t).sin(), t_end, dt))
        .collect();
    ConvergenceReport::from_errors("transport", errors, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `ρ/μ − J/δ`, varied through δ.
    SpeedDefect,
    /// `μ₂/μ₁`, varied through μ₂.
    DampingRatio,
    Tau,
}

impl SweepAxis {
    /// Applies the swept value; η is reset to the window midpoint.
    pub fn apply(&self, base: &PhysicalParams, value: f64) -> PhysicalParams {
        let mut p = *base;
        match self {
            SweepAxis::SpeedDefect => p.delta = p.j / (p.rho / p.mu - value),
            SweepAxis::DampingRatio => p.mu2 = value * p.mu1,
            SweepAxis::Tau => p.tau = value,
        }
        p.eta = admissible_eta_interval(&p).midpoint();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub gamma_fit: Option<f64>,
    pub r2: Option<f64>,
    pub abscissa: Option<f64>,
    #[serde(rename = "CE")]
    pub c_e: f64,
    pub violations: Vec<String>,
    pub equal_speed: bool,
    pub degenerate: bool,
    pub skipped: bool,
    pub note: Option<String>,
}

/// Grid used for the abscissa column of sweep tables.
pub const SWEEP_SPECTRAL_GRID: (usize, usize) = (40, 11);

fn sweep_row(base: &Scenario, axis: SweepAxis, value: f64) -> SweepRow {
    let p = axis.apply(&base.params, value);
    let report = validate_params(&p);
    let mut row = SweepRow {
        value,
        gamma_fit: None,
        r2: None,
        abscissa: None,
        c_e: report.c_e,
        violations: report.violations.iter().map(|v| v.name.to_string()).collect(),
        equal_speed: report.equal_speed,
        degenerate: report.degenerate,
        skipped: !report.admissible || !(p.delta > 0.0),
        note: None,
    };
    if row.skipped {
        return row;
    }
    let sc = Scenario {
        params: p,
        ..base.clone()
    };
    let fit = (|| -> Result<DecayFit> {
        let sys = sc.system()?;
        let init = sc.sample_initial()?.state;
        let mut cfg = RunConfig::new(sc.time.t_end, sc.dt()?);
        cfg.out_every = sc.time.out_every;
        let traj = integrate(init, &sys, &cfg)?;
        let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.energy.total)).collect();
        let t = sc.time.t_end;
        fit_decay_rate(&series, Some((0.25 * t, 0.75 * t)))
    })();
    match fit {
        Ok(f) => {
            row.gamma_fit = Some(f.gamma);
            row.r2 = Some(f.r2);
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    let (n, m) = SWEEP_SPECTRAL_GRID;
    if let Ok(g) = GridSpec::new(n, m) {
        let gm = spectral::assemble_generator(&g, &p);
        match spectral::spectrum(&gm) {
            Ok(eigs) => row.abscissa = Some(spectral::spectral_abscissa(&eigs)),
            Err(e) => row.note = Some(e.to_string()),
        }
    }
    row
}

/// One row per value, computed in parallel and returned in input order.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    values.par_iter().map(|&v| sweep_row(base, axis, v)).collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let s: Vec<(f64, f64)> = (0..=100)
            .map(|k| {
                let t = 0.1 * k as f64;
                (t, 2.0 * (-0.3 * t).exp())
            })
            .collect();
        let f = fit_decay_rate(&s, Some((0.0, 10.0))).unwrap();
        assert!((f.gamma - 0.3).abs() < 1e-10);
        assert!((f.c - 2.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_exponential() {
        let s: Vec<(f64, f64)> = (0..=100)
            .map(|k| {
                let t = 0.1 * k as f64;
                (t, 2.0 * (-0.3 * t).exp() * (1.0 + 0.01 * (5.0 * t).sin()))
            })
            .collect();
        let f = fit_decay_rate(&s, Some((0.0, 10.0))).unwrap();
        assert!((f.gamma - 0.3).abs() <= 0.01);
        assert!(f.r2 >= 0.999);
    }

    #[test]
    fn constant_series() {
        let s: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 1.5)).collect();
        let f = fit_decay_rate(&s, None).unwrap();
        assert_eq!(f.gamma, 0.0);
        assert_eq!(f.r2, 0.0);
    }

    #[test]
    fn floor_and_short_series() {
        let s: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, if k == 0 { 1.0 } else { 0.0 })).collect();
        assert!(matches!(fit_decay_rate(&s, None), Err(Error::Fit(_))));
        let s: Vec<(f64, f64)> = (0..8).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(fit_decay_rate(&s, None), Err(Error::TooShort(..))));
    }

    #[test]
    fn orders_flags() {
        let r = ConvergenceReport::from_errors("x", vec![0.0, 0.0, 0.0], 2.0);
        assert_eq!(r.status, OrderStatus::Exact);
        let r = ConvergenceReport::from_errors("x", vec![4.0, 1.0, 0.25], 2.0);
        assert_eq!(r.status, OrderStatus::Asymptotic);
        assert!((r.orders[1] - 2.0).abs() < 1e-14);
        let r = ConvergenceReport::from_errors("x", vec![1.0, 2.0, 0.5], 2.0);
        assert_eq!(r.status, OrderStatus::PreAsymptotic);
    }

    #[test]
    fn zero_data_converges_exactly() {
        let mut sc = Scenario::default_a1().linear();
        sc.initial = crate::model::InitialData::zero();
        sc.time.t_end = 0.2;
        let levels = [Level { n: 9, m: 5, dt: 0.01 }, Level { n: 19, m: 5, dt: 0.01 }, Level { n: 39, m: 5, dt: 0.01 }];
        let r = convergence_study(&sc, &levels).unwrap();
        assert_eq!(r.status, OrderStatus::Exact);
    }

    #[test]
    fn rejects_non_nested_levels() {
        let sc = Scenario::default_a1();
        let levels = [Level { n: 25, m: 5, dt: 0.01 }, Level { n: 50, m: 5, dt: 0.01 }, Level { n: 100, m: 5, dt: 0.01 }];
        assert!(convergence_study(&sc, &levels).is_err());
    }

    #[test]
    fn sweep_axes() {
        let p = Scenario::default_a1().params;
        let q = SweepAxis::SpeedDefect.apply(&p, 0.5);
        assert!((q.delta - 2.0).abs() < 1e-15);
        assert!((q.speed_defect() - 0.5).abs() < 1e-15);
        let q = SweepAxis::DampingRatio.apply(&p, 1.0);
        assert_eq!(q.c_e(), 0.0);
        let v = linspace(-0.5, 0.5, 11);
        assert_eq!(v.len(), 11);
        assert_eq!(v[5], 0.0);
    }
}
