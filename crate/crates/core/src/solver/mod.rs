//! Method-of-lines integration of the delay-transformed system.
//!
//! The delay `φ_t(x, t − τ)` is carried by the transport field
//! `z(x, y, t) = φ_t(x, t − τy)`, which solves `τ z_t + z_y = 0` with inflow
//! `z(x, 0, t) = φ_t(x, t)`. Space uses second-order central differences,
//! the y-direction first-order upwinding, and time classical RK4.
//! [`history`] integrates the undelayed form with a ring buffer instead and
//! serves as an independent check of the transport representation.

pub mod history;
pub mod stencil;
pub mod transport;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::{self, DiagnosticsConfig, LyapunovConfig, Sample};
use crate::error::{Error, Result};
use crate::model::{ForcingSpec, PhysicalParams};
use crate::scenario::Scenario;

/// Any state entry above this magnitude aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Interior x-nodes.
    pub n: usize,
    /// y-nodes of the delay channel, both ends included.
    pub m: usize,
    pub h: f64,
    pub dy: f64,
}

impl GridSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Grid(format!("N must be >= 4, got {n}")));
        }
        if m < 3 {
            return Err(Error::Grid(format!("M must be >= 3, got {m}")));
        }
        Ok(GridSpec {
            n,
            m,
            h: 1.0 / (n + 1) as f64,
            dy: 1.0 / (m - 1) as f64,
        })
    }

    /// x-coordinate of interior node `i` (0-based, so `x = (i+1)h`).
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    /// Length of the flat state vector `[u, v, φ, ψ, z]`.
    pub fn state_len(&self) -> usize {
        4 * self.n + self.n * self.m
    }

    /// Dimension of the generator once `z(·, 0) = ψ` is eliminated.
    pub fn generator_dim(&self) -> usize {
        4 * self.n + self.n * (self.m - 1)
    }
}

pub fn build_grid(n: usize, m: usize) -> Result<GridSpec> {
    GridSpec::new(n, m)
}

/// Grid samples of `(u, v = u_t, φ, ψ = φ_t)` at interior nodes plus the
/// N×M delay field, stored flat as `[u | v | φ | ψ | z]` with z row-major.
/// `z[i][0] == ψ[i]` holds after every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    n: usize,
    m: usize,
    data: Vec<f64>,
}

/// Time derivative of a state; same layout.
pub type StateDerivative = SimState;

impl SimState {
    pub fn zeros(g: &GridSpec) -> Self {
        SimState {
            t: 0.0,
            n: g.n,
            m: g.m,
            data: vec![0.0; g.state_len()],
        }
    }

    pub fn from_parts(g: &GridSpec, t: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != g.state_len() {
            return Err(Error::Grid(format!(
                "state length {} does not match grid ({})",
                data.len(),
                g.state_len()
            )));
        }
        Ok(SimState {
            t,
            n: g.n,
            m: g.m,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn u(&self) -> &[f64] {
        &self.data[..self.n]
    }
    pub fn v(&self) -> &[f64] {
        &self.data[self.n..2 * self.n]
    }
    pub fn phi(&self) -> &[f64] {
        &self.data[2 * self.n..3 * self.n]
    }
    pub fn psi(&self) -> &[f64] {
        &self.data[3 * self.n..4 * self.n]
    }
    pub fn z(&self) -> &[f64] {
        &self.data[4 * self.n..]
    }
    pub fn z_row(&self, i: usize) -> &[f64] {
        let off = 4 * self.n + i * self.m;
        &self.data[off..off + self.m]
    }
    /// `z(x_i, 1, t)`, the delayed velocity.
    pub fn z_outlet(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z_row(i)[self.m - 1]).collect()
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.n]
    }
    pub fn v_mut(&mut self) -> &mut [f64] {
        let n = self.n;
        &mut self.data[n..2 * n]
    }
    pub fn phi_mut(&mut self) -> &mut [f64] {
        let n = self.n;
        &mut self.data[2 * n..3 * n]
    }
    pub fn psi_mut(&mut self) -> &mut [f64] {
        let n = self.n;
        &mut self.data[3 * n..4 * n]
    }
    pub fn z_row_mut(&mut self, i: usize) -> &mut [f64] {
        let off = 4 * self.n + i * self.m;
        &mut self.data[off..off + self.m]
    }

    /// Copies ψ into the inflow column `z[·][0]`.
    pub fn sync_inflow(&mut self) {
        sync_inflow(&mut self.data, self.n, self.m);
    }

    /// max_i |z[i][0] − ψ[i]|
    pub fn inflow_mismatch(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.z_row(i)[0] - self.psi()[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Linear combination `a·self + b·other` (time taken from `self`).
    pub fn combine(&self, a: f64, other: &SimState, b: f64) -> SimState {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SimState {
            t: self.t,
            n: self.n,
            m: self.m,
            data,
        }
    }
}

fn sync_inflow(data: &mut [f64], n: usize, m: usize) {
    for i in 0..n {
        data[4 * n + i * m] = data[3 * n + i];
    }
}

/// Physical parameters, forcing and grid bundled for the integrators.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub params: PhysicalParams,
    pub forcing: ForcingSpec,
    pub grid: GridSpec,
}

/// Writes the semi-discrete right-hand side of `state` into `out` (same flat
/// layout). The inflow column of `out` receives dψ/dt so that
/// `z[·][0] = ψ` is preserved by any linear stage combination.
pub fn rhs_into(state: &[f64], sys: &System, out: &mut [f64]) {
    let PhysicalParams {
        rho,
        mu,
        j,
        delta,
        xi,
        b,
        mu1,
        mu2,
        tau,
        ..
    } = sys.params;
    let g = &sys.grid;
    let (n, m) = (g.n, g.m);
    let inv_h2 = 1.0 / (g.h * g.h);
    let inv_2h = 0.5 / g.h;

    let (u, rest) = state.split_at(n);
    let (v, rest) = rest.split_at(n);
    let (phi, rest) = rest.split_at(n);
    let (psi, z) = rest.split_at(n);

    let (du, orest) = out.split_at_mut(n);
    let (dv, orest) = orest.split_at_mut(n);
    let (dphi, orest) = orest.split_at_mut(n);
    let (dpsi, dz) = orest.split_at_mut(n);

    du.copy_from_slice(v);
    dphi.copy_from_slice(psi);
    let zero_forcing = sys.forcing.is_zero();
    for i in 0..n {
        dv[i] = (mu / rho) * stencil::d2(u, i, inv_h2) + (b / rho) * stencil::d1(phi, i, inv_2h);
        let delayed = z[i * m + m - 1];
        let force = if zero_forcing { 0.0 } else { sys.forcing.eval(phi[i]) };
        dpsi[i] = (delta * stencil::d2(phi, i, inv_h2)
            - b * stencil::d1(u, i, inv_2h)
            - xi * phi[i]
            - mu1 * psi[i]
            - mu2 * delayed
            - force)
            / j;
    }
    let speed = 1.0 / (tau * g.dy);
    for i in 0..n {
        let row = &z[i * m..(i + 1) * m];
        let drow = &mut dz[i * m..(i + 1) * m];
        stencil::upwind_row(row, speed, drow);
        drow[0] = dpsi[i];
    }
}

/// Right-hand side as a state-shaped value; fails on non-finite output.
pub fn rhs(s: &SimState, p: &PhysicalParams, f: &ForcingSpec, g: &GridSpec) -> Result<StateDerivative> {
    let sys = System {
        params: *p,
        forcing: f.clone(),
        grid: *g,
    };
    let mut out = SimState::zeros(g);
    out.t = s.t;
    rhs_into(&s.data, &sys, &mut out.data);
    check_finite(&out.data, g)?;
    Ok(out)
}

fn check_finite(data: &[f64], g: &GridSpec) -> Result<()> {
    if let Some(k) = data.iter().position(|x| !x.is_finite()) {
        let n = g.n;
        let (field, index) = match k / n {
            0 => ("u", k),
            1 => ("v", k - n),
            2 => ("phi", k - 2 * n),
            3 => ("psi", k - 3 * n),
            _ => ("z", k - 4 * n),
        };
        return Err(Error::NonFinite { field, index });
    }
    Ok(())
}

/// `cfl · min(h/√(μ/ρ), h/√(δ/J), τ·dy)`: the two wave speeds and the
/// transport speed 1/τ of the delay channel.
pub fn stable_dt(g: &GridSpec, p: &PhysicalParams, cfl: f64) -> f64 {
    let c_u = (p.mu / p.rho).sqrt();
    let c_phi = (p.delta / p.j).sqrt();
    cfl * (g.h / c_u).min(g.h / c_phi).min(p.tau * g.dy)
}

/// Scratch buffers for [`Rk4::step`].
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    /// One classical RK4 step of `y' = f(y)` in place.
    pub fn step_with<F>(&mut self, y: &mut [f64], dt: f64, mut f: F)
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        f(0, y, &mut self.k1);
        for (t, (a, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *t = a + 0.5 * dt * k;
        }
        f(1, &self.tmp, &mut self.k2);
        for (t, (a, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *t = a + 0.5 * dt * k;
        }
        f(2, &self.tmp, &mut self.k3);
        for (t, (a, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *t = a + dt * k;
        }
        f(3, &self.tmp, &mut self.k4);
        let w = dt / 6.0;
        for (i, a) in y.iter_mut().enumerate() {
            *a += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// Advances the coupled system by `dt`, re-imposing `z[·][0] = ψ`.
    pub fn step(&mut self, s: &mut SimState, dt: f64, sys: &System) -> Result<()> {
        self.step_with(&mut s.data, dt, |_, y, out| rhs_into(y, sys, out));
        s.t += dt;
        s.sync_inflow();
        if s
            .data
            .iter()
            .any(|x| !x.is_finite() || x.abs() > BLOWUP_THRESHOLD)
        {
            return Err(Error::BlowUp { t: s.t });
        }
        Ok(())
    }
}

/// Single RK4 step returning a new state.
pub fn step_rk4(s: &SimState, dt: f64, sys: &System) -> Result<SimState> {
    let mut next = s.clone();
    Rk4::new(s.data.len()).step(&mut next, dt, sys)?;
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Diagnostics are recorded every `out_every` steps (and at the end).
    pub out_every: usize,
    /// Keep a full state snapshot every this many recorded samples.
    pub keep_state_every: Option<usize>,
    pub diagnostics: DiagnosticsConfig,
    pub lyapunov: Option<LyapunovConfig>,
    /// Set from another thread to stop early; the partial trajectory is
    /// returned with status [`RunStatus::Interrupted`].
    pub cancel: Option<Arc<AtomicBool>>,
    pub progress: bool,
}

impl RunConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        RunConfig {
            t_end,
            dt,
            out_every: 1,
            keep_state_every: None,
            diagnostics: DiagnosticsConfig::default(),
            lyapunov: None,
            cancel: None,
            progress: false,
        }
    }

    pub fn steps(&self) -> usize {
        let k = self.t_end / self.dt;
        let r = k.round();
        if (k - r).abs() < 1e-9 * k.max(1.0) {
            r as usize
        } else {
            k.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { t: f64 },
    Interrupted { t: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub grid: GridSpec,
    pub dt: f64,
    pub steps_taken: usize,
    pub scenario_hash: Option<String>,
    pub warnings: Vec<String>,
    pub status: RunStatus,
    pub delay_representation: &'static str,
}

/// Time series of diagnostics and optional thinned state snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub states: Vec<SimState>,
    /// State at the end of the run (at the blow-up or interruption time when
    /// the run ended early).
    pub last: SimState,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy.total).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.meta.status == RunStatus::Completed
    }
}

/// Integrates from `initial` to `cfg.t_end`. Blow-up and interruption end
/// the run early; the partial trajectory is kept and flagged in its status.
pub fn integrate(initial: SimState, sys: &System, cfg: &RunConfig) -> Result<Trajectory> {
    let mut state = initial;
    state.sync_inflow();
    let steps = cfg.steps();
    let out_every = cfg.out_every.max(1);
    let mut rk = Rk4::new(state.data.len());
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut warnings = Vec::new();
    let mut status = RunStatus::Completed;
    let mut near_blowup = false;

    let record = |state: &SimState, samples: &mut Vec<Sample>, states: &mut Vec<SimState>| {
        let sample = diagnostics::sample(state, sys, &cfg.diagnostics, cfg.lyapunov.as_ref());
        if let Some(k) = cfg.keep_state_every {
            if samples.len().is_multiple_of(k.max(1)) {
                states.push(state.clone());
            }
        }
        samples.push(sample);
    };

    record(&state, &mut samples, &mut states);
    let mut taken = 0;
    for step in 1..=steps {
        if let Some(flag) = &cfg.cancel {
            if flag.load(Ordering::Relaxed) {
                status = RunStatus::Interrupted { t: state.t };
                break;
            }
        }
        // Last step lands exactly on t_end.
        let dt = if step == steps {
            (cfg.t_end - state.t).max(0.0)
        } else {
            cfg.dt
        };
        if dt == 0.0 {
            break;
        }
        match rk.step(&mut state, dt, sys) {
            Ok(()) => {}
            Err(Error::BlowUp { t }) => {
                status = RunStatus::BlowUp { t };
                warnings.push(format!("blow-up detected at t = {t}"));
                break;
            }
            Err(e) => return Err(e),
        }
        taken = step;
        if !near_blowup && state.max_abs() > 1e6 {
            near_blowup = true;
            warnings.push(format!("state magnitude exceeded 1e6 at t = {}", state.t));
        }
        if step % out_every == 0 || step == steps {
            record(&state, &mut samples, &mut states);
        }
        if cfg.progress && steps >= 10 && step % (steps / 10) == 0 {
            eprintln!("  t = {:.3} / {:.3}", state.t, cfg.t_end);
        }
    }
    Ok(Trajectory {
        samples,
        states,
        last: state,
        meta: RunMeta {
            grid: sys.grid,
            dt: cfg.dt,
            steps_taken: taken,
            scenario_hash: None,
            warnings,
            status,
            delay_representation: "transport",
        },
    })
}

/// Validates, samples the initial data and integrates a scenario. Validation
/// failures are errors; blow-up and interruption are reported in the status.
pub fn run(sc: &Scenario, cancel: Option<Arc<AtomicBool>>, progress: bool) -> Result<Trajectory> {
    let mut warnings = sc.validate()?;
    let sampled = sc.sample_initial()?;
    warnings.extend(sampled.warnings);
    let sys = sc.system()?;
    let mut cfg = sc.run_config()?;
    cfg.cancel = cancel;
    cfg.progress = progress;
    let mut traj = integrate(sampled.state, &sys, &cfg)?;
    warnings.append(&mut traj.meta.warnings);
    traj.meta.warnings = warnings;
    traj.meta.scenario_hash = Some(sc.hash());
    Ok(traj)
}

/// Scenario-level entry to [`history::history_buffer_reference_run`].
pub fn run_history_reference(sc: &Scenario) -> Result<Trajectory> {
    let mut warnings = sc.validate()?;
    let sampled = sc.sample_initial()?;
    warnings.extend(sampled.warnings);
    let sys = sc.system()?;
    let cfg = sc.run_config()?;
    let mut traj = history::history_buffer_reference_run(&sampled.state, &sc.initial.f0, &sys, &cfg)?;
    warnings.append(&mut traj.meta.warnings);
    traj.meta.warnings = warnings;
    traj.meta.scenario_hash = Some(sc.hash());
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhysicalParams;

    fn params() -> PhysicalParams {
        PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 1.0)
    }

    fn system(n: usize, m: usize, forcing: ForcingSpec) -> System {
        System {
            params: params(),
            forcing,
            grid: GridSpec::new(n, m).unwrap(),
        }
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(9, 3).unwrap();
        assert!((g.h - 0.1).abs() < 1e-15 && (g.dy - 0.5).abs() < 1e-15);
        let g = build_grid(99, 21).unwrap();
        assert!((g.h - 0.01).abs() < 1e-15 && (g.dy - 0.05).abs() < 1e-15);
        assert!(build_grid(2, 5).is_err());
        assert!(build_grid(5, 2).is_err());
    }

    #[test]
    fn stable_dt_examples() {
        let g = build_grid(99, 21).unwrap();
        let p = params();
        assert!((stable_dt(&g, &p, 0.5) - 0.005).abs() < 1e-15);
        let p4 = PhysicalParams { delta: 4.0, ..p };
        assert!((stable_dt(&g, &p4, 0.5) - 0.0025).abs() < 1e-15);
        let pt = PhysicalParams { tau: 0.001, ..p };
        assert!((stable_dt(&g, &pt, 0.5) - 2.5e-5).abs() < 1e-18);
    }

    #[test]
    fn zero_state_is_equilibrium() {
        let sys = system(10, 5, ForcingSpec::default());
        let s = SimState::zeros(&sys.grid);
        let d = rhs(&s, &sys.params, &sys.forcing, &sys.grid).unwrap();
        assert!(d.as_slice().iter().all(|&x| x == 0.0));
        let next = step_rk4(&s, 0.01, &sys).unwrap();
        assert!(next.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn velocity_only_state_decouples() {
        let sys = system(10, 5, ForcingSpec::default());
        let mut s = SimState::zeros(&sys.grid);
        for (i, v) in s.v_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.7).cos();
        }
        let d = rhs(&s, &sys.params, &sys.forcing, &sys.grid).unwrap();
        assert_eq!(d.u(), s.v());
        assert!(d.v().iter().all(|&x| x == 0.0));
        assert!(d.psi().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_rhs_names_index() {
        let sys = system(6, 3, ForcingSpec::Zero);
        let mut s = SimState::zeros(&sys.grid);
        s.phi_mut()[3] = f64::INFINITY;
        match rhs(&s, &sys.params, &sys.forcing, &sys.grid) {
            Err(Error::NonFinite { field, .. }) => assert_ne!(field, ""),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inflow_identity_after_step() {
        let sys = system(12, 7, ForcingSpec::default());
        let mut s = SimState::zeros(&sys.grid);
        for i in 0..12 {
            s.phi_mut()[i] = (0.3 * i as f64).sin();
            s.psi_mut()[i] = (0.5 * i as f64).cos();
        }
        s.sync_inflow();
        let dt = stable_dt(&sys.grid, &sys.params, 0.5);
        let mut rk = Rk4::new(s.as_slice().len());
        for _ in 0..20 {
            rk.step(&mut s, dt, &sys).unwrap();
            assert_eq!(s.inflow_mismatch(), 0.0);
        }
    }

    #[test]
    fn blow_up_reported() {
        let sys = system(20, 5, ForcingSpec::Zero);
        let mut s = SimState::zeros(&sys.grid);
        s.phi_mut()[10] = 1.0;
        let dt = stable_dt(&sys.grid, &sys.params, 5.0);
        let traj = integrate(s, &sys, &RunConfig::new(50.0, dt)).unwrap();
        assert!(matches!(traj.meta.status, RunStatus::BlowUp { .. }));
        assert!(!traj.samples.is_empty());
    }

    #[test]
    fn cancellation_returns_partial() {
        let sys = system(10, 5, ForcingSpec::Zero);
        let mut cfg = RunConfig::new(10.0, 0.01);
        let flag = Arc::new(AtomicBool::new(true));
        cfg.cancel = Some(flag);
        let traj = integrate(SimState::zeros(&sys.grid), &sys, &cfg).unwrap();
        assert!(matches!(traj.meta.status, RunStatus::Interrupted { .. }));
        assert_eq!(traj.samples.len(), 1);
    }

    #[test]
    fn run_lands_on_t_end() {
        let sys = system(10, 5, ForcingSpec::Zero);
        let cfg = RunConfig::new(1.0, 0.03);
        let traj = integrate(SimState::zeros(&sys.grid), &sys, &cfg).unwrap();
        assert!((traj.samples.last().unwrap().t - 1.0).abs() < 1e-14);
        let t = traj.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
