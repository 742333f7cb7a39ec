//! Energy, H-norm, dissipation and Lyapunov diagnostics.
//!
//! Nodal integrals use the trapezoid rule with the Dirichlet zeros at both
//! ends, i.e. `Σ h a_i`. Squared gradients in the energy use cell differences
//! (N+1 cells) while the coupling term `2b u_x φ` uses the nodal central
//! difference; with this pairing the semi-discrete energy obeys the same
//! dissipation identity as the continuum problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForcingSpec, PhysicalParams};
use crate::solver::{stencil, GridSpec, SimState, System, Trajectory};

/// Multiplier on `(h² + dy + dt⁴)·E(0)` for the dissipation tolerance.
pub const C_TOL: f64 = 10.0;

/// y-quadrature of the delay channel in the energy and H-norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Weights `dy` on `j = 1..M−1`; makes the upwind transport exactly
    /// dissipative in the discrete energy.
    #[default]
    Conservative,
    Trapezoid,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Poincaré constant in `‖φ‖² ≤ cp ‖φ_x‖²`.
    pub cp: f64,
    pub quadrature: Quadrature,
    /// Assumed bound on `|φ|` when the growth constant `c1` of the forcing
    /// term has to be fixed.
    pub phi_sup_bound: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            cp: 1.0 / (std::f64::consts::PI * std::f64::consts::PI),
            quadrature: Quadrature::Conservative,
            phi_sup_bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic_u: f64,
    pub kinetic_phi: f64,
    pub porous_grad: f64,
    pub elastic_grad: f64,
    pub coupling: f64,
    pub porous_zero: f64,
    pub forcing_potential: f64,
    pub delay_channel: f64,
    pub total: f64,
}

fn dot_h(a: &[f64], b: &[f64], h: f64) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn normsq_h(a: &[f64], h: f64) -> f64 {
    dot_h(a, a, h)
}

fn d1(a: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    stencil::apply_d1(a, h, &mut out);
    out
}

/// `Σ_i h Σ_j w_j z_ij²` with the configured y-rule.
fn delay_channel_sq(s: &SimState, g: &GridSpec, q: Quadrature) -> f64 {
    let dy = g.dy;
    let mut acc = 0.0;
    for i in 0..g.n {
        let row = s.z_row(i);
        let m = row.len();
        acc += match q {
            Quadrature::Conservative => dy * row[1..].iter().map(|z| z * z).sum::<f64>(),
            Quadrature::Trapezoid => {
                dy * (row.iter().map(|z| z * z).sum::<f64>()
                    - 0.5 * (row[0] * row[0] + row[m - 1] * row[m - 1]))
            }
            Quadrature::Midpoint => {
                dy * row
                    .windows(2)
                    .map(|w| 0.25 * (w[0] + w[1]) * (w[0] + w[1]))
                    .sum::<f64>()
            }
        };
    }
    g.h * acc
}

fn grid_of(s: &SimState) -> GridSpec {
    GridSpec::new(s.n(), s.m()).expect("state built from a valid grid")
}

pub fn energy(s: &SimState, p: &PhysicalParams, f: &ForcingSpec, cfg: &DiagnosticsConfig) -> EnergyBreakdown {
    let g = grid_of(s);
    let h = g.h;
    let gu = stencil::cell_gradient(s.u(), h);
    let gphi = stencil::cell_gradient(s.phi(), h);
    let du = d1(s.u(), h);
    let mut e = EnergyBreakdown {
        kinetic_u: 0.5 * p.rho * normsq_h(s.v(), h),
        kinetic_phi: 0.5 * p.j * normsq_h(s.psi(), h),
        porous_grad: 0.5 * p.delta * normsq_h(&gphi, h),
        elastic_grad: 0.5 * p.mu * normsq_h(&gu, h),
        coupling: p.b * dot_h(&du, s.phi(), h),
        porous_zero: 0.5 * p.xi * normsq_h(s.phi(), h),
        forcing_potential: if f.is_zero() {
            0.0
        } else {
            h * s.phi().iter().map(|&x| f.potential(x)).sum::<f64>()
        },
        delay_channel: 0.5 * p.eta * delay_channel_sq(s, &g, cfg.quadrature),
        total: 0.0,
    };
    e.total = e.kinetic_u
        + e.kinetic_phi
        + e.porous_grad
        + e.elastic_grad
        + e.coupling
        + e.porous_zero
        + e.forcing_potential
        + e.delay_channel;
    e
}

/// `‖U‖²_H`: twice the energy without the forcing potential.
pub fn h_normsq(s: &SimState, p: &PhysicalParams, cfg: &DiagnosticsConfig) -> f64 {
    2.0 * energy(s, p, &ForcingSpec::Zero, cfg).total
}

/// `∫(μu_x² + 2bu_xφ + ξφ²)` evaluated directly and as the completed square
/// `∫(b/√ξ u_x + √ξ φ)² + (μ − b²/ξ)∫u_x²`, both with nodal `u_x`.
pub fn coupling_form_pair(s: &SimState, p: &PhysicalParams) -> (f64, f64) {
    let h = 1.0 / (s.n() + 1) as f64;
    let ux = d1(s.u(), h);
    let sx = p.xi.sqrt();
    let mut direct = 0.0;
    let mut square = 0.0;
    for (a, phi) in ux.iter().zip(s.phi()) {
        direct += p.mu * a * a + 2.0 * p.b * a * phi + p.xi * phi * phi;
        let c = p.b / sx * a + sx * phi;
        square += c * c + (p.mu - p.b * p.b / p.xi) * a * a;
    }
    (h * direct, h * square)
}

/// Both sides of `∫u_x² ≤ (3ξ/b²)∫(b/√ξ u_x + √ξφ)² + (2ξ²cp/b²)∫φ_x²`.
pub fn ux_bound_pair(s: &SimState, p: &PhysicalParams, cfg: &DiagnosticsConfig) -> (f64, f64) {
    let h = 1.0 / (s.n() + 1) as f64;
    let ux = d1(s.u(), h);
    let gphi = stencil::cell_gradient(s.phi(), h);
    let sx = p.xi.sqrt();
    let comb: Vec<f64> = ux.iter().zip(s.phi()).map(|(a, f)| p.b / sx * a + sx * f).collect();
    let b2 = p.b * p.b;
    let lhs = normsq_h(&ux, h);
    let rhs = 3.0 * p.xi / b2 * normsq_h(&comb, h) + 2.0 * p.xi * p.xi * cfg.cp / b2 * normsq_h(&gphi, h);
    (lhs, rhs)
}

/// `w(x) = −(b/μ)∫₀ˣ φ` on the nodes x_1..x_N by cumulative trapezoid,
/// together with `|w(1)|`.
pub fn solve_w(phi: &[f64], p: &PhysicalParams, g: &GridSpec) -> (Vec<f64>, f64) {
    let c = -p.b / p.mu;
    let mut w = Vec::with_capacity(phi.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &f in phi {
        acc += 0.5 * g.h * (prev + f);
        w.push(c * acc);
        prev = f;
    }
    acc += 0.5 * g.h * prev;
    (w, (c * acc).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    #[serde(rename = "M")]
    pub mw: f64,
    #[serde(rename = "N")]
    pub nw: f64,
    pub eps: f64,
    pub lam2: f64,
    pub lam2t: f64,
    pub beta: f64,
}

impl LyapunovConfig {
    /// Upper bound on ε from the decay proof.
    pub fn eps_cap(p: &PhysicalParams) -> f64 {
        let sx = p.xi.sqrt();
        let b2 = p.b * p.b;
        let a = (sx / 8.0) / (p.xi / 4.0 + 3.0 * p.xi / p.mu + 6.0 * p.xi / b2);
        a.min(sx * p.mu * p.beta() / 64.0)
    }

    /// Constant `C̃` with `|𝓛 − M E| ≤ C̃ E`.
    pub fn equivalence_constant(&self, p: &PhysicalParams, cfg: &DiagnosticsConfig) -> f64 {
        let (sx, cp, b2, eps, n) = (p.xi.sqrt(), cfg.cp, p.b * p.b, self.eps, self.nw);
        let beta = self.beta;
        let a1 = sx * beta / 8.0 + n + p.j * b2 / p.rho + 2.0 * eps / p.mu;
        let a2 = sx * beta / 8.0 + n + 1.0 + p.delta / (2.0 * eps);
        let a3 = sx * beta * cp * (p.j + p.mu) / (8.0 * p.delta)
            + p.xi.powf(2.5) * beta * p.rho * cp * cp / (4.0 * p.delta * b2)
            + n * cp / p.delta * (p.j + p.mu1 + p.rho * p.xi * cp / p.mu)
            + p.j / p.delta
            + p.j / (2.0 * eps)
            + 4.0 * p.rho * p.xi * p.xi * cp * eps / (p.mu * p.delta * b2);
        let a4 = 3.0 * p.xi.powf(1.5) * beta * p.rho * cp / (8.0 * b2)
            + p.j
            + 6.0 * p.rho * p.xi * eps / (p.mu * b2);
        let a5 = 2.0 / p.eta;
        [a1, a2, a3, a4, a5].into_iter().fold(f64::MIN, f64::max)
    }

    /// Checks the smallness conditions of the decay proof.
    pub fn validate(&self, p: &PhysicalParams, cfg: &DiagnosticsConfig) -> Result<()> {
        let fail = |s: String| Err(Error::LyapunovConfig(s));
        if !(self.lam2 > 0.0 && self.lam2 < p.delta / p.mu2) {
            return fail(format!("lam2 < delta/mu2 ({} vs {})", self.lam2, p.delta / p.mu2));
        }
        let cap = Self::eps_cap(p);
        if !(self.eps > 0.0 && self.eps <= cap) {
            return fail(format!("eps <= {cap:e} (got {:e})", self.eps));
        }
        if !(self.nw > 0.0) {
            return fail(format!("N > 0 (got {})", self.nw));
        }
        let cap_t = p.xi.sqrt() * self.beta / (32.0 * self.nw * cfg.cp);
        if !(self.lam2t > 0.0 && self.lam2t < cap_t) {
            return fail(format!("lam2t < sqrt(xi) beta/(32 N cp) = {cap_t:e} (got {:e})", self.lam2t));
        }
        let beta = p.beta();
        if (self.beta - beta).abs() > 1e-14 * beta.abs() {
            return fail(format!("beta = {beta} (got {})", self.beta));
        }
        let c = self.equivalence_constant(p, cfg);
        if !(self.mw > c) {
            return fail(format!("M > {c:e} for a positive lower equivalence bound (got {:e})", self.mw));
        }
        Ok(())
    }
}

/// Right-hand side of the N-inequality in the decay proof, divided by
/// `δ − μ₂λ₂`.
fn n_floor(p: &PhysicalParams, f: &ForcingSpec, cfg: &DiagnosticsConfig, eps: f64, lam2: f64) -> f64 {
    let (sx, cp, b2, d) = (p.xi.sqrt(), cfg.cp, p.b * p.b, p.delta);
    let k0 = f.k0();
    let c1 = k0 * cp * cfg.phi_sup_bound.powf(f.theta());
    let rhs = sx * p.beta() / 8.0 * (d + eps + c1 + 2.0 * p.xi * p.xi * cp / b2 * (p.mu - b2 / p.xi))
        + p.xi * p.xi * cp / (12.0 * sx)
        + 6.0 * k0 / sx
        + d * d / (2.0 * eps)
        + d * d / (4.0 * eps * eps)
        + d * d / 2.0
        + p.xi / p.mu
        + 2.0 * p.xi * p.xi * cp * eps / p.mu
        + 4.0 * p.xi * p.xi * cp * eps / b2;
    rhs / (d - p.mu2 * lam2)
}

/// Coefficients of `∫φ_t²` and `∫z²(x,1)` in the derivative bound, without
/// the `−M C_E` term.
pub fn bracket_terms(p: &PhysicalParams, cfg: &DiagnosticsConfig, l: &LyapunovConfig) -> (f64, f64) {
    let (sx, cp, n, eps) = (p.xi.sqrt(), cfg.cp, l.nw, l.eps);
    let psi = -sx * l.beta * p.j / 8.0
        + n * (p.j + p.rho * p.b * p.b / (4.0 * p.mu * p.mu * l.lam2t))
        + (p.j * sx + p.mu1 * p.mu1 / sx)
        + (p.j * p.delta / (2.0 * eps) + p.mu1 * p.mu1 / (4.0 * eps * eps))
        + 1.0 / p.tau;
    let m2 = p.mu2 * p.mu2;
    let z1 = m2 * cp / (32.0 * eps) + n * m2 * cp / (4.0 * l.lam2)
        + m2 / sx
        + m2 / (4.0 * eps * eps)
        - (-2.0 * p.tau).exp() / p.tau;
    (psi, z1)
}

/// Weights chosen in the order of the decay proof: λ₂, ε, N, λ̃₂, M, each
/// at half its cap or 1.1 times its floor.
pub fn auto_lyapunov_config(p: &PhysicalParams, f: &ForcingSpec, cfg: &DiagnosticsConfig) -> Result<LyapunovConfig> {
    if p.mu2 >= p.mu1 {
        return Err(Error::Hypothesis(format!(
            "decay requires mu2 < mu1 (mu2 = {}, mu1 = {})",
            p.mu2, p.mu1
        )));
    }
    let c_e = p.c_e();
    if c_e <= 0.0 {
        return Err(Error::Hypothesis(format!("C_E = {c_e} must be positive")));
    }
    let beta = p.beta();
    let lam2 = 0.5 * p.delta / p.mu2;
    let eps = 0.5 * LyapunovConfig::eps_cap(p);
    let nw = 1.1 * n_floor(p, f, cfg, eps, lam2).max(0.0);
    let lam2t = 0.5 * p.xi.sqrt() * beta / (32.0 * nw * cfg.cp);
    let mut l = LyapunovConfig {
        mw: 0.0,
        nw,
        eps,
        lam2,
        lam2t,
        beta,
    };
    let (bp, bz) = bracket_terms(p, cfg, &l);
    let m_min = ((bp + 0.01) / c_e).max((bz + 0.01) / c_e).max(0.0);
    l.mw = 1.1 * m_min.max(l.equivalence_constant(p, cfg));
    l.validate(p, cfg)?;
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LyapunovComponents {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub b1: f64,
    pub b2: f64,
    pub w_residual: f64,
}

/// `I1..I4` do not depend on the weights; `B1`, `B2` use `lcfg.eps`.
pub fn lyapunov_components(
    s: &SimState,
    p: &PhysicalParams,
    _f: &ForcingSpec,
    _cfg: &DiagnosticsConfig,
    eps: f64,
) -> LyapunovComponents {
    let g = grid_of(s);
    let h = g.h;
    let (u, v, phi, psi) = (s.u(), s.v(), s.phi(), s.psi());
    let ux = d1(u, h);
    let phix = d1(phi, h);
    let phisq = normsq_h(phi, h);
    let i1 = -(p.rho * dot_h(u, v, h) + p.j * dot_h(phi, psi, h)) - 0.5 * p.mu1 * phisq;
    let (w, w_residual) = solve_w(phi, p, &g);
    let i2 = p.j * dot_h(psi, phi, h) + p.rho * dot_h(v, &w, h) + 0.5 * p.mu1 * phisq;
    let sx = p.xi.sqrt();
    let comb: Vec<f64> = ux.iter().zip(phi).map(|(a, f)| p.b / sx * a + sx * f).collect();
    let i3 = p.j * dot_h(&comb, psi, h) + p.b * p.j / sx * dot_h(&phix, v, h);

    let mut i4 = 0.0;
    let ew: Vec<f64> = (0..g.m)
        .map(|j| {
            let end = if j == 0 || j == g.m - 1 { 0.5 } else { 1.0 };
            end * g.dy * (-2.0 * p.tau * g.y(j)).exp()
        })
        .collect();
    for i in 0..g.n {
        i4 += s.z_row(i).iter().zip(&ew).map(|(z, w)| w * z * z).sum::<f64>();
    }
    i4 *= h;

    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for i in 0..g.n {
        let q = 2.0 - 4.0 * g.x(i);
        b1 += q * psi[i] * phix[i];
        b2 += q * v[i] * ux[i];
    }
    let b1 = p.j * p.delta / (4.0 * eps) * h * b1;
    let b2 = p.rho * eps / p.mu * h * b2;
    LyapunovComponents {
        i1,
        i2,
        i3,
        i4,
        b1,
        b2,
        w_residual,
    }
}

/// `𝓛 − M·E`, the perturbation part of the Lyapunov functional.
pub fn lyapunov_perturbation(c: &LyapunovComponents, p: &PhysicalParams, l: &LyapunovConfig) -> f64 {
    p.xi.sqrt() / 8.0 * l.beta * c.i1 + l.nw * c.i2 + c.i3 + c.b1 + c.b2 + c.i4
}

/// `𝓛 = M E + (√ξ/8) β I1 + N I2 + I3 + B1 + B2 + I4`.
pub fn lyapunov(
    s: &SimState,
    p: &PhysicalParams,
    f: &ForcingSpec,
    cfg: &DiagnosticsConfig,
    lcfg: &LyapunovConfig,
) -> Result<f64> {
    lcfg.validate(p, cfg)?;
    let e = energy(s, p, f, cfg).total;
    let c = lyapunov_components(s, p, f, cfg, lcfg.eps);
    Ok(lcfg.mw * e + lyapunov_perturbation(&c, p, lcfg))
}

/// Diagnostics recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub hnorm_sq: f64,
    pub normsq_u_t: f64,
    pub normsq_phi_t: f64,
    pub normsq_z1: f64,
    pub normsq_z: f64,
    pub components: LyapunovComponents,
    /// `𝓛 − M E`; kept separately to avoid cancellation against the large M.
    pub lyapunov_perturbation: Option<f64>,
    pub lyapunov: Option<f64>,
}

pub fn sample(s: &SimState, sys: &System, cfg: &DiagnosticsConfig, lcfg: Option<&LyapunovConfig>) -> Sample {
    let p = &sys.params;
    let g = &sys.grid;
    let e = energy(s, p, &sys.forcing, cfg);
    let eps = lcfg.map_or(f64::NAN, |l| l.eps);
    let components = lyapunov_components(s, p, &sys.forcing, cfg, eps);
    let pert = lcfg.map(|l| lyapunov_perturbation(&components, p, l));
    let z1 = s.z_outlet();
    Sample {
        t: s.t,
        energy: e,
        hnorm_sq: 2.0 * (e.total - e.forcing_potential),
        normsq_u_t: normsq_h(s.v(), g.h),
        normsq_phi_t: normsq_h(s.psi(), g.h),
        normsq_z1: normsq_h(&z1, g.h),
        normsq_z: g.h * g.dy * s.z().iter().map(|z| z * z).sum::<f64>(),
        components,
        lyapunov_perturbation: pert,
        lyapunov: lcfg.zip(pert).map(|(l, q)| l.mw * e.total + q),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub c_e: f64,
    pub tol: f64,
    /// Smallest slack `−C_E·avg(‖ψ‖² + ‖z1‖²) + tol − ΔE/Δt` over intervals;
    /// negative means a violation.
    pub worst_margin: f64,
    pub violations: usize,
    pub intervals: usize,
    /// Largest `E(t_{n+1}) − E(t_n)` relative to `E(0)`.
    pub max_relative_increase: f64,
}

/// `c_tol·(h² + dy + dt⁴)·E(0)`.
pub fn dissipation_tolerance(g: &GridSpec, dt: f64, e0: f64) -> f64 {
    C_TOL * (g.h * g.h + g.dy + dt.powi(4)) * e0
}

pub fn dissipation_check(traj: &Trajectory, p: &PhysicalParams, _cfg: &DiagnosticsConfig) -> Result<DissipationReport> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Err(Error::TooShort(s.len(), 3));
    }
    let c_e = p.c_e();
    let e0 = s[0].energy.total;
    let tol = dissipation_tolerance(&traj.meta.grid, traj.meta.dt, e0);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut max_inc = f64::NEG_INFINITY;
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        let de = w[1].energy.total - w[0].energy.total;
        let avg = 0.5 * (w[0].normsq_phi_t + w[0].normsq_z1 + w[1].normsq_phi_t + w[1].normsq_z1);
        let slack = -c_e * avg + tol - de / dt;
        if slack < 0.0 {
            violations += 1;
        }
        worst = worst.min(slack);
        max_inc = max_inc.max(if e0 > 0.0 { de / e0 } else { de });
    }
    Ok(DissipationReport {
        c_e,
        tol,
        worst_margin: worst,
        violations,
        intervals: s.len() - 1,
        max_relative_increase: max_inc,
    })
}

/// Range of `𝓛/E` over samples with `E > 0`; computed as `M + pert/E`.
pub fn equivalence_range(traj: &Trajectory, l: &LyapunovConfig) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &traj.samples {
        let e = s.energy.total;
        if let (Some(q), true) = (s.lyapunov_perturbation, e > 0.0) {
            let r = l.mw + q / e;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhysicalParams;
    use std::f64::consts::PI;

    fn a1() -> PhysicalParams {
        PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 1.0)
    }

    fn cfg() -> DiagnosticsConfig {
        DiagnosticsConfig::default()
    }

    #[test]
    fn zero_state_zero_energy() {
        let g = GridSpec::new(10, 5).unwrap();
        let s = SimState::zeros(&g);
        let e = energy(&s, &a1(), &ForcingSpec::default(), &cfg());
        assert_eq!(e, EnergyBreakdown::default());
        assert_eq!(h_normsq(&s, &a1(), &cfg()), 0.0);
    }

    #[test]
    fn kinetic_energy_of_sine() {
        let g = GridSpec::new(100, 5).unwrap();
        let mut s = SimState::zeros(&g);
        for i in 0..g.n {
            s.v_mut()[i] = (PI * g.x(i)).sin();
        }
        let p = PhysicalParams { rho: 2.0, ..a1() };
        let e = energy(&s, &p, &ForcingSpec::default(), &cfg());
        assert!((e.total - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn coupling_identity() {
        let g = GridSpec::new(30, 3).unwrap();
        let mut s = SimState::zeros(&g);
        for i in 0..g.n {
            s.u_mut()[i] = (0.37 * i as f64).sin();
            s.phi_mut()[i] = (1.3 * i as f64).cos();
        }
        let (a, b) = coupling_form_pair(&s, &a1());
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn w_of_sine_2pi() {
        // Cumulative trapezoid error is −(h²/12)(f'(x) − f'(0)) to leading order.
        let p = PhysicalParams { b: 1.0, mu: 1.0, ..a1() };
        let mut worst = Vec::new();
        for n in [100, 200] {
            let g = GridSpec::new(n, 3).unwrap();
            let phi: Vec<f64> = (0..g.n).map(|i| (2.0 * PI * g.x(i)).sin()).collect();
            let (w, r) = solve_w(&phi, &p, &g);
            let mut e_max: f64 = 0.0;
            for (i, wi) in w.iter().enumerate() {
                let x = g.x(i);
                let exact = -(1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
                e_max = e_max.max((wi - exact).abs());
            }
            assert!(r < 1e-12);
            let predicted = g.h * g.h / 12.0 * 4.0 * PI;
            assert!((e_max / predicted - 1.0).abs() < 0.02, "{e_max} vs {predicted}");
            worst.push(e_max);
        }
        assert!(worst[0] <= 1.05e-4, "{worst:?}");
        assert!(((worst[0] / worst[1]).log2() - 2.0).abs() < 0.05);
    }

    #[test]
    fn w_of_constant_has_residual() {
        let g = GridSpec::new(20, 3).unwrap();
        let p = a1();
        let (w, r) = solve_w(&vec![1.0; g.n], &p, &g);
        // interior trapezoid with the zero boundary value loses h/2 at each end
        assert!((w[4] + 0.5 * (g.x(4) - 0.5 * g.h)).abs() < 1e-14);
        assert!((r - 0.5 * (1.0 - g.h)).abs() < 1e-14);
        let (w0, r0) = solve_w(&vec![0.0; g.n], &p, &g);
        assert!(w0.iter().all(|&x| x == 0.0) && r0 == 0.0);
    }

    #[test]
    fn i4_of_sine_delay_channel() {
        let g = GridSpec::new(100, 41).unwrap();
        let mut s = SimState::zeros(&g);
        for i in 0..g.n {
            let v = (PI * g.x(i)).sin();
            s.psi_mut()[i] = v;
            s.z_row_mut(i).fill(v);
        }
        let c = lyapunov_components(&s, &a1(), &ForcingSpec::Zero, &cfg(), 1.0);
        let exact = 0.5 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((c.i4 - exact).abs() <= 1e-4, "{} vs {exact}", c.i4);
    }

    #[test]
    fn i1_vanishes_without_u_phi() {
        let g = GridSpec::new(20, 5).unwrap();
        let mut s = SimState::zeros(&g);
        for i in 0..g.n {
            let v = (PI * g.x(i)).sin();
            s.v_mut()[i] = v;
            s.psi_mut()[i] = v;
        }
        s.sync_inflow();
        let c = lyapunov_components(&s, &a1(), &ForcingSpec::Zero, &cfg(), 1.0);
        assert_eq!(c.i1, 0.0);
    }

    #[test]
    fn auto_config_validates() {
        let p = a1();
        let l = auto_lyapunov_config(&p, &ForcingSpec::default(), &cfg()).unwrap();
        l.validate(&p, &cfg()).unwrap();
        assert!((l.beta - 0.1).abs() < 1e-15);
        let (bp, bz) = bracket_terms(&p, &cfg(), &l);
        assert!(-l.mw * p.c_e() + bp <= -0.01);
        assert!(-l.mw * p.c_e() + bz <= -0.01);
    }

    #[test]
    fn auto_config_rejects_equal_dampings() {
        let p = PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0);
        assert!(auto_lyapunov_config(&p, &ForcingSpec::default(), &cfg()).is_err());
    }

    #[test]
    fn invalid_config_names_condition() {
        let p = a1();
        let mut l = auto_lyapunov_config(&p, &ForcingSpec::default(), &cfg()).unwrap();
        l.eps *= 10.0;
        let err = l.validate(&p, &cfg()).unwrap_err().to_string();
        assert!(err.contains("eps"), "{err}");
    }

    #[test]
    fn lyapunov_linear_in_m() {
        let g = GridSpec::new(12, 4).unwrap();
        let p = a1();
        let f = ForcingSpec::default();
        let mut s = SimState::zeros(&g);
        for i in 0..g.n {
            s.phi_mut()[i] = 0.1 * (PI * g.x(i)).sin();
            s.v_mut()[i] = 0.05 * (2.0 * PI * g.x(i)).sin();
        }
        let l = auto_lyapunov_config(&p, &f, &cfg()).unwrap();
        let l2 = LyapunovConfig { mw: 2.0 * l.mw, ..l };
        let e = energy(&s, &p, &f, &cfg()).total;
        let a = lyapunov(&s, &p, &f, &cfg(), &l).unwrap();
        let b = lyapunov(&s, &p, &f, &cfg(), &l2).unwrap();
        assert!(((b - a) - l.mw * e).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn beta_scale_invariant() {
        // μξ scales by 16 when μ and ξ scale by 4, so b² must scale by 16 too
        let p = a1();
        let q = PhysicalParams {
            rho: 4.0,
            mu: 4.0,
            j: 4.0,
            delta: 4.0,
            xi: 4.0,
            b: 4.0 * p.b,
            ..p
        };
        assert!((p.beta() - q.beta()).abs() < 1e-15);
    }
}
