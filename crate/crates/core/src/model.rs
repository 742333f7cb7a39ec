//! Physical coefficients, the nonlinear forcing, initial data and the
//! admissibility checks that gate every run.
//!
//! The system being modelled is
//!
//! ```text
//! ρ u_tt − μ u_xx − b φ_x = 0
//! J φ_tt − δ φ_xx + b u_x + ξ φ + μ₁ φ_t(t) + μ₂ φ_t(t − τ) + f(φ) = 0
//! ```
//!
//! on (0,1) with Dirichlet data for u and φ. The delay weight η enters the
//! energy only; it must lie in `[τμ₂, τ(2μ₁ − μ₂)]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{GridSpec, SimState};

/// Relative tolerance for the equal-wave-speed test ρ/μ = J/δ.
pub const EQUAL_SPEED_RTOL: f64 = 1e-12;

/// Tolerance on `f0(x, 0⁻) − φ₁(x)` before a compatibility warning is raised.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub rho: f64,
    pub mu: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub delta: f64,
    pub xi: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub tau: f64,
    pub eta: f64,
}

impl PhysicalParams {
    /// Builds a parameter set with η at the midpoint of its admissible window.
    #[allow(clippy::too_many_arguments)]
    pub fn with_midpoint_eta(
        rho: f64,
        mu: f64,
        j: f64,
        delta: f64,
        xi: f64,
        b: f64,
        mu1: f64,
        mu2: f64,
        tau: f64,
    ) -> Self {
        let mut p = Self {
            rho,
            mu,
            j,
            delta,
            xi,
            b,
            mu1,
            mu2,
            tau,
            eta: 0.0,
        };
        p.eta = admissible_eta_interval(&p).midpoint();
        p
    }

    /// ρ/μ − J/δ; zero exactly when the two wave speeds coincide.
    pub fn speed_defect(&self) -> f64 {
        self.rho / self.mu - self.j / self.delta
    }

    pub fn equal_speed(&self) -> bool {
        let a = self.rho / self.mu;
        let c = self.j / self.delta;
        (a - c).abs() <= EQUAL_SPEED_RTOL * a.abs().max(c.abs())
    }

    /// Dissipation constant `min{μ₁ − μ₂/2 − η/2τ, η/2τ − μ₂/2}` of the energy
    /// inequality. Nonpositive outside the η window.
    pub fn c_e(&self) -> f64 {
        let r = self.eta / (2.0 * self.tau);
        (self.mu1 - 0.5 * self.mu2 - r).min(r - 0.5 * self.mu2)
    }

    /// β = [3(μξ/b² − 1) + 1]⁻¹. Depends on μξ/b² only.
    pub fn beta(&self) -> f64 {
        1.0 / (3.0 * (self.mu * self.xi / (self.b * self.b) - 1.0) + 1.0)
    }
}

/// Closed interval `[τμ₂, τ(2μ₁ − μ₂)]` of admissible delay weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl EtaInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    /// Single-point window (μ₂ = μ₁); the dissipation constant vanishes there.
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, eta: f64) -> bool {
        self.lo <= eta && eta <= self.hi
    }
}

pub fn admissible_eta_interval(p: &PhysicalParams) -> EtaInterval {
    EtaInterval {
        lo: p.tau * p.mu2,
        hi: p.tau * (2.0 * p.mu1 - p.mu2),
    }
}

/// One violated hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub name: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub admissible: bool,
    /// Strict μ₂ < μ₁, required for exponential decay.
    pub decay_hypothesis: bool,
    pub equal_speed: bool,
    pub speed_defect: f64,
    pub eta_interval: EtaInterval,
    pub c_e: f64,
    /// C_E = 0 (single-point η window or η on an edge).
    pub degenerate: bool,
}

impl ValidationReport {
    pub fn has(&self, name: &str) -> bool {
        self.violations.iter().any(|v| v.name == name)
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Converts a failed report into [`Error::Hypothesis`].
    pub fn into_result(self) -> Result<Self> {
        if self.admissible {
            Ok(self)
        } else {
            Err(Error::Hypothesis(self.summary()))
        }
    }
}

pub fn validate_params(p: &PhysicalParams) -> ValidationReport {
    let mut violations = Vec::new();
    let positive: [(&'static str, f64); 9] = [
        ("rho > 0", p.rho),
        ("mu > 0", p.mu),
        ("J > 0", p.j),
        ("delta > 0", p.delta),
        ("xi > 0", p.xi),
        ("mu1 > 0", p.mu1),
        ("mu2 > 0", p.mu2),
        ("tau > 0", p.tau),
        ("eta > 0", p.eta),
    ];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            violations.push(Violation {
                name,
                detail: format!("got {value}"),
            });
        }
    }
    if !(p.b != 0.0 && p.b.is_finite()) {
        violations.push(Violation {
            name: "b ≠ 0",
            detail: format!("got {}", p.b),
        });
    }
    if p.b * p.b > p.mu * p.xi {
        violations.push(Violation {
            name: "b² ≤ μξ",
            detail: format!("{} > {}", p.b * p.b, p.mu * p.xi),
        });
    }
    let window = admissible_eta_interval(p);
    if p.eta < window.lo {
        violations.push(Violation {
            name: "η ≥ τμ₂",
            detail: format!("{} < {}", p.eta, window.lo),
        });
    }
    if p.eta > window.hi {
        violations.push(Violation {
            name: "η ≤ τ(2μ₁−μ₂)",
            detail: format!("{} > {}", p.eta, window.hi),
        });
    }
    let c_e = p.c_e();
    ValidationReport {
        admissible: violations.is_empty(),
        violations,
        decay_hypothesis: p.mu2 < p.mu1,
        equal_speed: p.equal_speed(),
        speed_defect: p.speed_defect(),
        eta_interval: window,
        c_e,
        degenerate: c_e.abs() <= 1e-15,
    }
}

// ---------------------------------------------------------------------------
// Forcing
// ---------------------------------------------------------------------------

/// Nonlinear restoring force f(φ) and its potential f̂(s) = ∫₀ˢ f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Zero,
    /// f(s) = k₀|s|^θ s.
    PowerLaw { k0: f64, theta: f64 },
    CustomTable { table: ForcingTable },
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec::PowerLaw { k0: 1.0, theta: 1.0 }
    }
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingSpec::Zero => Ok(()),
            ForcingSpec::PowerLaw { k0, theta } => {
                if !(*k0 >= 0.0 && k0.is_finite()) {
                    return Err(Error::Forcing(format!("k0 must be >= 0, got {k0}")));
                }
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(Error::Forcing(format!("theta must be > 0, got {theta}")));
                }
                Ok(())
            }
            ForcingSpec::CustomTable { table } => ForcingTable::new(table.points.clone()).map(|_| ()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingSpec::Zero => true,
            ForcingSpec::PowerLaw { k0, .. } => *k0 == 0.0,
            ForcingSpec::CustomTable { table } => table.points.iter().all(|&(_, f)| f == 0.0),
        }
    }

    /// Growth constant k₀ (zero for the linear system). Tables report the
    /// largest secant slope |f(s)/s|, with θ taken as 1.
    pub fn k0(&self) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::PowerLaw { k0, .. } => *k0,
            ForcingSpec::CustomTable { table } => table
                .points
                .iter()
                .filter(|(s, _)| *s != 0.0)
                .map(|(s, f)| (f / s).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            ForcingSpec::PowerLaw { theta, .. } => *theta,
            _ => 1.0,
        }
    }

    /// Factor c(θ) = max(1, 2^{θ−1}) in
    /// `|f(x) − f(y)| ≤ k₀ c(θ) (|x|^θ + |y|^θ) |x − y|`.
    pub fn lipschitz_factor(&self) -> f64 {
        1f64.max(2f64.powf(self.theta() - 1.0))
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::PowerLaw { k0, theta } => {
                if *theta == 1.0 {
                    k0 * s.abs() * s
                } else {
                    k0 * s.abs().powf(*theta) * s
                }
            }
            ForcingSpec::CustomTable { table } => table.eval(s),
        }
    }

    pub fn potential(&self, s: f64) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::PowerLaw { k0, theta } => {
                k0 * s.abs().powf(theta + 2.0) / (theta + 2.0)
            }
            ForcingSpec::CustomTable { table } => table.potential(s),
        }
    }
}

pub fn forcing_eval(spec: &ForcingSpec, s: f64) -> f64 {
    spec.eval(s)
}

pub fn forcing_potential(spec: &ForcingSpec, s: f64) -> f64 {
    spec.potential(s)
}

/// Piecewise-linear forcing through tabulated `(s, f(s))` points, extended
/// outside the table along the ray through the origin and the end point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ForcingTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for ForcingTable {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        ForcingTable::new(points)
    }
}

impl From<ForcingTable> for Vec<(f64, f64)> {
    fn from(t: ForcingTable) -> Self {
        t.points
    }
}

impl ForcingTable {
    /// Sorts the points and rejects tables with `f(s)·s < 0` anywhere.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Forcing("table needs at least two points".into()));
        }
        if points.iter().any(|(s, f)| !s.is_finite() || !f.is_finite()) {
            return Err(Error::Forcing("table contains non-finite entries".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Forcing("table abscissae must be distinct".into()));
        }
        for &(s, f) in &points {
            if f * s < 0.0 {
                return Err(Error::Forcing(format!(
                    "f(s)·s < 0 at s = {s} (f = {f}); violates 0 ≤ f̂(s) ≤ f(s)s"
                )));
            }
        }
        let table = ForcingTable { points };
        let (lo, hi) = (table.points[0].0, table.points[table.points.len() - 1].0);
        if lo <= 0.0 && 0.0 <= hi {
            let f0 = table.eval(0.0);
            if f0.abs() > 1e-14 {
                return Err(Error::Forcing(format!(
                    "f(0) = {f0} ≠ 0, so f(s)·s < 0 near s = 0"
                )));
            }
        }
        Ok(table)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, s: f64) -> f64 {
        let pts = &self.points;
        let (s_first, f_first) = pts[0];
        let (s_last, f_last) = pts[pts.len() - 1];
        if s > s_last {
            return if s_last > 0.0 { f_last * s / s_last } else { 0.0 };
        }
        if s < s_first {
            return if s_first < 0.0 { f_first * s / s_first } else { 0.0 };
        }
        let k = pts.partition_point(|&(x, _)| x <= s).clamp(1, pts.len() - 1);
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }

    /// ∫₀ˢ f by adaptive Simpson quadrature (absolute tolerance 1e-12).
    pub fn potential(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let (a, b, sign) = if s > 0.0 { (0.0, s, 1.0) } else { (s, 0.0, -1.0) };
        // Split at the table nodes so every panel sees a single linear piece.
        let mut cuts = vec![a];
        cuts.extend(self.points.iter().map(|p| p.0).filter(|&x| x > a && x < b));
        cuts.push(b);
        let total: f64 = cuts
            .windows(2)
            .map(|w| adaptive_simpson(&|x| self.eval(x), w[0], w[1], 1e-12 / cuts.len() as f64, 40))
            .sum();
        (sign * total).max(0.0)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Spatial profile on [0,1]. Parsed from and printed as the preset strings
/// used in scenario files: `zero`, `sine_mode:k[,amp]`,
/// `gaussian_bump:center,width,amp`, `poly:c0,c1,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    SineMode { k: u32, amp: f64 },
    GaussianBump { center: f64, width: f64, amp: f64 },
    Poly(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::SineMode { k, amp } => amp * (f64::from(*k) * std::f64::consts::PI * x).sin(),
            Profile::GaussianBump { center, width, amp } => {
                let r = (x - center) / width;
                amp * (-r * r).exp()
            }
            Profile::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Scenario(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(Profile::Zero);
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Scenario(format!("unknown profile preset {s:?}")))?;
        let v = parse_floats(args)?;
        match (name.trim(), v.as_slice()) {
            ("sine_mode", [k]) | ("sine_mode", [k, _]) if *k >= 1.0 && k.fract() == 0.0 => {
                Ok(Profile::SineMode {
                    k: *k as u32,
                    amp: v.get(1).copied().unwrap_or(1.0),
                })
            }
            ("gaussian_bump", [c, w, a]) if *w > 0.0 => Ok(Profile::GaussianBump {
                center: *c,
                width: *w,
                amp: *a,
            }),
            ("poly", c) if !c.is_empty() => Ok(Profile::Poly(c.to_vec())),
            _ => Err(Error::Scenario(format!("malformed profile preset {s:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::SineMode { k, amp } => write!(f, "sine_mode:{k},{amp}"),
            Profile::GaussianBump { center, width, amp } => {
                write!(f, "gaussian_bump:{center},{width},{amp}")
            }
            Profile::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

/// Time factor of a separable history `f0(x, s) = profile(x)·g(s)`, s ∈ [−τ, 0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temporal {
    Const,
    /// g(s) = e^{rate·s}
    Exp(f64),
    /// g(s) = cos(ω s)
    Cos(f64),
}

impl Temporal {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Temporal::Const => 1.0,
            Temporal::Exp(r) => (r * s).exp(),
            Temporal::Cos(w) => (w * s).cos(),
        }
    }
}

/// History of φ_t on (0,1)×(−τ,0). Preset syntax: `<profile> [| <temporal>]`
/// with temporal one of `const`, `exp:r`, `cos:w`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub profile: Profile,
    pub temporal: Temporal,
}

impl History {
    pub fn zero() -> Self {
        History {
            profile: Profile::Zero,
            temporal: Temporal::Const,
        }
    }

    pub fn eval(&self, x: f64, s: f64) -> f64 {
        self.profile.eval(x) * self.temporal.eval(s)
    }
}

impl FromStr for History {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, t) = match s.split_once('|') {
            Some((p, t)) => (p, Some(t.trim())),
            None => (s, None),
        };
        let profile = p.parse()?;
        let temporal = match t {
            None | Some("const") => Temporal::Const,
            Some(t) => {
                let (name, arg) = t
                    .split_once(':')
                    .ok_or_else(|| Error::Scenario(format!("malformed temporal factor {t:?}")))?;
                let v: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|e| Error::Scenario(format!("bad number {arg:?}: {e}")))?;
                match name.trim() {
                    "exp" => Temporal::Exp(v),
                    "cos" => Temporal::Cos(v),
                    other => return Err(Error::Scenario(format!("unknown temporal factor {other:?}"))),
                }
            }
        };
        Ok(History { profile, temporal })
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.temporal {
            Temporal::Const => write!(f, "{}", self.profile),
            Temporal::Exp(r) => write!(f, "{} | exp:{r}", self.profile),
            Temporal::Cos(w) => write!(f, "{} | cos:{w}", self.profile),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(Profile);
string_serde!(History);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialData {
    pub u0: Profile,
    pub u1: Profile,
    pub phi0: Profile,
    pub phi1: Profile,
    pub f0: History,
}

impl Default for InitialData {
    fn default() -> Self {
        Self::zero()
    }
}

impl InitialData {
    pub fn zero() -> Self {
        InitialData {
            u0: Profile::Zero,
            u1: Profile::Zero,
            phi0: Profile::Zero,
            phi1: Profile::Zero,
            f0: History::zero(),
        }
    }
}

/// Result of sampling initial data; carries the compatibility warning when
/// `f0(·, 0⁻)` and `φ₁` disagree.
#[derive(Debug, Clone)]
pub struct SampledInitial {
    pub state: SimState,
    pub compatibility_gap: f64,
    pub warnings: Vec<String>,
}

/// Samples initial data on the grid. Boundary values are implicit zeros;
/// `z(x_i, y_j, 0) = f0(x_i, −τ y_j)` for j ≥ 1 and `z(·, 0, 0) = ψ(·, 0)`.
pub fn sample_initial_data(d: &InitialData, g: &GridSpec, tau: f64) -> Result<SampledInitial> {
    let mut state = SimState::zeros(g);
    let mut gap: f64 = 0.0;
    for i in 0..g.n {
        let x = g.x(i);
        let vals = [
            ("u0", d.u0.eval(x)),
            ("u1", d.u1.eval(x)),
            ("phi0", d.phi0.eval(x)),
            ("phi1", d.phi1.eval(x)),
        ];
        for (field, v) in vals {
            if !v.is_finite() {
                return Err(Error::InitialData { field, x });
            }
        }
        state.u_mut()[i] = vals[0].1;
        state.v_mut()[i] = vals[1].1;
        state.phi_mut()[i] = vals[2].1;
        state.psi_mut()[i] = vals[3].1;
        let row = state.z_row_mut(i);
        row[0] = vals[3].1;
        for (j, zij) in row.iter_mut().enumerate().skip(1) {
            let s = -tau * g.y(j);
            let val = d.f0.eval(x, s);
            if !val.is_finite() {
                return Err(Error::InitialData { field: "f0", x });
            }
            *zij = val;
        }
        gap = gap.max((d.f0.eval(x, 0.0) - vals[3].1).abs());
    }
    let mut warnings = Vec::new();
    if gap > COMPATIBILITY_TOL {
        warnings.push(format!(
            "history incompatible with phi1: max |f0(x,0-) - phi1(x)| = {gap:.3e} > {COMPATIBILITY_TOL:e}"
        ));
    }
    Ok(SampledInitial {
        state,
        compatibility_gap: gap,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PhysicalParams {
        PhysicalParams {
            rho: 1.0,
            mu: 1.0,
            j: 1.0,
            delta: 1.0,
            xi: 1.0,
            b: 0.5,
            mu1: 0.5,
            mu2: 0.25,
            tau: 1.0,
            eta: 0.5,
        }
    }

    #[test]
    fn admissible_base_case() {
        let r = validate_params(&base());
        assert!(r.admissible, "{}", r.summary());
        assert!(r.equal_speed);
        assert!(r.decay_hypothesis);
        assert!((r.c_e - 0.125).abs() < 1e-15);
    }

    #[test]
    fn eta_one_exceeds_window_for_base_damping() {
        let p = PhysicalParams { eta: 1.0, ..base() };
        let r = validate_params(&p);
        assert!(!r.admissible);
        assert!(r.has("η ≤ τ(2μ₁−μ₂)"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn coupling_too_strong() {
        let p = PhysicalParams { b: 1.5, ..base() };
        let r = validate_params(&p);
        assert!(r.has("b² ≤ μξ"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn eta_below_window() {
        let p = PhysicalParams {
            mu2: 0.6,
            eta: 0.3,
            ..base()
        };
        let r = validate_params(&p);
        assert!(r.has("η ≥ τμ₂"));
        assert!(!r.has("η ≤ τ(2μ₁−μ₂)"));
        assert!(!r.decay_hypothesis);
    }

    #[test]
    fn nonpositive_and_zero_coupling_named() {
        let p = PhysicalParams {
            rho: 0.0,
            b: 0.0,
            ..base()
        };
        let r = validate_params(&p);
        assert!(r.has("rho > 0"));
        assert!(r.has("b ≠ 0"));
    }

    #[test]
    fn negative_b_is_admissible() {
        let p = PhysicalParams { b: -0.5, ..base() };
        assert!(validate_params(&p).admissible);
    }

    #[test]
    fn eta_interval_examples() {
        let p = PhysicalParams {
            tau: 1.0,
            mu1: 1.0,
            mu2: 0.5,
            ..base()
        };
        let w = admissible_eta_interval(&p);
        assert_eq!((w.lo, w.hi), (0.5, 1.5));
        assert_eq!(w.midpoint(), 1.0);

        let p = PhysicalParams {
            tau: 2.0,
            mu1: 1.0,
            mu2: 1.0,
            ..base()
        };
        let w = admissible_eta_interval(&p);
        assert_eq!((w.lo, w.hi), (2.0, 2.0));
        assert!(w.is_degenerate());
        let p = PhysicalParams { eta: 2.0, ..p };
        assert_eq!(p.c_e(), 0.0);
        assert!(validate_params(&p).degenerate);

        let p = PhysicalParams {
            tau: 1.0,
            mu1: 0.4,
            mu2: 1.0,
            ..base()
        };
        assert!(admissible_eta_interval(&p).is_empty());
    }

    #[test]
    fn midpoint_eta_maximizes_c_e() {
        let p = PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 1.0);
        assert_eq!(p.eta, 0.5);
        let best = p.c_e();
        for k in 0..=20 {
            let eta = 0.25 + 0.5 * f64::from(k) / 20.0;
            assert!(PhysicalParams { eta, ..p }.c_e() <= best + 1e-15);
        }
    }

    #[test]
    fn forcing_examples() {
        let f = ForcingSpec::PowerLaw { k0: 1.0, theta: 2.0 };
        assert_eq!(f.eval(-2.0), -8.0);
        assert!((f.potential(-2.0) - 4.0).abs() < 1e-14);

        assert_eq!(ForcingSpec::Zero.eval(7.0), 0.0);
        assert_eq!(ForcingSpec::Zero.potential(7.0), 0.0);

        let f = ForcingSpec::PowerLaw { k0: 0.3, theta: 1.0 };
        assert!((f.eval(0.5) - 0.075).abs() < 1e-15);
        assert!((f.potential(0.5) - 0.0125).abs() < 1e-15);
        assert!(f.potential(0.5) <= f.eval(0.5) * 0.5);
    }

    #[test]
    fn table_forcing_potential_matches_power_law() {
        let pts: Vec<(f64, f64)> = (-40..=40)
            .map(|k| {
                let s = f64::from(k) * 0.05;
                (s, s.abs() * s)
            })
            .collect();
        let f = ForcingSpec::CustomTable {
            table: ForcingTable::new(pts).unwrap(),
        };
        // Piecewise-linear interpolant of s|s|; its exact integral on [0, 1.5]
        // differs from 1.5³/3 by the chord error Σ h³/6 over 30 panels.
        let chord = 30.0 * 0.05f64.powi(3) / 6.0;
        assert!((f.potential(1.5) - (1.125 + chord)).abs() < 1e-12);
        assert!((f.potential(-1.5) - (1.125 + chord)).abs() < 1e-12);
        for s in [-1.9, -0.33, 0.0, 0.01, 1.2] {
            assert!(f.potential(s) >= 0.0);
        }
    }

    #[test]
    fn table_rejects_wrong_sign() {
        let err = ForcingTable::new(vec![(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("f(s)·s < 0"));
        let err = ForcingTable::new(vec![(-1.0, -0.5), (1.0, 1.5)]).unwrap_err();
        assert!(err.to_string().contains("f(0)"));
    }

    #[test]
    fn profile_presets_round_trip() {
        for s in [
            "zero",
            "sine_mode:2,0.1",
            "gaussian_bump:0.5,0.1,2",
            "poly:0,1,-1",
        ] {
            let p: Profile = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
        }
        let p: Profile = "sine_mode:1".parse().unwrap();
        assert_eq!(p, Profile::SineMode { k: 1, amp: 1.0 });
        let p: Profile = "poly:0,1,-1".parse().unwrap();
        assert!((p.eval(0.5) - 0.25).abs() < 1e-15);
        assert!("sine_mode:0".parse::<Profile>().is_err());
        assert!("bogus:1".parse::<Profile>().is_err());

        let h: History = "sine_mode:1 | exp:1".parse().unwrap();
        assert!((h.eval(0.5, -1.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(h.to_string().parse::<History>().unwrap(), h);
    }

    #[test]
    fn zero_data_samples_to_zero_state() {
        let g = GridSpec::new(9, 3).unwrap();
        let s = sample_initial_data(&InitialData::zero(), &g, 1.0).unwrap();
        assert!(s.state.as_slice().iter().all(|&x| x == 0.0));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn history_sampled_along_delay_axis() {
        let g = GridSpec::new(19, 11).unwrap();
        let tau = 0.7;
        let d = InitialData {
            phi1: "sine_mode:1".parse().unwrap(),
            f0: "sine_mode:1 | exp:1".parse().unwrap(),
            ..InitialData::zero()
        };
        let s = sample_initial_data(&d, &g, tau).unwrap();
        for i in 0..g.n {
            let x = g.x(i);
            let row = s.state.z_row(i);
            assert_eq!(row[0], s.state.psi()[i]);
            for (j, &z) in row.iter().enumerate() {
                let want = (std::f64::consts::PI * x).sin() * (-tau * g.y(j)).exp();
                assert!((z - want).abs() < 1e-14);
            }
        }
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn incompatible_history_warns() {
        let g = GridSpec::new(9, 3).unwrap();
        let d = InitialData {
            phi1: "sine_mode:1".parse().unwrap(),
            ..InitialData::zero()
        };
        let s = sample_initial_data(&d, &g, 1.0).unwrap();
        assert!(s.compatibility_gap > 0.9);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn non_finite_data_names_node() {
        let g = GridSpec::new(9, 3).unwrap();
        let d = InitialData {
            u0: Profile::Poly(vec![f64::NAN]),
            ..InitialData::zero()
        };
        match sample_initial_data(&d, &g, 1.0) {
            Err(Error::InitialData { field, x }) => {
                assert_eq!(field, "u0");
                assert!((x - 0.1).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
