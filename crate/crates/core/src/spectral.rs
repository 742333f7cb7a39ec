//! Dense generator of the linear semi-discrete system and its weighted
//! inner product.
//!
//! Unknown ordering: `u, v, φ, ψ` (N each), then the z-field rows
//! `y_1..y_{M−1}` node by node. The inflow value `z(·, 0)` is eliminated
//! through `z(·, 0) = ψ`.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PhysicalParams;
use crate::solver::{GridSpec, SimState};

pub type Complex64 = Complex<f64>;

/// Largest generator dimension handed to the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 5000;

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub a: DMatrix<f64>,
    pub wh: DMatrix<f64>,
    pub grid: GridSpec,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `A x` for a full solver state (z inflow column dropped).
    pub fn apply_state(&self, s: &SimState) -> Vec<f64> {
        let x = state_to_vector(s);
        (&self.a * x).iter().copied().collect()
    }
}

fn z_index(g: &GridSpec, i: usize, j: usize) -> usize {
    debug_assert!(j >= 1);
    4 * g.n + i * (g.m - 1) + (j - 1)
}

/// Flattens a solver state into generator ordering.
pub fn state_to_vector(s: &SimState) -> DVector<f64> {
    let g = GridSpec::new(s.n(), s.m()).expect("valid state grid");
    let mut x = DVector::zeros(g.generator_dim());
    x.as_mut_slice()[..4 * g.n].copy_from_slice(&s.as_slice()[..4 * g.n]);
    for i in 0..g.n {
        for j in 1..g.m {
            x[z_index(&g, i, j)] = s.z_row(i)[j];
        }
    }
    x
}

/// Inverse of [`state_to_vector`]; sets `z(·, 0) = ψ`.
pub fn vector_to_state(x: &[f64], g: &GridSpec) -> SimState {
    let mut s = SimState::zeros(g);
    s.as_mut_slice()[..4 * g.n].copy_from_slice(&x[..4 * g.n]);
    for i in 0..g.n {
        for j in 1..g.m {
            s.z_row_mut(i)[j] = x[z_index(g, i, j)];
        }
    }
    s.sync_inflow();
    s
}

pub fn assemble_generator(g: &GridSpec, p: &PhysicalParams) -> GeneratorMatrix {
    let n = g.n;
    let dim = g.generator_dim();
    let mut a = DMatrix::zeros(dim, dim);
    let mut wh = DMatrix::zeros(dim, dim);
    let (iu, iv, iphi, ipsi) = (0, n, 2 * n, 3 * n);
    let h = g.h;
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 0.5 / h;

    for i in 0..n {
        a[(iu + i, iv + i)] = 1.0;
        a[(iphi + i, ipsi + i)] = 1.0;

        a[(iv + i, iu + i)] = -2.0 * p.mu / p.rho * inv_h2;
        a[(ipsi + i, iphi + i)] = -2.0 * p.delta / p.j * inv_h2 - p.xi / p.j;
        a[(ipsi + i, ipsi + i)] = -p.mu1 / p.j;
        a[(ipsi + i, z_index(g, i, g.m - 1))] += -p.mu2 / p.j;
        for (k, sgn) in [(i.wrapping_sub(1), -1.0), (i + 1, 1.0)] {
            if k < n {
                a[(iv + i, iu + k)] = p.mu / p.rho * inv_h2;
                a[(ipsi + i, iphi + k)] = p.delta / p.j * inv_h2;
                a[(iv + i, iphi + k)] = sgn * p.b / p.rho * inv_2h;
                a[(ipsi + i, iu + k)] = -sgn * p.b / p.j * inv_2h;
            }
        }

        let c = 1.0 / (p.tau * g.dy);
        for j in 1..g.m {
            let r = z_index(g, i, j);
            a[(r, r)] = -c;
            let prev = if j == 1 { ipsi + i } else { z_index(g, i, j - 1) };
            a[(r, prev)] += c;
            wh[(r, r)] = p.eta * h * g.dy;
        }

        wh[(iv + i, iv + i)] = p.rho * h;
        wh[(ipsi + i, ipsi + i)] = p.j * h;
        // G^T G / h² is tridiag(−1, 2, −1) / h²
        wh[(iu + i, iu + i)] = 2.0 * p.mu * h * inv_h2;
        wh[(iphi + i, iphi + i)] = 2.0 * p.delta * h * inv_h2 + p.xi * h;
        if i + 1 < n {
            for (blk, coef) in [(iu, p.mu), (iphi, p.delta)] {
                wh[(blk + i, blk + i + 1)] = -coef * h * inv_h2;
                wh[(blk + i + 1, blk + i)] = -coef * h * inv_h2;
            }
            // D1[i][i+1] = 1/2h, D1[i+1][i] = −1/2h; W_uφ = b h D1ᵀ
            let d = p.b * h * inv_2h;
            wh[(iu + i + 1, iphi + i)] = d;
            wh[(iu + i, iphi + i + 1)] = -d;
            wh[(iphi + i, iu + i + 1)] = d;
            wh[(iphi + i + 1, iu + i)] = -d;
        }
    }
    GeneratorMatrix { a, wh, grid: *g }
}

/// `⟨AU, U⟩_H / ⟨U, U⟩_H`.
pub fn rayleigh_quotient(gm: &GeneratorMatrix, x: &DVector<f64>) -> f64 {
    let wx = &gm.wh * x;
    let ax = &gm.a * x;
    ax.dot(&wx) / x.dot(&wx)
}

/// Largest Rayleigh quotient over `trials` random states with entries
/// uniform in [−1, 1].
pub fn dissipativity_check(gm: &GeneratorMatrix, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = gm.dim();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        worst = worst.max(rayleigh_quotient(gm, &x));
    }
    worst
}

pub fn spectrum_of(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let d = a.nrows();
    if d > MAX_DENSE_DIM {
        return Err(Error::ResourceCap(format!(
            "generator dimension {d} exceeds dense limit {MAX_DENSE_DIM}"
        )));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * d.max(10))
        .ok_or_else(|| Error::Eigen(format!("Schur iteration did not converge (dimension {d})")))?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

pub fn spectrum(gm: &GeneratorMatrix) -> Result<Vec<Complex64>> {
    spectrum_of(&gm.a)
}

pub fn spectral_abscissa(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Dimension check without assembling.
pub fn check_dimension(g: &GridSpec) -> Result<usize> {
    let d = g.generator_dim();
    if d > MAX_DENSE_DIM {
        Err(Error::ResourceCap(format!(
            "generator dimension {d} (N = {}, M = {}) exceeds dense limit {MAX_DENSE_DIM}",
            g.n, g.m
        )))
    } else {
        Ok(d)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub abscissa: f64,
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub worst_rayleigh: f64,
    pub params_hash: String,
}
