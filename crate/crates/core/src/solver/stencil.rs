//! Finite-difference stencils shared by the time stepper, the diagnostics and
//! the generator assembly. Boundary values of u and φ are implicit zeros.

/// Central second difference with zero Dirichlet ghosts, scaled by `1/h²`.
#[inline]
pub fn d2(a: &[f64], i: usize, inv_h2: f64) -> f64 {
    let n = a.len();
    let left = if i > 0 { a[i - 1] } else { 0.0 };
    let right = if i + 1 < n { a[i + 1] } else { 0.0 };
    (left - 2.0 * a[i] + right) * inv_h2
}

/// Central first difference with zero Dirichlet ghosts, scaled by `1/2h`.
/// The resulting matrix is exactly skew-symmetric.
#[inline]
pub fn d1(a: &[f64], i: usize, inv_2h: f64) -> f64 {
    let n = a.len();
    let left = if i > 0 { a[i - 1] } else { 0.0 };
    let right = if i + 1 < n { a[i + 1] } else { 0.0 };
    (right - left) * inv_2h
}

pub fn apply_d1(a: &[f64], h: f64, out: &mut [f64]) {
    let inv_2h = 0.5 / h;
    for (i, o) in out.iter_mut().enumerate() {
        *o = d1(a, i, inv_2h);
    }
}

pub fn apply_d2(a: &[f64], h: f64, out: &mut [f64]) {
    let inv_h2 = 1.0 / (h * h);
    for (i, o) in out.iter_mut().enumerate() {
        *o = d2(a, i, inv_h2);
    }
}

/// Cell gradients `(a[k] − a[k−1]) / h` on the N+1 cells between the
/// boundary nodes, boundary zeros included.
pub fn cell_gradient(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    (0..=n)
        .map(|k| {
            let right = if k < n { a[k] } else { 0.0 };
            let left = if k > 0 { a[k - 1] } else { 0.0 };
            (right - left) / h
        })
        .collect()
}

/// First-order upwind transport `z_t = −(1/τ) z_y` on one x-row. `row[0]` is
/// the inflow value and is left untouched in `out`.
#[inline]
pub fn upwind_row(row: &[f64], speed_over_dy: f64, out: &mut [f64]) {
    for j in 1..row.len() {
        out[j] = -speed_over_dy * (row[j] - row[j - 1]);
    }
}
