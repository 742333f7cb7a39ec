//! Delay channel in isolation: `τ z_t + z_y = 0` on one x-row with a
//! prescribed inflow `z(0, t) = g(t)`, discretized exactly as in the coupled
//! solver.

use super::{stencil, Rk4};

/// Integrates one row with inflow `g` to `t_end` and returns the max error
/// against the exact solution `z(y, t) = g(t − τy)` over all y-nodes. The
/// initial row is `g(−τ y_j)`.
pub fn transport_error<G: Fn(f64) -> f64>(m: usize, tau: f64, g: G, t_end: f64, dt: f64) -> f64 {
    let dy = 1.0 / (m - 1) as f64;
    let mut row: Vec<f64> = (0..m).map(|j| g(-tau * j as f64 * dy)).collect();
    let speed = 1.0 / (tau * dy);
    let steps = (t_end / dt).round() as usize;
    let mut rk = Rk4::new(m);
    let stage_c = [0.0, 0.5, 0.5, 1.0];
    let mut t = 0.0;
    for _ in 0..steps {
        let t0 = t;
        rk.step_with(&mut row, dt, |stage, y, out| {
            stencil::upwind_row(y, speed, out);
            // inflow derivative by centred difference of the prescribed g
            let ts = t0 + stage_c[stage] * dt;
            let e = 1e-6;
            out[0] = (g(ts + e) - g(ts - e)) / (2.0 * e);
        });
        t += dt;
        row[0] = g(t);
    }
    (0..m)
        .map(|j| (row[j] - g(t - tau * j as f64 * dy)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_inflow_is_exact() {
        let e = transport_error(11, 1.0, |_| 0.7, 2.0, 0.01);
        assert!(e < 1e-12);
    }

    #[test]
    fn first_order_in_dy() {
        let g = |t: f64| (2.0 * t).sin();
        let errs: Vec<f64> = [21, 41, 81]
            .iter()
            .map(|&m| transport_error(m, 1.0, g, 3.0, 0.2 / 160.0))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 0.9, "order {order} from {errs:?}");
        }
    }
}
