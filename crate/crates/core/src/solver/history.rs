//! Reference integrator that keeps the raw delay `φ_t(x, t − τ)` in a ring
//! buffer instead of the transport field.
//!
//! With `dt = τ/K`, stage `s` of step `n` sits exactly `τ` after stage `s`
//! of step `n − K`, so the buffer stores the four RK stage values of ψ for
//! the last K steps and no interpolation is ever needed. Before `t = τ` the
//! history function is evaluated at the stage time minus τ.

use std::sync::atomic::Ordering;

use super::{
    stencil, RunConfig, RunMeta, RunStatus, Rk4, SimState, System, Trajectory, BLOWUP_THRESHOLD,
};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::model::History;

const STAGE_C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

/// Integer K with `dt = τ/K`, or an error suggesting the nearest one.
pub fn commensurate_k(dt: f64, tau: f64) -> Result<usize> {
    let k = tau / dt;
    let r = k.round();
    if r >= 1.0 && (k - r).abs() <= 1e-9 * r {
        Ok(r as usize)
    } else {
        Err(Error::Incommensurate {
            dt,
            tau,
            suggested_k: r.max(1.0) as usize,
        })
    }
}

fn rhs_delayed(y: &[f64], delayed: &[f64], sys: &System, out: &mut [f64]) {
    let p = &sys.params;
    let g = &sys.grid;
    let n = g.n;
    let inv_h2 = 1.0 / (g.h * g.h);
    let inv_2h = 0.5 / g.h;
    let (u, rest) = y.split_at(n);
    let (v, rest) = rest.split_at(n);
    let (phi, psi) = rest.split_at(n);
    let (du, rest) = out.split_at_mut(n);
    let (dv, rest) = rest.split_at_mut(n);
    let (dphi, dpsi) = rest.split_at_mut(n);
    du.copy_from_slice(v);
    dphi.copy_from_slice(psi);
    for i in 0..n {
        dv[i] = (p.mu / p.rho) * stencil::d2(u, i, inv_h2) + (p.b / p.rho) * stencil::d1(phi, i, inv_2h);
        dpsi[i] = (p.delta * stencil::d2(phi, i, inv_h2)
            - p.b * stencil::d1(u, i, inv_2h)
            - p.xi * phi[i]
            - p.mu1 * psi[i]
            - p.mu2 * delayed[i]
            - sys.forcing.eval(phi[i]))
            / p.j;
    }
}

struct Buffer {
    k: usize,
    n: usize,
    // slot-major: [slot][stage][node]
    data: Vec<f64>,
}

impl Buffer {
    fn slot(&self, step: usize, stage: usize) -> std::ops::Range<usize> {
        let off = ((step % self.k) * 4 + stage) * self.n;
        off..off + self.n
    }
}

/// Builds a full state (with the z-field reconstructed from the buffer) at
/// step `n` for diagnostics and snapshots. `z(y_j) = ψ(t_n − τy_j)`, linear
/// between buffered step values.
fn reconstruct(y: &[f64], n_step: usize, dt: f64, buf: &Buffer, f0: &History, sys: &System) -> SimState {
    let g = &sys.grid;
    let n = g.n;
    let mut s = SimState::zeros(g);
    s.t = n_step as f64 * dt;
    s.as_mut_slice()[..4 * n].copy_from_slice(y);
    let psi_at = |k: usize, i: usize| -> f64 {
        if k == 0 {
            y[3 * n + i]
        } else if k <= n_step {
            buf.data[buf.slot(n_step - k, 0)][i]
        } else {
            f0.eval(g.x(i), -((k - n_step) as f64) * dt)
        }
    };
    for j in 0..g.m {
        let kf = buf.k as f64 * g.y(j);
        let k0 = kf.floor() as usize;
        let frac = kf - k0 as f64;
        for i in 0..n {
            let a = psi_at(k0, i);
            let val = if frac > 1e-12 {
                (1.0 - frac) * a + frac * psi_at(k0 + 1, i)
            } else {
                a
            };
            s.z_row_mut(i)[j] = val;
        }
    }
    s.sync_inflow();
    s
}

/// Integrates the undelayed-form system from `initial` (its z-field is
/// ignored) with history `f0`. Requires `cfg.dt = τ/K`.
pub fn history_buffer_reference_run(initial: &SimState, f0: &History, sys: &System, cfg: &RunConfig) -> Result<Trajectory> {
    let tau = sys.params.tau;
    let k = commensurate_k(cfg.dt, tau)?;
    let dt = tau / k as f64;
    let g = &sys.grid;
    let n = g.n;
    let steps = (cfg.t_end / dt).round() as usize;
    let out_every = cfg.out_every.max(1);
    let mut y = initial.as_slice()[..4 * n].to_vec();
    let mut buf = Buffer {
        k,
        n,
        data: vec![0.0; k * 4 * n],
    };
    let mut rk = Rk4::new(4 * n);
    let mut delayed = vec![0.0; n];
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut status = RunStatus::Completed;
    let mut taken = 0;

    let mut record = |step: usize, y: &[f64], buf: &Buffer, samples: &mut Vec<diagnostics::Sample>| {
        let s = reconstruct(y, step, dt, buf, f0, sys);
        samples.push(diagnostics::sample(&s, sys, &cfg.diagnostics, cfg.lyapunov.as_ref()));
        if let Some(every) = cfg.keep_state_every {
            if (samples.len() - 1).is_multiple_of(every.max(1)) {
                states.push(s);
            }
        }
    };
    record(0, &y, &buf, &mut samples);

    for step in 0..steps {
        if cfg.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            status = RunStatus::Interrupted { t: step as f64 * dt };
            break;
        }
        let t_n = step as f64 * dt;
        rk.step_with(&mut y, dt, |stage, ys, out| {
            let range = buf.slot(step, stage);
            if step >= k {
                delayed.copy_from_slice(&buf.data[range.clone()]);
            } else {
                let ts = t_n + STAGE_C[stage] * dt - tau;
                for (i, d) in delayed.iter_mut().enumerate() {
                    *d = f0.eval(g.x(i), ts);
                }
            }
            buf.data[range].copy_from_slice(&ys[3 * n..4 * n]);
            rhs_delayed(ys, &delayed, sys, out);
        });
        taken = step + 1;
        if y.iter().any(|x| !x.is_finite() || x.abs() > BLOWUP_THRESHOLD) {
            status = RunStatus::BlowUp { t: taken as f64 * dt };
            break;
        }
        if taken % out_every == 0 || taken == steps {
            record(taken, &y, &buf, &mut samples);
        }
    }
    let mut warnings = Vec::new();
    if let RunStatus::BlowUp { t } = status {
        warnings.push(format!("blow-up detected at t = {t}"));
    }
    let last = reconstruct(&y, taken, dt, &buf, f0, sys);
    Ok(Trajectory {
        samples,
        states,
        last,
        meta: RunMeta {
            grid: *g,
            dt,
            steps_taken: taken,
            scenario_hash: None,
            warnings,
            status,
            delay_representation: "history",
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ForcingSpec, PhysicalParams, Profile, Temporal};
    use crate::solver::{integrate, GridSpec};
    use std::f64::consts::PI;

    fn sys(n: usize, m: usize) -> System {
        System {
            params: PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 1.0),
            forcing: ForcingSpec::Zero,
            grid: GridSpec::new(n, m).unwrap(),
        }
    }

    #[test]
    fn rejects_incommensurate_dt() {
        match commensurate_k(0.3, 1.0) {
            Err(Error::Incommensurate { suggested_k, .. }) => assert_eq!(suggested_k, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(commensurate_k(0.01, 1.0).unwrap(), 100);
    }

    #[test]
    fn zero_data_zero_trajectory() {
        let s = sys(8, 5);
        let init = SimState::zeros(&s.grid);
        let traj = history_buffer_reference_run(&init, &History::zero(), &s, &RunConfig::new(2.0, 0.05)).unwrap();
        assert!(traj.samples.iter().all(|x| x.energy.total == 0.0));
    }

    #[test]
    fn zero_history_gives_zero_delay_before_tau() {
        // Before t = τ the delayed term vanishes, so the run must coincide
        // with an undelayed (μ₂ = 0) transport run.
        let s = sys(20, 11);
        let mut init = SimState::zeros(&s.grid);
        for i in 0..20 {
            init.psi_mut()[i] = (PI * s.grid.x(i)).sin();
        }
        init.sync_inflow();
        let mut cfg = RunConfig::new(0.95, 0.05);
        cfg.keep_state_every = Some(1);
        let undelayed = System {
            params: PhysicalParams { mu2: 0.0, ..s.params },
            ..s.clone()
        };
        let a = integrate(init.clone(), &undelayed, &cfg).unwrap();
        let b = history_buffer_reference_run(&init, &History::zero(), &s, &cfg).unwrap();
        assert_eq!(a.states.len(), b.states.len());
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in x.phi().iter().zip(y.phi()) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reconstruction_uses_history_before_start() {
        let s = sys(6, 5);
        let f0 = History {
            profile: Profile::SineMode { k: 1, amp: 1.0 },
            temporal: Temporal::Exp(1.0),
        };
        let buf = Buffer {
            k: 4,
            n: 6,
            data: vec![0.0; 4 * 4 * 6],
        };
        let mut y = vec![0.0; 24];
        for i in 0..6 {
            y[18 + i] = f0.eval(s.grid.x(i), 0.0);
        }
        let st = reconstruct(&y, 0, 0.25, &buf, &f0, &s);
        for i in 0..6 {
            for j in 0..5 {
                let exact = f0.eval(s.grid.x(i), -s.grid.y(j));
                assert!((st.z_row(i)[j] - exact).abs() < 1e-14);
            }
        }
    }
}
