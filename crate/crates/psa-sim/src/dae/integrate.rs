//! Adaptive ESDIRK integration of semi-explicit index-1 DAEs.
//!
//! Stage equations are solved by modified Newton with a single factorization
//! of the iteration matrix
//!
//! `M = [[I - h*gamma*df/dx, -h*gamma*df/dy], [dg/dx, dg/dy]]`
//!
//! reused across all stages of a step. Stiff accuracy makes the last stage
//! the advancing state, so algebraic consistency `g = 0` holds at every
//! accepted point to stage-Newton tolerance. Embedded error estimates drive a
//! PID step controller; integration restarts at prescribed event times where
//! boundary-condition data changes discontinuously.

use super::controller::StepController;
use super::tableau::ButcherTableau;
use super::{DaeError, DaeJacobian, DaeSystem};
use crate::linalg::{factorize, FactorizedMatrix};

/// Integration statistics, accumulated across all segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Statistics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_failures: usize,
    pub newton_iterations: usize,
    pub factorizations: usize,
    pub f_evaluations: usize,
    pub jacobian_evaluations: usize,
}

/// Callback interface for trajectory observation and quadrature accumulation.
///
/// `on_stage` is invoked once per stage of every *accepted* step with the
/// quadrature weight `h * b_i`, enabling integral accumulation consistent
/// with the scheme's order; `on_accepted` follows with the advancing state.
pub trait Observer {
    fn on_stage(&mut self, _t: f64, _x: &[f64], _y: &[f64], _weight: f64) {}
    fn on_accepted(&mut self, _t: f64, _x: &[f64], _y: &[f64]) {}
}

/// Observer that records nothing.
pub struct NoopObserver;
impl Observer for NoopObserver {}

/// Terminal state and statistics of one integration.
#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stats: Statistics,
    /// Last accepted step size [s] (step-size continuation across restarts).
    pub h_last: f64,
}

/// Hook invoked after each accepted step with full stage data; used by the
/// staggered direct sensitivity propagation.
pub(crate) trait StepHook {
    #[allow(clippy::too_many_arguments)]
    fn on_step_accepted(
        &mut self,
        t_n: f64,
        h: f64,
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
        fac: &FactorizedMatrix,
        tableau: &ButcherTableau,
    ) -> Result<(), DaeError>;
}

/// Integrate `system` from `(x0, y0)` over `[t0, tf]`.
///
/// `events` lists interior times where boundary data changes discontinuously;
/// integration stops exactly at each event and restarts with a reduced step.
pub fn integrate(
    system: &dyn DaeSystem,
    tableau: &ButcherTableau,
    controller: &mut StepController,
    x0: &[f64],
    y0: &[f64],
    t0: f64,
    tf: f64,
    events: &[f64],
    observer: &mut dyn Observer,
) -> Result<IntegrationResult, DaeError> {
    integrate_impl(
        system, tableau, controller, x0, y0, t0, tf, events, observer, None,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_impl(
    system: &dyn DaeSystem,
    tableau: &ButcherTableau,
    controller: &mut StepController,
    x0: &[f64],
    y0: &[f64],
    t0: f64,
    tf: f64,
    events: &[f64],
    observer: &mut dyn Observer,
    mut hook: Option<&mut dyn StepHook>,
) -> Result<IntegrationResult, DaeError> {
    let n_x = system.n_x();
    let n_y = system.n_y();
    assert_eq!(x0.len(), n_x);
    assert_eq!(y0.len(), n_y);
    let s = tableau.s;
    let mut stats = Statistics::default();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();

    if tf <= t0 {
        return Ok(IntegrationResult {
            t: t0,
            x,
            y,
            stats,
            h_last: 0.0,
        });
    }

    // Segment boundaries: t0 < events... < tf.
    let mut bounds: Vec<f64> = vec![t0];
    for &e in events {
        if e > t0 + 1e-14 && e < tf - 1e-14 {
            bounds.push(e);
        }
    }
    bounds.push(tf);
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Workspaces.
    let mut jac = DaeJacobian::new(n_x, n_y);
    let mut jac_stale;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut xs: Vec<Vec<f64>> = vec![vec![0.0; n_x]; s];
    let mut ys: Vec<Vec<f64>> = vec![vec![0.0; n_y]; s];
    let mut fs: Vec<Vec<f64>> = vec![vec![0.0; n_x]; s];
    let mut rhs_known = vec![0.0; n_x];
    let mut res = vec![0.0; n_x + n_y];
    let mut err_vec = vec![0.0; n_x];
    let backend = system.backend();
    let estimator_order = tableau.embedded_order + 1;

    let mut h_prev: Option<f64> = None;

    for seg in 0..bounds.len() - 1 {
        let t_start = bounds[seg];
        let t_end = bounds[seg + 1];
        let duration = t_end - t_start;
        controller.reset();
        jac_stale = true;
        let mut h = match (h_prev, controller.h_init) {
            (Some(hp), _) => hp.min(1e-2 * duration),
            (None, Some(h0)) => h0.min(duration),
            (None, None) => 1e-2 * duration,
        };
        if controller.fixed_step {
            h = controller.h_init.unwrap_or(h);
        }
        h = h.clamp(controller.h_min, controller.h_max).min(duration);
        let mut t = t_start;

        while t < t_end - 1e-12 * duration.max(1.0) {
            h = h.min(t_end - t);
            if h < controller.h_min && !controller.fixed_step {
                return Err(DaeError::StiffnessFailure {
                    t,
                    h,
                    h_min: controller.h_min,
                });
            }

            // Refresh Jacobian at the step base point if stale, then build
            // and factorize the iteration matrix once for all stages.
            if jac_stale {
                system.jacobian(t, &x, &y, &mut jac)?;
                stats.jacobian_evaluations += 1;
                jac_stale = false;
            }
            let hg = h * tableau.gamma;
            triplets.clear();
            for i in 0..n_x {
                triplets.push((i, i, 1.0));
            }
            for k in 0..jac.fx.vals.len() {
                triplets.push((jac.fx.rows[k], jac.fx.cols[k], -hg * jac.fx.vals[k]));
            }
            for k in 0..jac.fy.vals.len() {
                triplets.push((jac.fy.rows[k], n_x + jac.fy.cols[k], -hg * jac.fy.vals[k]));
            }
            for k in 0..jac.gx.vals.len() {
                triplets.push((n_x + jac.gx.rows[k], jac.gx.cols[k], jac.gx.vals[k]));
            }
            for k in 0..jac.gy.vals.len() {
                triplets.push((
                    n_x + jac.gy.rows[k],
                    n_x + jac.gy.cols[k],
                    jac.gy.vals[k],
                ));
            }
            let fm = factorize(n_x + n_y, &triplets, &backend)?;
            stats.factorizations += 1;

            // Stage sweep.
            let mut step_failed = false;
            xs[0].copy_from_slice(&x);
            ys[0].copy_from_slice(&y);
            if system.f(t, &x, &y, &mut fs[0]).is_err() {
                step_failed = true;
            }
            stats.f_evaluations += 1;

            for i in 1..s {
                if step_failed {
                    break;
                }
                let ti = t + tableau.c[i] * h;
                // Known part of the stage equation.
                rhs_known.copy_from_slice(&x);
                for j in 0..i {
                    let aij = tableau.a[i][j];
                    if aij != 0.0 {
                        for k in 0..n_x {
                            rhs_known[k] += h * aij * fs[j][k];
                        }
                    }
                }
                // Predictor: extrapolate from the previous stage.
                let (xi_guess, yi_guess) = if i == 1 {
                    (x.clone(), y.clone())
                } else {
                    let ratio = if tableau.c[i - 1] > 0.0 {
                        tableau.c[i] / tableau.c[i - 1]
                    } else {
                        1.0
                    };
                    let xg: Vec<f64> = (0..n_x)
                        .map(|k| x[k] + ratio * (xs[i - 1][k] - x[k]))
                        .collect();
                    (xg, ys[i - 1].clone())
                };
                xs[i].copy_from_slice(&xi_guess);
                ys[i].copy_from_slice(&yi_guess);

                // Modified Newton on the coupled stage system.
                let mut converged = false;
                let mut prev_norm = f64::INFINITY;
                for m in 0..controller.max_newton {
                    let (fx_ok, gx_ok) = {
                        let f_ok = system.f(ti, &xs[i], &ys[i], &mut res[..n_x]).is_ok();
                        stats.f_evaluations += 1;
                        let g_ok = if n_y > 0 {
                            system.g(ti, &xs[i], &ys[i], &mut res[n_x..]).is_ok()
                        } else {
                            true
                        };
                        (f_ok, g_ok)
                    };
                    if !fx_ok || !gx_ok {
                        break;
                    }
                    for k in 0..n_x {
                        res[k] = xs[i][k] - rhs_known[k] - hg * res[k];
                    }
                    for v in res.iter_mut() {
                        *v = -*v;
                    }
                    fm.solve_in_place(&mut res);
                    let mut acc = 0.0;
                    for k in 0..n_x {
                        let w = controller.atol + controller.rtol * x[k].abs();
                        let e = res[k] / w;
                        acc += e * e;
                        xs[i][k] += res[k];
                    }
                    for k in 0..n_y {
                        let w = controller.atol + controller.rtol * y[k].abs();
                        let e = res[n_x + k] / w;
                        acc += e * e;
                        ys[i][k] += res[n_x + k];
                    }
                    let norm = (acc / (n_x + n_y) as f64).sqrt();
                    stats.newton_iterations += 1;
                    if !norm.is_finite() || !system.feasible(&xs[i], &ys[i]) {
                        break;
                    }
                    if norm <= controller.newton_tol {
                        converged = true;
                        break;
                    }
                    if m >= 1 && norm > 10.0 * prev_norm {
                        break; // diverging
                    }
                    prev_norm = norm;
                }
                if !converged {
                    step_failed = true;
                    break;
                }
                if system.f(ti, &xs[i], &ys[i], &mut fs[i]).is_err() {
                    step_failed = true;
                    break;
                }
                stats.f_evaluations += 1;
            }

            if step_failed {
                stats.rejected_steps += 1;
                stats.newton_failures += 1;
                h *= 0.25;
                if controller.fixed_step {
                    return Err(DaeError::StageFailure(t));
                }
                continue;
            }

            // Embedded error estimate over differential states.
            for k in 0..n_x {
                err_vec[k] = 0.0;
            }
            for i in 0..s {
                let d = tableau.b[i] - tableau.bhat[i];
                if d != 0.0 {
                    for k in 0..n_x {
                        err_vec[k] += h * d * fs[i][k];
                    }
                }
            }
            let mut acc = 0.0;
            for k in 0..n_x {
                let w = controller.atol
                    + controller.rtol * x[k].abs().max(xs[s - 1][k].abs());
                let e = err_vec[k] / w;
                acc += e * e;
            }
            let err = (acc / n_x.max(1) as f64).sqrt();

            if err > 1.0 && !controller.fixed_step {
                stats.rejected_steps += 1;
                let fct = controller.factor_on_reject(err, estimator_order);
                h = (h * fct).max(controller.h_min);
                continue;
            }

            // Accept: stiff accuracy makes the last stage the new state.
            if let Some(hk) = hook.as_deref_mut() {
                hk.on_step_accepted(t, h, &xs, &ys, &fm, tableau)?;
            }
            for i in 0..s {
                observer.on_stage(
                    t + tableau.c[i] * h,
                    &xs[i],
                    &ys[i],
                    h * tableau.b[i],
                );
            }
            x.copy_from_slice(&xs[s - 1]);
            y.copy_from_slice(&ys[s - 1]);
            t += h;
            observer.on_accepted(t, &x, &y);
            stats.accepted_steps += 1;
            // The base point moved: refresh the Jacobian next step. Rejected
            // steps keep the same base point and reuse the evaluation.
            jac_stale = true;
            let fct = if controller.fixed_step {
                1.0
            } else {
                controller.factor_on_accept(err, estimator_order)
            };
            h = (h * fct).clamp(controller.h_min, controller.h_max);
        }
        h_prev = Some(h);
    }

    Ok(IntegrationResult {
        t: tf,
        x,
        y,
        stats,
        h_last: h_prev.unwrap_or(0.0),
    })
}
