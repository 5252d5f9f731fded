//! Consistent initialization of algebraic states: solve `g(x0, y0, t) = 0`
//! for `y0` by Newton's method with a backtracking line search that keeps all
//! trial iterates inside the feasible domain of the model functions.

use super::{DaeError, DaeJacobian, DaeSystem};
use crate::linalg::{factorize, LinearBackend};

/// Default residual tolerance (infinity norm of the scaled residuals).
pub const DEFAULT_INIT_TOL: f64 = 1e-10;

/// Solve `g(x0, y, t) = 0` for `y` starting from `y_guess`.
///
/// The algebraic Jacobian `dg/dy` is factorized with the system's linear
/// backend restricted to the algebraic subspace. Returns the consistent `y0`.
pub fn consistent_init(
    system: &dyn DaeSystem,
    t: f64,
    x0: &[f64],
    y_guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, DaeError> {
    let n_y = system.n_y();
    assert_eq!(y_guess.len(), n_y);
    let backend = algebraic_backend(system);
    let mut y = y_guess.to_vec();
    let mut r = vec![0.0; n_y];
    let mut jac = DaeJacobian::new(system.n_x(), n_y);

    if !system.feasible(x0, &y) {
        return Err(DaeError::InitFailure(
            "initial algebraic guess outside the feasible domain".into(),
        ));
    }
    system.g(t, x0, &y, &mut r)?;
    let mut phi = 0.5 * r.iter().map(|v| v * v).sum::<f64>();

    for _iter in 0..max_iter {
        let rinf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rinf <= tol {
            return Ok(y);
        }
        system.jacobian(t, x0, &y, &mut jac)?;
        let triplets: Vec<(usize, usize, f64)> = jac
            .gy
            .rows
            .iter()
            .zip(&jac.gy.cols)
            .zip(&jac.gy.vals)
            .map(|((&i, &j), &v)| (i, j, v))
            .collect();
        let fac = factorize(n_y, &triplets, &backend).map_err(|e| {
            DaeError::IndexFailure(format!("dg/dy factorization failed: {e}"))
        })?;
        let mut dy: Vec<f64> = r.iter().map(|v| -v).collect();
        fac.solve_in_place(&mut dy);

        // Backtracking line search on 0.5 ||g||^2 with feasibility guard.
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1e-10 {
            let y_trial: Vec<f64> = y
                .iter()
                .zip(&dy)
                .map(|(yi, di)| yi + alpha * di)
                .collect();
            if system.feasible(x0, &y_trial) {
                let mut r_trial = vec![0.0; n_y];
                if system.g(t, x0, &y_trial, &mut r_trial).is_ok() {
                    let phi_trial = 0.5 * r_trial.iter().map(|v| v * v).sum::<f64>();
                    if phi_trial <= phi * (1.0 - 1e-4 * alpha) || phi_trial < tol * tol {
                        y = y_trial;
                        r = r_trial;
                        phi = phi_trial;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(DaeError::InitFailure(format!(
                "line search stalled with residual {:.3e}",
                (2.0 * phi).sqrt()
            )));
        }
    }
    let rinf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rinf <= tol {
        Ok(y)
    } else {
        Err(DaeError::InitFailure(format!(
            "maximum iterations exceeded, residual {rinf:.3e}"
        )))
    }
}

/// Restrict the system's linear backend to the algebraic subspace: the `y`
/// indices keep their relative order from the full banded ordering, so local
/// (per-cell) constraint structure stays banded.
pub(crate) fn algebraic_backend(system: &dyn DaeSystem) -> LinearBackend {
    match system.backend() {
        LinearBackend::Dense => LinearBackend::Dense,
        LinearBackend::Banded {
            bandwidth,
            ordering,
        } => {
            let n_x = system.n_x();
            let n_y = system.n_y();
            let mut pairs: Vec<(usize, usize)> = (0..n_y)
                .map(|k| (ordering[n_x + k], k))
                .collect();
            pairs.sort_unstable();
            let mut y_order = vec![0usize; n_y];
            for (rank, &(_, k)) in pairs.iter().enumerate() {
                y_order[k] = rank;
            }
            LinearBackend::Banded {
                bandwidth: bandwidth.min(n_y.saturating_sub(1)).max(1),
                ordering: y_order,
            }
        }
    }
}
