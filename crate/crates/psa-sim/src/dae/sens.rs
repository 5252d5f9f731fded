//! Staggered direct forward sensitivities.
//!
//! After each accepted state step, the linear stage sensitivity systems
//!
//! `[(I - h*gamma*fx_i), -h*gamma*fy_i; gx_i, gy_i] [SX_i; SY_i] =
//!  [S_n + h*sum_{j<i} a_ij DF_j; 0]`
//!
//! are solved per seed column, reusing the step's iteration-matrix
//! factorization (evaluated at the step base point) as a preconditioner and
//! correcting with iterative refinement against the exact stage Jacobians.
//! Columns are independent and solved in parallel.

use rayon::prelude::*;

use super::controller::StepController;
use super::init::algebraic_backend;
use super::integrate::{integrate_impl, IntegrationResult, Observer, StepHook};
use super::tableau::ButcherTableau;
use super::{DaeError, DaeJacobian, DaeSystem};
use crate::linalg::{factorize, FactorizedMatrix};

/// Number of refinement passes against the exact stage Jacobians.
const REFINE_PASSES: usize = 2;

/// Integrate with forward sensitivities of `x(tf)` with respect to the seed
/// directions.
///
/// `seed` is an `n_x x m` matrix in column-major order: column `c` is the
/// initial sensitivity `dx(t0)/dp_c`. Returns the integration result and the
/// terminal sensitivity matrix `dx(tf)/dp` (same layout). Algebraic seed
/// sensitivities are initialized consistently from `gx * SX + gy * SY = 0`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with_sensitivities(
    system: &dyn DaeSystem,
    tableau: &ButcherTableau,
    controller: &mut StepController,
    x0: &[f64],
    y0: &[f64],
    t0: f64,
    tf: f64,
    events: &[f64],
    seed: &[f64],
    observer: &mut dyn Observer,
) -> Result<(IntegrationResult, Vec<f64>), DaeError> {
    let n_x = system.n_x();
    let n_y = system.n_y();
    assert_eq!(seed.len() % n_x.max(1), 0);
    let m = if n_x == 0 { 0 } else { seed.len() / n_x };

    // Consistent algebraic sensitivities at t0: gy * SY = -gx * SX.
    let mut sy0 = vec![0.0; n_y * m];
    if n_y > 0 && m > 0 {
        let mut jac = DaeJacobian::new(n_x, n_y);
        system.jacobian(t0, x0, y0, &mut jac)?;
        let triplets: Vec<(usize, usize, f64)> = jac
            .gy
            .rows
            .iter()
            .zip(&jac.gy.cols)
            .zip(&jac.gy.vals)
            .map(|((&i, &j), &v)| (i, j, v))
            .collect();
        let fac = factorize(n_y, &triplets, &algebraic_backend(system))?;
        for c in 0..m {
            let sx_col = &seed[c * n_x..(c + 1) * n_x];
            let mut rhs = vec![0.0; n_y];
            jac.gx.matvec_add(sx_col, &mut rhs, -1.0);
            fac.solve_in_place(&mut rhs);
            sy0[c * n_y..(c + 1) * n_y].copy_from_slice(&rhs);
        }
    }

    let mut hook = SensHook {
        system,
        n_x,
        n_y,
        m,
        sx: seed.to_vec(),
        sy: sy0,
        jacs: (0..tableau.s).map(|_| DaeJacobian::new(n_x, n_y)).collect(),
    };

    let result = integrate_impl(
        system,
        tableau,
        controller,
        x0,
        y0,
        t0,
        tf,
        events,
        observer,
        Some(&mut hook),
    )?;
    Ok((result, hook.sx))
}

struct SensHook<'a> {
    system: &'a dyn DaeSystem,
    n_x: usize,
    n_y: usize,
    m: usize,
    /// `n_x x m` column-major: current dx/dp.
    sx: Vec<f64>,
    /// `n_y x m` column-major: current dy/dp.
    sy: Vec<f64>,
    jacs: Vec<DaeJacobian>,
}

impl StepHook for SensHook<'_> {
    fn on_step_accepted(
        &mut self,
        t_n: f64,
        h: f64,
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
        fac: &FactorizedMatrix,
        tableau: &ButcherTableau,
    ) -> Result<(), DaeError> {
        let (n_x, n_y, m, s) = (self.n_x, self.n_y, self.m, tableau.s);
        if m == 0 {
            return Ok(());
        }
        // Exact Jacobians at every stage point (boundary data may differ
        // across stages through t).
        for i in 0..s {
            let ti = t_n + tableau.c[i] * h;
            self.system.jacobian(ti, &xs[i], &ys[i], &mut self.jacs[i])?;
        }
        let hg = h * tableau.gamma;
        let jacs = &self.jacs;
        let sx = &self.sx;
        let sy = &self.sy;

        // Per-column propagation through all stages; columns are independent.
        let results: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|c| {
                let sx_n = &sx[c * n_x..(c + 1) * n_x];
                let sy_n = &sy[c * n_y..(c + 1) * n_y];
                // DF_i = fx_i SX_i + fy_i SY_i per stage.
                let mut df: Vec<Vec<f64>> = vec![vec![0.0; n_x]; s];
                jacs[0].fx.matvec_add(sx_n, &mut df[0], 1.0);
                jacs[0].fy.matvec_add(sy_n, &mut df[0], 1.0);
                let mut sx_i = sx_n.to_vec();
                let mut sy_i = sy_n.to_vec();
                for i in 1..s {
                    // Right-hand side: S_n + h sum_{j<i} a_ij DF_j.
                    let mut rhs = vec![0.0; n_x + n_y];
                    rhs[..n_x].copy_from_slice(sx_n);
                    for j in 0..i {
                        let aij = tableau.a[i][j];
                        if aij != 0.0 {
                            for k in 0..n_x {
                                rhs[k] += h * aij * df[j][k];
                            }
                        }
                    }
                    // Initial solve with the base-point factorization.
                    let mut z = rhs.clone();
                    fac.solve_in_place(&mut z);
                    // Refinement against the exact stage Jacobian.
                    for _ in 0..REFINE_PASSES {
                        let (zx, zy) = z.split_at(n_x);
                        let mut r = rhs.clone();
                        // r_x -= (I - hg fx_i) zx - hg fy_i zy
                        for k in 0..n_x {
                            r[k] -= zx[k];
                        }
                        jacs[i].fx.matvec_add(zx, &mut r[..n_x], hg);
                        jacs[i].fy.matvec_add(zy, &mut r[..n_x], hg);
                        // r_g -= gx_i zx + gy_i zy
                        jacs[i].gx.matvec_add(zx, &mut r[n_x..], -1.0);
                        jacs[i].gy.matvec_add(zy, &mut r[n_x..], -1.0);
                        fac.solve_in_place(&mut r);
                        for k in 0..n_x + n_y {
                            z[k] += r[k];
                        }
                    }
                    sx_i.copy_from_slice(&z[..n_x]);
                    sy_i.copy_from_slice(&z[n_x..]);
                    df[i].iter_mut().for_each(|v| *v = 0.0);
                    jacs[i].fx.matvec_add(&sx_i, &mut df[i], 1.0);
                    jacs[i].fy.matvec_add(&sy_i, &mut df[i], 1.0);
                }
                // Stiff accuracy: last stage advances the sensitivity.
                (sx_i, sy_i)
            })
            .collect();

        for (c, (sx_c, sy_c)) in results.into_iter().enumerate() {
            self.sx[c * n_x..(c + 1) * n_x].copy_from_slice(&sx_c);
            self.sy[c * n_y..(c + 1) * n_y].copy_from_slice(&sy_c);
        }
        Ok(())
    }
}
