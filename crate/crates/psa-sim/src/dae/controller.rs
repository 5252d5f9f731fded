//! PID step-size control on embedded error estimates.
//!
//! The accepted-step update follows the proportional-integral-derivative
//! controller family described in the Runge-Kutta literature,
//!
//! `h_new = safety * h * e_n^(-bI) * (e_{n-1}/e_n)^(bP) * (e_{n-1}^2/(e_n e_{n-2}))^(bD)`
//!
//! with exponents `b* = k*/k` scaled by the error-estimator order
//! `k = embedded_order + 1`, and `e` the weighted RMS error estimate
//! (acceptance requires `e <= 1`). While fewer than three error samples are
//! available the elementary controller `e^(-1/k)` is used.

use serde::{Deserialize, Serialize};

/// Adaptive step-size controller configuration and state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepController {
    /// Relative tolerance on differential states.
    pub rtol: f64,
    /// Absolute tolerance on differential states (same weighting for all).
    pub atol: f64,
    /// PID gains.
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Hard step bounds [s].
    pub h_min: f64,
    pub h_max: f64,
    /// Safety factor in (0, 1).
    pub safety: f64,
    /// Growth/shrink limits per accepted step.
    pub factor_min: f64,
    pub factor_max: f64,
    /// Maximum Newton iterations per stage solve.
    pub max_newton: usize,
    /// Stage Newton convergence threshold in the tolerance-weighted norm.
    pub newton_tol: f64,
    /// Initial step size [s]; `None` selects 1% of the first segment.
    pub h_init: Option<f64>,
    /// Disable adaptivity: keep `h` constant and accept every step
    /// (testing aid for convergence-order studies).
    pub fixed_step: bool,
    #[serde(skip)]
    history: ErrorHistory,
}

#[derive(Debug, Clone, Default)]
struct ErrorHistory {
    e: [f64; 3],
    len: usize,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-6,
            k_p: 0.13,
            k_i: 1.0 / 15.0,
            k_d: 0.013,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            safety: 0.9,
            factor_min: 0.2,
            factor_max: 5.0,
            max_newton: 10,
            newton_tol: 0.03,
            h_init: None,
            fixed_step: false,
            history: ErrorHistory::default(),
        }
    }
}

impl StepController {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Reset the error history (start of integration or after an event).
    pub fn reset(&mut self) {
        self.history = ErrorHistory::default();
    }

    /// Step-size factor after an accepted step with weighted error `err`.
    pub fn factor_on_accept(&mut self, err: f64, estimator_order: usize) -> f64 {
        let k = estimator_order as f64;
        let e_n = err.max(1e-10); // guard vanishing estimates
        let f = if self.history.len < 2 {
            self.safety * e_n.powf(-1.0 / k)
        } else {
            let e_1 = self.history.e[0];
            let e_2 = self.history.e[1];
            self.safety
                * e_n.powf(-self.k_i / k)
                * (e_1 / e_n).powf(self.k_p / k)
                * (e_1 * e_1 / (e_n * e_2)).powf(self.k_d / k)
        };
        self.history.e[2] = self.history.e[1];
        self.history.e[1] = self.history.e[0];
        self.history.e[0] = e_n;
        self.history.len = (self.history.len + 1).min(3);
        f.clamp(self.factor_min, self.factor_max)
    }

    /// Step-size factor after a rejected step (always shrinks).
    pub fn factor_on_reject(&mut self, err: f64, estimator_order: usize) -> f64 {
        let k = estimator_order as f64;
        let e_n = err.max(1.0);
        // Drop the derivative/proportional history after a rejection.
        self.history = ErrorHistory::default();
        (self.safety * e_n.powf(-1.0 / k)).clamp(0.1, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accept_grows_on_small_error() {
        let mut c = StepController::default();
        let f = c.factor_on_accept(1e-4, 3);
        assert!(f > 1.0);
        assert!(f <= c.factor_max);
    }

    #[test]
    fn accept_shrinks_on_large_error() {
        let mut c = StepController::default();
        let f = c.factor_on_accept(0.99, 3);
        assert!(f <= 1.0);
    }

    #[test]
    fn reject_always_shrinks() {
        let mut c = StepController::default();
        for err in [1.0, 2.0, 100.0] {
            let f = c.factor_on_reject(err, 3);
            assert!(f <= 0.5 && f >= 0.1);
        }
    }

    #[test]
    fn pid_stationary_error_matches_elementary() {
        // With constant error history, PID exponents collapse to
        // e^{-(kI)/k}; verify the history path is exercised.
        let mut c = StepController::default();
        let k = 3;
        c.factor_on_accept(0.5, k);
        c.factor_on_accept(0.5, k);
        let f = c.factor_on_accept(0.5, k);
        let expect = c.safety * 0.5f64.powf(-c.k_i / k as f64);
        approx::assert_relative_eq!(f, expect, max_relative = 1e-12);
    }
}
