//! Dynamic simulation of two-bed pressure-swing-adsorption (PSA) nitrogen
//! generation with cyclic steady-state (CSS) solvers.
//!
//! The crate is organized bottom-up:
//!
//! * [`thermo`] — equation-of-state layer (ideal gas and Peng-Robinson) with
//!   exact partial derivatives for Jacobian assembly.
//! * [`column`] — physical closures for a packed adsorption column: Ergun
//!   momentum inversion, multicomponent Langmuir equilibria, linear-driving-force
//!   kinetics, heat of adsorption, and the smoothed check-valve outlet law.
//! * [`linalg`] — banded LU factorization with partial pivoting plus a
//!   low-rank (Woodbury) correction for the out-of-band inter-bed coupling.
//! * [`fv`] — cell-centered finite-volume semi-discretization of one column
//!   with analytic Jacobians.
//! * [`dae`] — semi-explicit index-1 DAE machinery: consistent initialization,
//!   stiffly accurate ESDIRK integration with PID step control, and staggered
//!   direct forward sensitivities.
//! * [`superstructure`] — the two-bed PSA superstructure: step schedule,
//!   inter-bed coupling, half-cycle propagator, and the bed-swap/axial-reversal
//!   permutation.
//! * [`css`] — cyclic steady-state solvers over the fixed-point map: Picard,
//!   Anderson acceleration, and Newton single shooting with sensitivities.
//! * [`config`], [`report`], [`cli`] — TOML configuration ingestion, report
//!   emission, and the `psa-sim` command-line driver.

pub mod cli;
pub mod column;
pub mod config;
pub mod css;
pub mod dae;
pub mod fv;
pub mod linalg;
pub mod report;
pub mod superstructure;
pub mod thermo;

/// Universal gas constant [J/(mol K)].
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Reference ambient temperature [K] used for reporting and enthalpy references.
pub const T_AMBIENT: f64 = 298.15;

/// Ambient pressure [Pa] used for reporting volumetric flows.
pub const P_AMBIENT: f64 = 101_325.0;
