//! Physical closures for one adsorption column: Ergun momentum inversion,
//! multicomponent Langmuir equilibria, linear-driving-force (LDF) kinetics,
//! heat of adsorption, gas density, and the smoothed check-valve outlet law.
//!
//! All closures are pure functions evaluated independently per finite volume.
//! The derivative-carrying variants return exact partials for Jacobian
//! assembly in the `fv` module.
//!
//! Unit conventions: mobile-phase concentrations `c` are moles per gas volume,
//! stationary-phase loadings `q` are moles per stationary volume. The
//! mobile/stationary volume-basis conversion factor used in the adsorption
//! source term and the Ergun coefficients is `(1 - eps)/eps`; see
//! [`BedGeometry::volume_ratio`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermo::{SpeciesArray, MAX_SPECIES};

/// Floor on the total mobile-phase concentration [mol/m^3] inside
/// partial-pressure evaluation; guards nearly evacuated cells during purge.
pub const SUM_C_FLOOR: f64 = 1e-12;

/// Floor on partial pressures [Pa] inside the square-root factor of the LDF
/// rate-constant correlation (its derivative is singular at zero).
pub const P_SQRT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ColumnError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate composition: total concentration is zero")]
    DegenerateComposition,
}

/// Geometry of one packed column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BedGeometry {
    /// Column length [m].
    pub length: f64,
    /// Column diameter [m].
    pub diameter: f64,
    /// Bed porosity (gas volume fraction) [-].
    pub porosity: f64,
    /// Effective particle diameter [m].
    pub particle_diameter: f64,
}

impl BedGeometry {
    /// Total column volume [m^3].
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0 * self.length
    }

    /// Gas volume [m^3].
    pub fn gas_volume(&self) -> f64 {
        self.porosity * self.volume()
    }

    /// Gas cross-sectional area `S_gas = V_gas / L` [m^2].
    pub fn cross_section_gas(&self) -> f64 {
        self.gas_volume() / self.length
    }

    /// Total cross-sectional area [m^2].
    pub fn cross_section_total(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    /// Stationary-to-mobile volume-basis ratio `(1 - eps)/eps` [-].
    ///
    /// This ratio converts stationary-volume rates to mobile-volume rates in
    /// the adsorption source term `R = -ratio * dq/dt` and appears in the
    /// standard Ergun coefficients written for interstitial velocity. Using
    /// this ratio is required for interphase mole conservation:
    /// `d/dt [eps*c + (1-eps)*q] = -eps * dN/dz` in a closed column.
    pub fn volume_ratio(&self) -> f64 {
        (1.0 - self.porosity) / self.porosity
    }

    pub fn validate(&self) -> Result<(), ColumnError> {
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(ColumnError::Config(format!(
                "porosity {} outside (0, 1)",
                self.porosity
            )));
        }
        if self.length <= 0.0 || self.diameter <= 0.0 || self.particle_diameter <= 0.0 {
            return Err(ColumnError::Config(
                "length, diameter, particle diameter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-species Langmuir/LDF correlation constants.
///
/// `q_max(T) = k1 - k2*T`, `b(T) = k3*exp(k4/T)`; the kinetic parameter `k`
/// enters the supercritical structural Langmuir rate-constant model.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SpeciesAdsorption {
    /// Saturation-capacity intercept (basis per `IsothermBasis`).
    pub k1: f64,
    /// Saturation-capacity slope (basis per K).
    pub k2: f64,
    /// Langmuir pre-exponential [1/Pa].
    pub k3: f64,
    /// Langmuir exponential constant [K].
    pub k4: f64,
    /// Kinetic parameter [1/s].
    pub k: f64,
    /// Heat of adsorption [J/mol], negative for exothermic adsorption.
    pub delta_h: f64,
}

/// Declared unit basis of the isotherm saturation capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsothermBasis {
    /// `k1`, `k2` are mol/kg-based; loadings are scaled by the solid density.
    MolPerKg,
    /// `k1`, `k2` are mol/m^3-of-stationary-volume-based; no scaling.
    MolPerM3,
}

/// Adsorbent and transport parameters for one column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdsorbentParams {
    /// Per-species correlation constants, ordered like the species list.
    pub species: Vec<SpeciesAdsorption>,
    /// Unit basis of `k1`/`k2`.
    pub basis: IsothermBasis,
    /// Solid (particle envelope) density [kg/m^3 of stationary volume].
    pub rho_solid: f64,
    /// Solid heat capacity [J/(kg K)].
    pub cp_solid: f64,
    /// Geometric factor in the LDF rate constant (15 for spheres).
    pub omega: f64,
    /// Mobile-phase dynamic viscosity [Pa s].
    pub viscosity: f64,
    /// Per-species critical pressures [Pa] for reduced-pressure evaluation.
    pub critical_pressure: Vec<f64>,
}

impl AdsorbentParams {
    /// Conversion factor from isotherm basis to mol per stationary volume.
    pub fn loading_scale(&self) -> f64 {
        match self.basis {
            IsothermBasis::MolPerKg => self.rho_solid,
            IsothermBasis::MolPerM3 => 1.0,
        }
    }

    pub fn validate(&self, n_species: usize) -> Result<(), ColumnError> {
        if self.species.len() != n_species || self.critical_pressure.len() != n_species {
            return Err(ColumnError::Config(format!(
                "adsorbent species count {} does not match species list {}",
                self.species.len(),
                n_species
            )));
        }
        if self.rho_solid <= 0.0 || self.cp_solid <= 0.0 || self.viscosity <= 0.0 {
            return Err(ColumnError::Config(
                "rho_solid, cp_solid, viscosity must be positive".into(),
            ));
        }
        for (i, sp) in self.species.iter().enumerate() {
            if sp.delta_h > 0.0 {
                return Err(ColumnError::Config(format!(
                    "species {i}: heat of adsorption must be <= 0 (exothermic)"
                )));
            }
            for t in [250.0, 400.0] {
                if sp.k1 - sp.k2 * t <= 0.0 {
                    return Err(ColumnError::Config(format!(
                        "species {i}: saturation capacity non-positive at T={t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Mixture mass density of the mobile phase [kg/m^3].
pub fn gas_density(c: &[f64], molar_mass: &[f64]) -> f64 {
    c.iter().zip(molar_mass).map(|(ci, mi)| ci * mi).sum()
}

/// Ergun coefficients `A` [Pa s/m^2] and `B` [Pa/m * (s/m)^2-ish] such that
/// `-dP/dz = A v + B v |v|` for interstitial velocity `v`.
pub fn ergun_coefficients(
    rho_gas: f64,
    geom: &BedGeometry,
    params: &AdsorbentParams,
) -> (f64, f64) {
    let ratio = geom.volume_ratio();
    let a = 150.0 * params.viscosity * (ratio / geom.particle_diameter).powi(2);
    let b = 1.75 * rho_gas * ratio / geom.particle_diameter;
    (a, b)
}

/// Interstitial velocity from the pressure gradient by closed-form inversion
/// of the Ergun equation.
pub fn ergun_velocity(
    dpdz: f64,
    c: &[f64],
    molar_mass: &[f64],
    geom: &BedGeometry,
    params: &AdsorbentParams,
) -> Result<f64, ColumnError> {
    let rho = gas_density(c, molar_mass);
    let (a, b) = ergun_coefficients(rho, geom, params);
    ergun_invert(dpdz, a, b).map(|e| e.v)
}

/// Ergun inversion result with the partials needed for Jacobian assembly.
#[derive(Debug, Clone, Copy)]
pub struct ErgunEval {
    /// Interstitial velocity [m/s]; `sign(v) = sign(-dP/dz)`.
    pub v: f64,
    /// `dv/d(dP/dz)`.
    pub dv_dg: f64,
    /// `dv/dB` at fixed `dP/dz` (chain through `B = 1.75 rho ratio/d_p`).
    pub dv_db: f64,
}

/// Invert `-g = A v + B v |v|` in closed form.
pub fn ergun_invert(g: f64, a: f64, b: f64) -> Result<ErgunEval, ColumnError> {
    if a <= 0.0 && b <= 0.0 {
        return Err(ColumnError::Config(
            "degenerate Ergun coefficients A = B = 0".into(),
        ));
    }
    let v = if b <= 0.0 {
        -g / a
    } else {
        let mag = (-a + (a * a + 4.0 * b * g.abs()).sqrt()) / (2.0 * b);
        if g <= 0.0 {
            mag
        } else {
            -mag
        }
    };
    // Implicit differentiation of -g = A v + B v |v|:
    // -dg = (A + 2 B |v|) dv + v |v| dB.
    let denom = a + 2.0 * b * v.abs();
    let (dv_dg, dv_db) = if denom > 0.0 {
        (-1.0 / denom, -v * v.abs() / denom)
    } else {
        (0.0, 0.0)
    };
    Ok(ErgunEval { v, dv_dg, dv_db })
}

/// Partial pressures and their partials with respect to `(P, c)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PartialPressures {
    /// `P_a = P c_a / max(sum c, floor)` [Pa].
    pub p: SpeciesArray,
    /// `dP_a/dP`.
    pub dp_dptot: SpeciesArray,
    /// `dP_a/dc_b`, row `a`, column `b`.
    pub dp_dc: [SpeciesArray; MAX_SPECIES],
    /// Whether the floor was active (derivatives treat `sum c` as constant).
    pub floored: bool,
}

/// Compute partial pressures from mobile mole fractions.
pub fn partial_pressures(p_tot: f64, c: &[f64]) -> PartialPressures {
    let ns = c.len();
    let sum: f64 = c.iter().sum();
    let floored = sum < SUM_C_FLOOR;
    let cs = if floored { SUM_C_FLOOR } else { sum };
    let mut out = PartialPressures {
        floored,
        ..Default::default()
    };
    for i in 0..ns {
        out.p[i] = p_tot * c[i] / cs;
        out.dp_dptot[i] = c[i] / cs;
        for j in 0..ns {
            let d = if i == j { 1.0 } else { 0.0 };
            out.dp_dc[i][j] = if floored {
                p_tot * d / cs
            } else {
                p_tot * (d * cs - c[i]) / (cs * cs)
            };
        }
    }
    out
}

/// Langmuir equilibrium loadings [mol per stationary volume].
pub fn langmuir_equilibrium(
    t: f64,
    p_tot: f64,
    c: &[f64],
    params: &AdsorbentParams,
) -> Result<SpeciesArray, ColumnError> {
    if c.iter().sum::<f64>() <= 0.0 {
        return Err(ColumnError::DegenerateComposition);
    }
    let pp = partial_pressures(p_tot, c);
    Ok(langmuir_eval(t, &pp, c.len(), params).q_star)
}

/// Langmuir evaluation with partials with respect to `(T, P_a)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LangmuirEval {
    /// Equilibrium loadings [mol per stationary volume].
    pub q_star: SpeciesArray,
    /// `dq*_a/dT` at fixed partial pressures.
    pub dq_dt: SpeciesArray,
    /// `dq*_a/dP_b` (partial-pressure partials), row `a`, column `b`.
    pub dq_dpp: [SpeciesArray; MAX_SPECIES],
    /// Langmuir parameters `b_a(T)` [1/Pa].
    pub b: SpeciesArray,
    /// `db_a/dT`.
    pub db_dt: SpeciesArray,
}

/// Evaluate the multicomponent Langmuir isotherm and its partials.
pub fn langmuir_eval(
    t: f64,
    pp: &PartialPressures,
    ns: usize,
    params: &AdsorbentParams,
) -> LangmuirEval {
    let scale = params.loading_scale();
    let mut ev = LangmuirEval::default();
    let mut denom = 1.0;
    let mut ddenom_dt = 0.0;
    for i in 0..ns {
        let sp = &params.species[i];
        ev.b[i] = sp.k3 * (sp.k4 / t).exp();
        ev.db_dt[i] = -ev.b[i] * sp.k4 / (t * t);
        denom += ev.b[i] * pp.p[i];
        ddenom_dt += ev.db_dt[i] * pp.p[i];
    }
    for i in 0..ns {
        let sp = &params.species[i];
        let qmax = scale * (sp.k1 - sp.k2 * t);
        let dqmax_dt = -scale * sp.k2;
        let num = ev.b[i] * pp.p[i];
        ev.q_star[i] = qmax * num / denom;
        ev.dq_dt[i] = dqmax_dt * num / denom
            + qmax * (ev.db_dt[i] * pp.p[i] * denom - num * ddenom_dt) / (denom * denom);
        for j in 0..ns {
            let dnum = if i == j { ev.b[i] } else { 0.0 };
            ev.dq_dpp[i][j] = qmax * (dnum * denom - num * ev.b[j]) / (denom * denom);
        }
    }
    ev
}

/// LDF rate constants [1/s] from the supercritical structural Langmuir model.
pub fn ldf_rate_constants(
    t: f64,
    p_tot: f64,
    c: &[f64],
    params: &AdsorbentParams,
) -> Result<SpeciesArray, ColumnError> {
    if c.iter().sum::<f64>() <= 0.0 {
        return Err(ColumnError::DegenerateComposition);
    }
    let pp = partial_pressures(p_tot, c);
    let lang = langmuir_eval(t, &pp, c.len(), params);
    Ok(omega_eval(t, &pp, &lang, c.len(), params).omega)
}

/// LDF rate-constant evaluation with partials.
#[derive(Debug, Clone, Copy, Default)]
pub struct OmegaEval {
    /// `omega_a = Omega k_a sqrt(P_a/P_c,a) (1 + b_a P_a)^2` [1/s].
    pub omega: SpeciesArray,
    /// `domega_a/dT` at fixed partial pressures (through `b_a(T)`).
    pub domega_dt: SpeciesArray,
    /// `domega_a/dP_a` (diagonal in partial pressures).
    pub domega_dpp: SpeciesArray,
}

/// Evaluate LDF rate constants and their partials.
pub fn omega_eval(
    _t: f64,
    pp: &PartialPressures,
    lang: &LangmuirEval,
    ns: usize,
    params: &AdsorbentParams,
) -> OmegaEval {
    let mut ev = OmegaEval::default();
    for i in 0..ns {
        let sp = &params.species[i];
        let pc = params.critical_pressure[i];
        let pa = pp.p[i].max(0.0);
        let root = (pa / pc).sqrt();
        let lam = 1.0 + lang.b[i] * pp.p[i];
        let lam2 = lam * lam;
        ev.omega[i] = params.omega * sp.k * root * lam2;
        // d(root)/dP_a is singular at P_a = 0; floor the pressure inside the
        // derivative only so the Jacobian stays bounded while the value is
        // exact.
        let droot = if pa > 0.0 {
            0.5 / ((pa.max(P_SQRT_FLOOR)) * pc).sqrt()
        } else {
            0.0
        };
        ev.domega_dpp[i] =
            params.omega * sp.k * (droot * lam2 + root * 2.0 * lam * lang.b[i]);
        ev.domega_dt[i] = params.omega * sp.k * root * 2.0 * lam * lang.db_dt[i] * pp.p[i];
    }
    ev
}

/// LDF uptake rate `dq/dt = omega * (q* - q)` [mol/(m^3 s)], elementwise.
pub fn ldf_rate(q: &[f64], q_star: &[f64], omega: &[f64]) -> SpeciesArray {
    let mut out = [0.0; MAX_SPECIES];
    for i in 0..q.len() {
        out[i] = omega[i] * (q_star[i] - q[i]);
    }
    out
}

/// Mobile-phase adsorption source `R = -ratio * dq/dt` [mol/(m^3 s)].
pub fn adsorption_source(dtq: &[f64], ratio: f64) -> SpeciesArray {
    let mut out = [0.0; MAX_SPECIES];
    for i in 0..dtq.len() {
        out[i] = -ratio * dtq[i];
    }
    out
}

/// Heat source from adsorption `Q = -(1-eps) sum dH_a dq_a/dt` [W/m^3].
pub fn heat_source(dtq: &[f64], delta_h: &[f64], porosity: f64) -> f64 {
    -(1.0 - porosity)
        * dtq
            .iter()
            .zip(delta_h)
            .map(|(r, dh)| dh * r)
            .sum::<f64>()
}

/// Smoothed check valve: `(v + sqrt(v^2 + delta))/2`; positive and smooth.
pub fn check_valve(v_raw: f64, delta: f64) -> f64 {
    (v_raw + (v_raw * v_raw + delta).sqrt()) / 2.0
}

/// Derivative of [`check_valve`] with respect to `v_raw`.
pub fn check_valve_derivative(v_raw: f64, delta: f64) -> f64 {
    (1.0 + v_raw / (v_raw * v_raw + delta).sqrt()) / 2.0
}

#[cfg(test)]
pub(crate) fn test_geometry() -> BedGeometry {
    BedGeometry {
        length: 2.0,
        diameter: 1.0,
        porosity: 0.4,
        particle_diameter: 2e-3,
    }
}

#[cfg(test)]
pub(crate) fn test_params() -> AdsorbentParams {
    AdsorbentParams {
        species: vec![
            SpeciesAdsorption {
                k1: 5.62,
                k2: 0.01,
                k3: 2.43e-9,
                k4: 2000.0,
                k: 1e-4,
                delta_h: -16_600.0,
            },
            SpeciesAdsorption {
                k1: 5.62,
                k2: 0.01,
                k3: 2.7e-9,
                k4: 2000.0,
                k: 1e-2,
                delta_h: -16_600.0,
            },
            SpeciesAdsorption {
                k1: 5.62,
                k2: 0.01,
                k3: 2.7e-9,
                k4: 2000.0,
                k: 1e-2,
                delta_h: -16_600.0,
            },
        ],
        basis: IsothermBasis::MolPerKg,
        rho_solid: 1100.0,
        cp_solid: 880.0,
        omega: 15.0,
        viscosity: 1.82e-5,
        critical_pressure: crate::thermo::default_air_species()
            .iter()
            .map(|s| s.critical_pressure)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gas_density_basics() {
        let m = [0.028_013_4, 0.032, 0.04];
        assert_eq!(gas_density(&[0.0, 0.0, 0.0], &m), 0.0);
        assert_relative_eq!(gas_density(&[1.0, 0.0, 0.0], &m), 0.028_013_4);
        let c = [1.0, 2.0, 3.0];
        let c2 = [2.0, 4.0, 6.0];
        assert_relative_eq!(gas_density(&c2, &m), 2.0 * gas_density(&c, &m));
    }

    #[test]
    fn ergun_limits() {
        // Linear limit B = 0: v = -g/A.
        let e = ergun_invert(-10.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(e.v, 10.0);
        // Quadratic limit A = 0: v^2 = |g|/B.
        let e = ergun_invert(-4.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(e.v, 2.0);
        // Zero gradient.
        let e = ergun_invert(0.0, 1.0, 1.0).unwrap();
        assert_eq!(e.v, 0.0);
        // Degenerate configuration.
        assert!(ergun_invert(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ergun_inversion_residual_1000_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = test_geometry();
        let params = test_params();
        let m = [0.028_013_4, 0.031_998_8, 0.039_948];
        for _ in 0..1000 {
            let g = rng.gen_range(-1e6..1e6);
            let c = [
                rng.gen_range(0.0..500.0),
                rng.gen_range(0.0..500.0),
                rng.gen_range(0.0..500.0),
            ];
            let rho = gas_density(&c, &m);
            let (a, b) = ergun_coefficients(rho, &geom, &params);
            let e = ergun_invert(g, a, b).unwrap();
            let back = a * e.v + b * e.v * e.v.abs();
            assert_relative_eq!(back, -g, max_relative = 1e-10, epsilon = 1e-8);
            assert!(e.v * -g >= 0.0, "sign(v) must match sign(-g)");
        }
    }

    #[test]
    fn ergun_derivatives_match_fd() {
        let geom = test_geometry();
        let params = test_params();
        let m = [0.028_013_4, 0.031_998_8, 0.039_948];
        let c = [100.0, 30.0, 5.0];
        let rho = gas_density(&c, &m);
        let (a, b) = ergun_coefficients(rho, &geom, &params);
        for g in [-2e4, -10.0, 0.5, 3e4] {
            let e = ergun_invert(g, a, b).unwrap();
            let dg = 1e-6 * (g.abs() + 1.0);
            let vp = ergun_invert(g + dg, a, b).unwrap().v;
            let vm = ergun_invert(g - dg, a, b).unwrap().v;
            assert_relative_eq!((vp - vm) / (2.0 * dg), e.dv_dg, max_relative = 1e-5);
            let db = 1e-6 * b;
            let vp = ergun_invert(g, a, b + db).unwrap().v;
            let vm = ergun_invert(g, a, b - db).unwrap().v;
            assert_relative_eq!(
                (vp - vm) / (2.0 * db),
                e.dv_db,
                max_relative = 1e-4,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn langmuir_limits() {
        let params = test_params();
        // Zero pressure: q* = 0.
        let q = langmuir_equilibrium(300.0, 1e-30, &[1.0, 1.0, 1.0], &params).unwrap();
        for i in 0..3 {
            assert!(q[i].abs() < 1e-20);
        }
        // Single-species saturation: q* -> q_max as b P -> infinity.
        let t = 300.0;
        let b = params.species[0].k3 * (params.species[0].k4 / t).exp();
        let p_huge = 1e6 / b;
        let q = langmuir_equilibrium(t, p_huge, &[1.0, 0.0, 0.0], &params).unwrap();
        let qmax = params.rho_solid * (params.species[0].k1 - params.species[0].k2 * t);
        assert_relative_eq!(q[0], qmax, max_relative = 1e-5);
        // Half coverage at b P = 1.
        let q = langmuir_equilibrium(t, 1.0 / b, &[1.0, 0.0, 0.0], &params).unwrap();
        assert_relative_eq!(q[0], 0.5 * qmax, max_relative = 1e-12);
        // Degenerate composition rejected.
        assert!(langmuir_equilibrium(t, 1e5, &[0.0, 0.0, 0.0], &params).is_err());
    }

    #[test]
    fn langmuir_competitive_bound() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let t = rng.gen_range(250.0..400.0);
            let p = rng.gen_range(1e3..1e7);
            let c = [
                rng.gen_range(1e-6..500.0),
                rng.gen_range(1e-6..500.0),
                rng.gen_range(1e-6..500.0),
            ];
            let q = langmuir_equilibrium(t, p, &c, &params).unwrap();
            let mut frac = 0.0;
            for i in 0..3 {
                let qmax =
                    params.rho_solid * (params.species[i].k1 - params.species[i].k2 * t);
                frac += q[i] / qmax;
            }
            assert!(frac <= 1.0 + 1e-12, "competitive bound violated: {frac}");
        }
    }

    #[test]
    fn omega_properties() {
        let params = test_params();
        // Zero partial pressure: omega = 0.
        let w = ldf_rate_constants(300.0, 1e5, &[0.0, 1.0, 0.0], &params).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(w[1] > 0.0);
        // Monotone increasing in partial pressure at fixed T.
        let mut last = 0.0;
        for p in [1e4, 1e5, 5e5, 1e6] {
            let w = ldf_rate_constants(300.0, p, &[1.0, 0.0, 0.0], &params).unwrap();
            assert!(w[0] > last);
            last = w[0];
        }
    }

    #[test]
    fn omega_derived_value() {
        // Omega = 15, k = 1, P_r = 0.25, b P = 1 -> omega = 15 * 0.5 * 4 = 30.
        let mut params = test_params();
        params.species[0].k = 1.0;
        params.species[0].k3 = 1.0;
        params.species[0].k4 = 0.0; // b = 1 1/Pa
        params.critical_pressure[0] = 4.0; // P = 1 Pa -> P_r = 0.25
        let w = ldf_rate_constants(300.0, 1.0, &[1.0, 0.0, 0.0], &params).unwrap();
        assert_relative_eq!(w[0], 30.0, max_relative = 1e-12);
    }

    #[test]
    fn ldf_and_sources() {
        let q = [1.0, 2.0, 3.0];
        let qs = [4.0, 2.0, 0.0];
        let w = [2.0, 5.0, 0.0];
        let r = ldf_rate(&q, &qs, &w);
        assert_eq!(&r[..3], &[6.0, 0.0, 0.0]);
        let src = adsorption_source(&r[..3], 0.5);
        assert_eq!(&src[..3], &[-3.0, 0.0, 0.0]);
        // Adsorption depletes the mobile phase.
        assert!(src[0] < 0.0);
        let qdot = [1.0, 0.0, 0.0];
        let dh = [-1e4, 0.0, 0.0];
        assert_relative_eq!(heat_source(&qdot, &dh, 0.5), 5e3);
        // Desorption cools.
        let qdot = [-1.0, 0.0, 0.0];
        assert!(heat_source(&qdot, &dh, 0.5) < 0.0);
    }

    #[test]
    fn check_valve_bounds() {
        let delta = 1e-4;
        assert_relative_eq!(check_valve(0.0, delta), 0.005);
        assert_relative_eq!(check_valve(1.0, delta), 1.000_025, max_relative = 1e-5);
        assert_relative_eq!(check_valve(-1.0, delta), 2.5e-5, max_relative = 1e-3);
        for v in [-10.0, -0.1, 0.0, 1e-3, 0.5, 10.0] {
            let cv = check_valve(v, delta);
            assert!(cv >= v.max(0.0));
            assert!(cv - v.max(0.0) <= delta.sqrt() / 2.0 + 1e-15);
            // Derivative consistent with finite differences (absolute floor
            // covers the cancellation-noise regime at large negative v).
            let dv = 1e-7;
            let fd = (check_valve(v + dv, delta) - check_valve(v - dv, delta)) / (2.0 * dv);
            assert_relative_eq!(
                fd,
                check_valve_derivative(v, delta),
                max_relative = 1e-5,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn langmuir_and_omega_derivatives_match_fd() {
        let params = test_params();
        let t = 310.0;
        let p = 4e5;
        let c = [200.0, 60.0, 4.0];
        let ns = 3;
        let pp = partial_pressures(p, &c);
        let lang = langmuir_eval(t, &pp, ns, &params);
        let om = omega_eval(t, &pp, &lang, ns, &params);

        // dq*/dT and domega/dT at fixed partial pressures.
        let dt = 1e-4 * t;
        let lang_p = langmuir_eval(t + dt, &pp, ns, &params);
        let lang_m = langmuir_eval(t - dt, &pp, ns, &params);
        let om_p = omega_eval(t + dt, &pp, &lang_p, ns, &params);
        let om_m = omega_eval(t - dt, &pp, &lang_m, ns, &params);
        for i in 0..ns {
            assert_relative_eq!(
                (lang_p.q_star[i] - lang_m.q_star[i]) / (2.0 * dt),
                lang.dq_dt[i],
                max_relative = 1e-5
            );
            assert_relative_eq!(
                (om_p.omega[i] - om_m.omega[i]) / (2.0 * dt),
                om.domega_dt[i],
                max_relative = 1e-5
            );
        }

        // dq*/dP_b and domega/dP_a via perturbed partial pressures.
        for j in 0..ns {
            let mut ppp = pp;
            let mut ppm = pp;
            let d = 1e-6 * (pp.p[j].abs() + 1.0);
            ppp.p[j] += d;
            ppm.p[j] -= d;
            let lp = langmuir_eval(t, &ppp, ns, &params);
            let lm = langmuir_eval(t, &ppm, ns, &params);
            for i in 0..ns {
                assert_relative_eq!(
                    (lp.q_star[i] - lm.q_star[i]) / (2.0 * d),
                    lang.dq_dpp[i][j],
                    max_relative = 1e-5,
                    epsilon = 1e-10
                );
            }
            let op = omega_eval(t, &ppp, &lp, ns, &params);
            let om2 = omega_eval(t, &ppm, &lm, ns, &params);
            assert_relative_eq!(
                (op.omega[j] - om2.omega[j]) / (2.0 * d),
                om.domega_dpp[j],
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn partial_pressure_floor_guards_vacuum() {
        let pp = partial_pressures(1e5, &[0.0, 0.0, 0.0]);
        assert!(pp.floored);
        for i in 0..3 {
            assert_eq!(pp.p[i], 0.0);
            assert!(pp.dp_dc[i][i].is_finite());
        }
    }
}
