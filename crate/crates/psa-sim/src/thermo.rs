//! Equation-of-state layer: volume, enthalpy, and internal energy as functions
//! of `(T, P, n)` for an ideal-gas model and a Peng-Robinson cubic model, with
//! exact partial derivatives for Jacobian assembly.
//!
//! All three thermodynamic functions are first-order homogeneous in the mole
//! vector `n`, and satisfy the identity `U = H - P V` by construction. The
//! cubic model always selects the vapor root (largest real root exceeding the
//! mixture covolume); no liquid phase arises in PSA air separation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::GAS_CONSTANT as R;

/// Maximum number of species supported by the fixed-size evaluation buffers.
pub const MAX_SPECIES: usize = 8;

/// Fixed-capacity species-indexed value buffer.
pub type SpeciesArray = [f64; MAX_SPECIES];

/// Reference temperature [K] for enthalpy integration (`h_ref` is defined here).
pub const T_REF: f64 = 298.15;

/// Errors raised by thermodynamic evaluations.
#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("invalid thermodynamic input: {0}")]
    InvalidInput(String),
    #[error("thermodynamic failure: {0}")]
    Failure(String),
}

/// Per-species property data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeciesData {
    pub name: String,
    /// Molar mass [kg/mol].
    pub molar_mass: f64,
    /// Critical pressure [Pa].
    pub critical_pressure: f64,
    /// Critical temperature [K] (used by the cubic model).
    pub critical_temperature: f64,
    /// Acentric factor [-] (used by the cubic model).
    pub acentric_factor: f64,
    /// Ideal-gas molar heat capacity polynomial coefficients:
    /// `cp(T) = sum_j cp_coeffs[j] * T^j` [J/(mol K)].
    pub cp_coeffs: Vec<f64>,
    /// Reference molar enthalpy at `T_REF` [J/mol].
    #[serde(default)]
    pub h_ref: f64,
}

impl SpeciesData {
    /// Ideal-gas molar heat capacity at `T` [J/(mol K)].
    pub fn cp(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut tp = 1.0;
        for &a in &self.cp_coeffs {
            acc += a * tp;
            tp *= t;
        }
        acc
    }

    /// Integral of `cp` from `T_REF` to `T` [J/mol].
    pub fn cp_integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut tp = t;
        let mut tr = T_REF;
        for (j, &a) in self.cp_coeffs.iter().enumerate() {
            acc += a * (tp - tr) / (j as f64 + 1.0);
            tp *= t;
            tr *= T_REF;
        }
        acc
    }
}

/// Which equation of state to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermoKind {
    Ideal,
    Cubic,
}

/// Peng-Robinson per-species constants, precomputed at model construction.
#[derive(Debug, Clone)]
struct PrSpecies {
    /// Covolume [m^3/mol].
    b: f64,
    /// `sqrt(a_c)` with `a_c = 0.45724 R^2 Tc^2 / Pc`.
    sqrt_ac: f64,
    /// Temperature-dependence constant `kappa`.
    kappa: f64,
    /// Critical temperature [K].
    tc: f64,
}

/// Thermodynamic model: an EOS kind plus the shared, ordered species list.
#[derive(Debug, Clone)]
pub struct ThermoModel {
    pub kind: ThermoKind,
    pub species: Vec<SpeciesData>,
    pr: Vec<PrSpecies>,
}

/// Full evaluation of `(V, H, U)` and their exact partial derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermoEval {
    pub volume: f64,
    pub enthalpy: f64,
    pub internal_energy: f64,
    pub dv_dt: f64,
    pub dv_dp: f64,
    pub dv_dn: SpeciesArray,
    pub dh_dt: f64,
    pub dh_dp: f64,
    pub dh_dn: SpeciesArray,
    pub du_dt: f64,
    pub du_dp: f64,
    pub du_dn: SpeciesArray,
}

impl ThermoModel {
    pub fn new(kind: ThermoKind, species: Vec<SpeciesData>) -> Result<Self, ThermoError> {
        if species.is_empty() || species.len() > MAX_SPECIES {
            return Err(ThermoError::InvalidInput(format!(
                "species count {} outside 1..={}",
                species.len(),
                MAX_SPECIES
            )));
        }
        for sp in &species {
            if !(sp.molar_mass > 0.0) || !(sp.critical_pressure > 0.0) {
                return Err(ThermoError::InvalidInput(format!(
                    "species {}: molar mass and critical pressure must be positive",
                    sp.name
                )));
            }
        }
        let pr = species
            .iter()
            .map(|sp| {
                let tc = sp.critical_temperature;
                let pc = sp.critical_pressure;
                let w = sp.acentric_factor;
                PrSpecies {
                    b: 0.077_80 * R * tc / pc,
                    sqrt_ac: (0.457_24 * R * R * tc * tc / pc).sqrt(),
                    kappa: 0.374_64 + 1.542_26 * w - 0.269_92 * w * w,
                    tc,
                }
            })
            .collect();
        Ok(Self { kind, species, pr })
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// Molar masses as a fixed-size buffer [kg/mol].
    pub fn molar_masses(&self) -> SpeciesArray {
        let mut m = [0.0; MAX_SPECIES];
        for (i, sp) in self.species.iter().enumerate() {
            m[i] = sp.molar_mass;
        }
        m
    }

    fn check_inputs(&self, t: f64, p: f64, n: &[f64]) -> Result<(), ThermoError> {
        if !t.is_finite() || !p.is_finite() || n.iter().any(|x| !x.is_finite()) {
            return Err(ThermoError::InvalidInput(format!(
                "non-finite state: T={t}, P={p}"
            )));
        }
        if t <= 0.0 || p <= 0.0 {
            return Err(ThermoError::InvalidInput(format!(
                "non-positive T={t} or P={p}"
            )));
        }
        Ok(())
    }

    /// Total gas volume `V(T, P, n)` [m^3].
    pub fn volume(&self, t: f64, p: f64, n: &[f64]) -> Result<f64, ThermoError> {
        Ok(self.evaluate(t, p, n)?.volume)
    }

    /// Total enthalpy `H(T, P, n)` [J].
    pub fn enthalpy(&self, t: f64, p: f64, n: &[f64]) -> Result<f64, ThermoError> {
        Ok(self.evaluate(t, p, n)?.enthalpy)
    }

    /// Total internal energy `U(T, P, n) = H - P V` [J].
    pub fn internal_energy(&self, t: f64, p: f64, n: &[f64]) -> Result<f64, ThermoError> {
        Ok(self.evaluate(t, p, n)?.internal_energy)
    }

    /// Evaluate `(V, H, U)` and all partial derivatives in one pass.
    pub fn evaluate(&self, t: f64, p: f64, n: &[f64]) -> Result<ThermoEval, ThermoError> {
        self.check_inputs(t, p, n)?;
        let ns = self.n_species();
        assert!(n.len() >= ns, "mole vector shorter than species list");
        let ntot: f64 = n[..ns].iter().sum();
        if !(ntot > 0.0) {
            return Err(ThermoError::InvalidInput(
                "total moles must be positive".into(),
            ));
        }

        // Ideal-gas contributions (shared by both model kinds).
        let mut ev = ThermoEval::default();
        let mut h_ig = 0.0;
        let mut dh_dt = 0.0;
        for (i, sp) in self.species.iter().enumerate() {
            let hi = sp.h_ref + sp.cp_integral(t);
            h_ig += n[i] * hi;
            dh_dt += n[i] * sp.cp(t);
            ev.dh_dn[i] = hi;
        }
        ev.enthalpy = h_ig;
        ev.dh_dt = dh_dt;
        ev.dh_dp = 0.0;

        match self.kind {
            ThermoKind::Ideal => {
                let v = ntot * R * t / p;
                ev.volume = v;
                ev.dv_dt = ntot * R / p;
                ev.dv_dp = -ntot * R * t / (p * p);
                for i in 0..ns {
                    ev.dv_dn[i] = R * t / p;
                }
            }
            ThermoKind::Cubic => {
                self.peng_robinson(t, p, n, ntot, &mut ev)?;
            }
        }

        // U = H - P V, differentiated exactly.
        ev.internal_energy = ev.enthalpy - p * ev.volume;
        ev.du_dt = ev.dh_dt - p * ev.dv_dt;
        ev.du_dp = ev.dh_dp - ev.volume - p * ev.dv_dp;
        for i in 0..ns {
            ev.du_dn[i] = ev.dh_dn[i] - p * ev.dv_dn[i];
        }
        Ok(ev)
    }

    /// Add Peng-Robinson volume and enthalpy-departure contributions to `ev`.
    ///
    /// The mixture uses van der Waals one-fluid mixing rules in extensive form:
    /// `A_m = s^2` with `s = sum_a n_a sqrt(a_a(T))` and `B_m = sum_a n_a b_a`.
    /// Volume derivatives follow from the implicit function theorem applied to
    /// the pressure-explicit EOS residual `F(V; T, P, n) = 0`.
    fn peng_robinson(
        &self,
        t: f64,
        p: f64,
        n: &[f64],
        ntot: f64,
        ev: &mut ThermoEval,
    ) -> Result<(), ThermoError> {
        let ns = self.n_species();
        let sqrt2 = std::f64::consts::SQRT_2;

        // Mixture parameters and their T/n derivatives.
        let mut s = 0.0; // sum n sqrt(a)
        let mut s1 = 0.0; // d s / dT
        let mut s2 = 0.0; // d2 s / dT2
        let mut b_m = 0.0;
        let mut sqrt_a = [0.0; MAX_SPECIES];
        let mut dsqrt_a = [0.0; MAX_SPECIES];
        for (i, prs) in self.pr.iter().enumerate() {
            let ratio = (t / prs.tc).sqrt();
            let sa = prs.sqrt_ac * (1.0 + prs.kappa * (1.0 - ratio));
            let dsa = -prs.sqrt_ac * prs.kappa / (2.0 * (t * prs.tc).sqrt());
            let d2sa = prs.sqrt_ac * prs.kappa / (4.0 * t.powf(1.5) * prs.tc.sqrt());
            sqrt_a[i] = sa;
            dsqrt_a[i] = dsa;
            s += n[i] * sa;
            s1 += n[i] * dsa;
            s2 += n[i] * d2sa;
            b_m += n[i] * prs.b;
        }
        let a_m = s * s;
        let a_t = 2.0 * s * s1;
        let a_tt = 2.0 * (s1 * s1 + s * s2);

        // Solve the cubic in Z = P V / (N R T), select the vapor root.
        let a_star = a_m * p / (ntot * ntot * R * R * t * t);
        let b_star = b_m * p / (ntot * R * t);
        let c2 = -(1.0 - b_star);
        let c1 = a_star - 3.0 * b_star * b_star - 2.0 * b_star;
        let c0 = -(a_star * b_star - b_star * b_star - b_star.powi(3));
        let z = largest_cubic_root_above(c2, c1, c0, b_star).ok_or_else(|| {
            ThermoError::Failure(format!(
                "no vapor root for cubic EOS at T={t}, P={p}"
            ))
        })?;
        let mut v = z * ntot * R * t / p;

        // Polish with Newton on the pressure-explicit residual
        // F(V) = P - N R T/(V - B) + A/(V^2 + 2 B V - B^2).
        for _ in 0..3 {
            let d1 = v - b_m;
            let d2 = v * v + 2.0 * b_m * v - b_m * b_m;
            let f = p - ntot * R * t / d1 + a_m / d2;
            let fv = ntot * R * t / (d1 * d1) - a_m * (2.0 * v + 2.0 * b_m) / (d2 * d2);
            if fv.abs() < f64::MIN_POSITIVE {
                break;
            }
            let dv = f / fv;
            let v_new = v - dv;
            if v_new > b_m {
                v = v_new;
            }
            if dv.abs() <= 1e-14 * v {
                break;
            }
        }
        if !(v > b_m) || !v.is_finite() {
            return Err(ThermoError::Failure(format!(
                "vapor root below covolume at T={t}, P={p}"
            )));
        }

        let d1 = v - b_m;
        let d2 = v * v + 2.0 * b_m * v - b_m * b_m;
        let fv = ntot * R * t / (d1 * d1) - a_m * (2.0 * v + 2.0 * b_m) / (d2 * d2);
        let ft = -ntot * R / d1 + a_t / d2;

        ev.volume = v;
        ev.dv_dt = -ft / fv;
        ev.dv_dp = -1.0 / fv;

        // Enthalpy departure:
        // H_dep = P V - N R T + (T A' - A)/(2 sqrt(2) B) * L,
        // L = ln[(V + (1+sqrt2) B)/(V + (1-sqrt2) B)].
        let wp = v + (1.0 + sqrt2) * b_m;
        let wm = v + (1.0 - sqrt2) * b_m;
        let l = (wp / wm).ln();
        let lv = 1.0 / wp - 1.0 / wm;
        let lb = (1.0 + sqrt2) / wp - (1.0 - sqrt2) / wm;
        let g = (t * a_t - a_m) / (2.0 * sqrt2 * b_m);

        ev.enthalpy += p * v - ntot * R * t + g * l;
        ev.dh_dt += p * ev.dv_dt - ntot * R
            + (t * a_tt) / (2.0 * sqrt2 * b_m) * l
            + g * lv * ev.dv_dt;
        ev.dh_dp += v + p * ev.dv_dp + g * lv * ev.dv_dp;

        for i in 0..ns {
            let a_n = 2.0 * s * sqrt_a[i];
            let a_tn = 2.0 * (s1 * sqrt_a[i] + s * dsqrt_a[i]);
            let b_n = self.pr[i].b;
            let fn_i = -R * t / d1 - ntot * R * t * b_n / (d1 * d1) + a_n / d2
                - a_m * (2.0 * v - 2.0 * b_m) * b_n / (d2 * d2);
            let v_n = -fn_i / fv;
            ev.dv_dn[i] = v_n;
            ev.dh_dn[i] += p * v_n - R * t
                + ((t * a_tn - a_n) / (2.0 * sqrt2 * b_m)
                    - (t * a_t - a_m) * b_n / (2.0 * sqrt2 * b_m * b_m))
                    * l
                + g * (lv * v_n + lb * b_n);
        }
        Ok(())
    }
}

/// Largest real root of `z^3 + c2 z^2 + c1 z + c0 = 0` strictly above `lower`.
fn largest_cubic_root_above(c2: f64, c1: f64, c0: f64, lower: f64) -> Option<f64> {
    // Depressed cubic t^3 + p t + q with z = t - c2/3.
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0).powi(3);
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        let z = t - shift;
        if z > lower && best.map_or(true, |b| z > b) {
            best = Some(z);
        }
    };
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = cbrt(-q / 2.0 + sq);
        let w = cbrt(-q / 2.0 - sq);
        consider(u + w);
    } else if p.abs() < 1e-300 {
        consider(cbrt(-q));
    } else {
        // Three real roots: trigonometric form.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            consider(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
        }
    }
    best
}

fn cbrt(x: f64) -> f64 {
    x.signum() * x.abs().powf(1.0 / 3.0)
}

/// Default air-component species set (N2, O2, Ar) with property-table data.
///
/// Heat-capacity polynomials are linear fits valid on [200 K, 500 K];
/// `h_ref = 0` at `T_REF` for all species (only enthalpy differences enter the
/// balances).
pub fn default_air_species() -> Vec<SpeciesData> {
    vec![
        SpeciesData {
            name: "N2".into(),
            molar_mass: 0.028_013_4,
            critical_pressure: 3.395_8e6,
            critical_temperature: 126.192,
            acentric_factor: 0.0372,
            cp_coeffs: vec![27.269, 4.930e-3],
            h_ref: 0.0,
        },
        SpeciesData {
            name: "O2".into(),
            molar_mass: 0.031_998_8,
            critical_pressure: 5.043e6,
            critical_temperature: 154.581,
            acentric_factor: 0.0222,
            cp_coeffs: vec![28.255, 4.207e-3],
            h_ref: 0.0,
        },
        SpeciesData {
            name: "Ar".into(),
            molar_mass: 0.039_948,
            critical_pressure: 4.863e6,
            critical_temperature: 150.687,
            acentric_factor: -0.002_19,
            cp_coeffs: vec![20.786],
            h_ref: 0.0,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn models() -> (ThermoModel, ThermoModel) {
        (
            ThermoModel::new(ThermoKind::Ideal, default_air_species()).unwrap(),
            ThermoModel::new(ThermoKind::Cubic, default_air_species()).unwrap(),
        )
    }

    fn random_state(rng: &mut ChaCha8Rng) -> (f64, f64, [f64; 3]) {
        let t = rng.gen_range(220.0..450.0);
        let p = rng.gen_range(2e4..1.2e6);
        let n = [
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(1e-3..2.0),
        ];
        (t, p, n)
    }

    #[test]
    fn ideal_volume_matches_gas_law() {
        // DERIVED oracle: R*T/P with R = 8.314462618.
        let (ideal, _) = models();
        let v = ideal.volume(298.15, 101_325.0, &[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 0.024_465_6, epsilon = 1e-6);
        let v8 = ideal.volume(298.0, 8e5, &[0.5, 0.3, 0.2]).unwrap();
        assert_relative_eq!(v8, 3.0971e-3, epsilon = 1e-6);
    }

    #[test]
    fn ideal_internal_energy_reference_state() {
        // DERIVED: H = 0 at T_REF with h_ref = 0, so U = -P V = -R T.
        let (ideal, _) = models();
        let u = ideal
            .internal_energy(T_REF, 101_325.0, &[1.0, 0.0, 0.0])
            .unwrap();
        assert_relative_eq!(u, -R * T_REF, max_relative = 1e-12);
    }

    #[test]
    fn homogeneity_both_kinds() {
        let (ideal, cubic) = models();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [&ideal, &cubic] {
            for _ in 0..200 {
                let (t, p, n) = random_state(&mut rng);
                for lam in [0.5, 2.0, 10.0] {
                    let nl: Vec<f64> = n.iter().map(|x| x * lam).collect();
                    let e0 = model.evaluate(t, p, &n).unwrap();
                    let e1 = model.evaluate(t, p, &nl).unwrap();
                    assert_relative_eq!(e1.volume, lam * e0.volume, max_relative = 1e-12);
                    assert_relative_eq!(e1.enthalpy, lam * e0.enthalpy, max_relative = 1e-11);
                    assert_relative_eq!(
                        e1.internal_energy,
                        lam * e0.internal_energy,
                        max_relative = 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn identity_u_eq_h_minus_pv() {
        let (ideal, cubic) = models();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for model in [&ideal, &cubic] {
            for _ in 0..500 {
                let (t, p, n) = random_state(&mut rng);
                let e = model.evaluate(t, p, &n).unwrap();
                assert_relative_eq!(
                    e.internal_energy,
                    e.enthalpy - p * e.volume,
                    max_relative = 1e-12,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn ideal_cubic_agree_at_low_pressure() {
        let (ideal, cubic) = models();
        let n = [0.78, 0.21, 0.01];
        let vi = ideal.volume(298.15, 1e3, &n).unwrap();
        let vc = cubic.volume(298.15, 1e3, &n).unwrap();
        assert_relative_eq!(vi, vc, max_relative = 1e-3);
    }

    #[test]
    fn cubic_real_gas_deviation_is_physical() {
        // At 8 bar and ambient temperature air is slightly denser than ideal.
        let (ideal, cubic) = models();
        let n = [0.78, 0.21, 0.01];
        let vi = ideal.volume(298.0, 8e5, &n).unwrap();
        let vc = cubic.volume(298.0, 8e5, &n).unwrap();
        assert!(vc < vi);
        assert!((vi - vc) / vi < 0.02);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (ideal, cubic) = models();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [&ideal, &cubic] {
            for _ in 0..100 {
                let (t, p, n) = random_state(&mut rng);
                let e = model.evaluate(t, p, &n).unwrap();
                let rel = 1e-6;

                let dt = rel * t;
                let ep = model.evaluate(t + dt, p, &n).unwrap();
                let em = model.evaluate(t - dt, p, &n).unwrap();
                assert_relative_eq!(
                    ev_fd(ep.volume, em.volume, dt),
                    e.dv_dt,
                    max_relative = 1e-6,
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    ev_fd(ep.enthalpy, em.enthalpy, dt),
                    e.dh_dt,
                    max_relative = 1e-6,
                    epsilon = 1e-8
                );
                assert_relative_eq!(
                    ev_fd(ep.internal_energy, em.internal_energy, dt),
                    e.du_dt,
                    max_relative = 1e-6,
                    epsilon = 1e-8
                );

                let dp = rel * p;
                let ep = model.evaluate(t, p + dp, &n).unwrap();
                let em = model.evaluate(t, p - dp, &n).unwrap();
                assert_relative_eq!(
                    ev_fd(ep.volume, em.volume, dp),
                    e.dv_dp,
                    max_relative = 1e-6,
                    epsilon = 1e-18
                );
                assert_relative_eq!(
                    ev_fd(ep.internal_energy, em.internal_energy, dp),
                    e.du_dp,
                    max_relative = 1e-6,
                    epsilon = 1e-10
                );

                for i in 0..3 {
                    // H and U are nearly linear in n (first-order homogeneous),
                    // so a larger step avoids cancellation noise without
                    // truncation error.
                    let dn = 1e-4 * (n[i].abs() + 0.1);
                    let mut np = n;
                    np[i] += dn;
                    let mut nm = n;
                    nm[i] -= dn;
                    let ep = model.evaluate(t, p, &np).unwrap();
                    let em = model.evaluate(t, p, &nm).unwrap();
                    assert_relative_eq!(
                        ev_fd(ep.volume, em.volume, dn),
                        e.dv_dn[i],
                        max_relative = 1e-6,
                        epsilon = 1e-12
                    );
                    assert_relative_eq!(
                        ev_fd(ep.enthalpy, em.enthalpy, dn),
                        e.dh_dn[i],
                        max_relative = 1e-6,
                        epsilon = 1e-6
                    );
                    assert_relative_eq!(
                        ev_fd(ep.internal_energy, em.internal_energy, dn),
                        e.du_dn[i],
                        max_relative = 1e-6,
                        epsilon = 1e-6
                    );
                }
            }
        }
    }

    fn ev_fd(fp: f64, fm: f64, dx: f64) -> f64 {
        (fp - fm) / (2.0 * dx)
    }

    #[test]
    fn ideal_dh_dp_is_zero() {
        let (ideal, _) = models();
        let e = ideal.evaluate(320.0, 5e5, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(e.dh_dp, 0.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let (ideal, _) = models();
        assert!(ideal.volume(-1.0, 1e5, &[1.0, 0.0, 0.0]).is_err());
        assert!(ideal.volume(300.0, f64::NAN, &[1.0, 0.0, 0.0]).is_err());
        assert!(ideal.volume(300.0, 1e5, &[0.0, 0.0, 0.0]).is_err());
    }
}
