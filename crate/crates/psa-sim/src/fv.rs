//! Cell-centered finite-volume semi-discretization of a packed adsorption
//! column.
//!
//! Each of the `K` cells carries the differential states `c` (mobile
//! concentrations, mol per gas volume), `q` (loadings, mol per stationary
//! volume) and `u` (energy density, J per total volume), plus the algebraic
//! states `T` and `P`. The two per-cell constraints close the system:
//! the energy density must match the thermodynamic reconstruction
//! `u = eps U(T,P,c) + (1-eps)(U(T,P,q) + rho_s cp_s (T - T_ref))`, and the
//! mobile phase must exactly fill the gas volume, `V(T,P,c) = 1`.
//!
//! Face fluxes use a donor-cell (upwind) closure with the interstitial
//! velocity obtained from the closed-form Ergun inversion of the cell-to-cell
//! pressure difference. Species fluxes `N = v c_donor` are per gas area;
//! energy fluxes `E = eps v H(T,P,c)_donor` are per total area. Boundary
//! faces are closed, carry a prescribed flux, or connect to an external
//! pressure through a smoothed check valve that only admits outflow.
//!
//! All Jacobian contributions are assembled analytically from the closed-form
//! partials carried by the thermodynamic and column closures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{
    check_valve, check_valve_derivative, ergun_coefficients, ergun_invert, gas_density,
    heat_source, langmuir_eval, ldf_rate, omega_eval, partial_pressures, AdsorbentParams,
    BedGeometry, ColumnError, LangmuirEval, OmegaEval, PartialPressures,
};
use crate::dae::{DaeError, DaeJacobian, DaeSystem};
use crate::linalg::LinearBackend;
use crate::thermo::{SpeciesArray, ThermoError, ThermoEval, ThermoModel, T_REF};

#[derive(Debug, Error)]
pub enum FvError {
    #[error("thermodynamic evaluation failed: {0}")]
    Thermo(#[from] ThermoError),
    #[error("column closure failed: {0}")]
    Column(#[from] ColumnError),
    #[error("invalid model: {0}")]
    Config(String),
}

/// Boundary closure of one column end.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum FaceBc {
    /// No flow through the face.
    Closed,
    /// Prescribed fluxes: species `n` per gas area [mol/(m^2 s)], energy `e`
    /// per total area [W/m^2]. Positive values point in +z.
    Flux { n: SpeciesArray, e: f64 },
    /// External pressure behind a smoothed check valve that only admits
    /// outflow (away from the adjacent cell).
    Pressure { p: f64, valve_delta: f64 },
}

/// Boundary closures of both ends (`inlet` at z = 0, `outlet` at z = L).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryConditions {
    pub inlet: FaceBc,
    pub outlet: FaceBc,
}

impl BoundaryConditions {
    pub fn closed() -> Self {
        Self {
            inlet: FaceBc::Closed,
            outlet: FaceBc::Closed,
        }
    }
}

/// Column index of a flux derivative, bed-local.
#[derive(Debug, Clone, Copy)]
pub enum VarCol {
    X(usize),
    Y(usize),
}

/// Face flux with sparse derivatives for Jacobian assembly.
#[derive(Debug, Clone, Default)]
pub struct FaceFlux {
    /// Species flux per gas area [mol/(m^2 s)], positive in +z.
    pub n: SpeciesArray,
    /// Energy flux per total area [W/m^2], positive in +z.
    pub e: f64,
    /// Derivatives `(column, dn/dcol, de/dcol)` with bed-local columns.
    pub derivs: Vec<(VarCol, SpeciesArray, f64)>,
}

/// Per-cell closure evaluations shared by residual and Jacobian assembly.
struct CellEval {
    gas: ThermoEval,
    ads: ThermoEval,
    pp: PartialPressures,
    lang: LangmuirEval,
    om: OmegaEval,
    /// LDF uptake rate `dq/dt` [mol/(m^3 s)].
    dtq: SpeciesArray,
}

/// Finite-volume model of one packed bed.
#[derive(Debug, Clone)]
pub struct BedModel {
    pub geometry: BedGeometry,
    pub adsorbent: AdsorbentParams,
    pub thermo: ThermoModel,
    pub n_cells: usize,
}

impl BedModel {
    pub fn new(
        geometry: BedGeometry,
        adsorbent: AdsorbentParams,
        thermo: ThermoModel,
        n_cells: usize,
    ) -> Result<Self, FvError> {
        geometry.validate()?;
        adsorbent.validate(thermo.n_species())?;
        if n_cells == 0 {
            return Err(FvError::Config("need at least one cell".into()));
        }
        Ok(Self {
            geometry,
            adsorbent,
            thermo,
            n_cells,
        })
    }

    pub fn n_species(&self) -> usize {
        self.thermo.n_species()
    }

    pub fn n_x(&self) -> usize {
        self.n_cells * (2 * self.n_species() + 1)
    }

    pub fn n_y(&self) -> usize {
        2 * self.n_cells
    }

    pub fn dz(&self) -> f64 {
        self.geometry.length / self.n_cells as f64
    }

    /// Mobile concentration of species `a` in cell `k`.
    pub fn idx_c(&self, k: usize, a: usize) -> usize {
        k * self.n_species() + a
    }

    /// Loading of species `a` in cell `k`.
    pub fn idx_q(&self, k: usize, a: usize) -> usize {
        self.n_cells * self.n_species() + k * self.n_species() + a
    }

    /// Energy density of cell `k`.
    pub fn idx_u(&self, k: usize) -> usize {
        2 * self.n_cells * self.n_species() + k
    }

    /// Temperature of cell `k` (algebraic index).
    pub fn idx_t(&self, k: usize) -> usize {
        k
    }

    /// Pressure of cell `k` (algebraic index).
    pub fn idx_p(&self, k: usize) -> usize {
        self.n_cells + k
    }

    /// Residual scale of the energy constraint [J/(m^3 K)].
    fn energy_scale(&self) -> f64 {
        self.adsorbent.rho_solid * self.adsorbent.cp_solid
    }

    /// Energy density `u(T, P, c, q)` [J/m^3 total].
    pub fn energy_density(&self, t: f64, p: f64, c: &[f64], q: &[f64]) -> Result<f64, FvError> {
        let eps = self.geometry.porosity;
        let gas = self.thermo.evaluate(t, p, c)?;
        let ads = self.thermo.evaluate(t, p, q)?;
        Ok(eps * gas.internal_energy
            + (1.0 - eps) * (ads.internal_energy + self.energy_scale() * (t - T_REF)))
    }

    /// Uniform consistent state at `(t, p)` with mobile mole fractions
    /// `y_frac` and loadings `q` (equilibrium loadings when `None`).
    pub fn uniform_state(
        &self,
        t: f64,
        p: f64,
        y_frac: &[f64],
        q: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>), FvError> {
        let ns = self.n_species();
        let vm = self.thermo.volume(t, p, y_frac)?;
        let mut c = vec![0.0; ns];
        for a in 0..ns {
            c[a] = y_frac[a] / vm;
        }
        let q = match q {
            Some(q) => q.to_vec(),
            None => {
                let pp = partial_pressures(p, &c);
                langmuir_eval(t, &pp, ns, &self.adsorbent).q_star[..ns].to_vec()
            }
        };
        let u = self.energy_density(t, p, &c, &q)?;
        let mut x = vec![0.0; self.n_x()];
        let mut y = vec![0.0; self.n_y()];
        for k in 0..self.n_cells {
            for a in 0..ns {
                x[self.idx_c(k, a)] = c[a];
                x[self.idx_q(k, a)] = q[a];
            }
            x[self.idx_u(k)] = u;
            y[self.idx_t(k)] = t;
            y[self.idx_p(k)] = p;
        }
        Ok((x, y))
    }

    /// Species inventory per total cross-section area [mol/m^2]:
    /// `sum_k dz (eps c_k + (1 - eps) q_k)`.
    pub fn species_inventory(&self, x: &[f64]) -> SpeciesArray {
        let eps = self.geometry.porosity;
        let dz = self.dz();
        let mut inv = SpeciesArray::default();
        for k in 0..self.n_cells {
            for a in 0..self.n_species() {
                inv[a] += dz * (eps * x[self.idx_c(k, a)] + (1.0 - eps) * x[self.idx_q(k, a)]);
            }
        }
        inv
    }

    /// Conserved energy per total cross-section area [J/m^2] in a closed
    /// column: `sum_k dz (u_k + (1 - eps) sum_a dH_a q_ka)`.
    pub fn energy_inventory(&self, x: &[f64]) -> f64 {
        let eps = self.geometry.porosity;
        let dz = self.dz();
        let mut inv = 0.0;
        for k in 0..self.n_cells {
            let mut adh = 0.0;
            for a in 0..self.n_species() {
                adh += self.adsorbent.species[a].delta_h * x[self.idx_q(k, a)];
            }
            inv += dz * (x[self.idx_u(k)] + (1.0 - eps) * adh);
        }
        inv
    }

    fn eval_cells(&self, x: &[f64], y: &[f64]) -> Result<Vec<CellEval>, FvError> {
        let ns = self.n_species();
        let mut cells = Vec::with_capacity(self.n_cells);
        for k in 0..self.n_cells {
            let t = y[self.idx_t(k)];
            let p = y[self.idx_p(k)];
            let c = &x[self.idx_c(k, 0)..self.idx_c(k, 0) + ns];
            let q = &x[self.idx_q(k, 0)..self.idx_q(k, 0) + ns];
            let gas = self.thermo.evaluate(t, p, c)?;
            let ads = self.thermo.evaluate(t, p, q)?;
            let pp = partial_pressures(p, c);
            let lang = langmuir_eval(t, &pp, ns, &self.adsorbent);
            let om = omega_eval(t, &pp, &lang, ns, &self.adsorbent);
            let dtq = ldf_rate(q, &lang.q_star, &om.omega);
            cells.push(CellEval {
                gas,
                ads,
                pp,
                lang,
                om,
                dtq,
            });
        }
        Ok(cells)
    }

    /// Donor-cell flux from a pressure gradient, optionally behind a check
    /// valve.
    ///
    /// `grad_cols` lists algebraic columns contributing to `dpdz` with their
    /// coefficients `d(dpdz)/dP_col`. `valve` is `Some(sgn, delta)` for a
    /// boundary valve passing only velocities of sign `sgn`.
    #[allow(clippy::too_many_arguments)]
    fn donor_face(
        &self,
        d: usize,
        dpdz: f64,
        grad_cols: &[(usize, f64)],
        valve: Option<(f64, f64)>,
        x: &[f64],
        gas: &ThermoEval,
        want_derivs: bool,
    ) -> Result<FaceFlux, FvError> {
        let ns = self.n_species();
        let eps = self.geometry.porosity;
        let masses = self.thermo.molar_masses();
        let c_d = &x[self.idx_c(d, 0)..self.idx_c(d, 0) + ns];
        let rho = gas_density(c_d, &masses[..ns]);
        let (a, b) = ergun_coefficients(rho, &self.geometry, &self.adsorbent);
        let ee = ergun_invert(dpdz, a, b)?;
        // Valve clamp: v = sgn * cv(sgn * v_raw); chain factor cv'(sgn v_raw)
        // multiplies every velocity derivative.
        let (v, chain) = match valve {
            None => (ee.v, 1.0),
            Some((sgn, delta)) => (
                sgn * check_valve(sgn * ee.v, delta),
                check_valve_derivative(sgn * ee.v, delta),
            ),
        };
        let h_d = gas.enthalpy;
        let mut face = FaceFlux::default();
        for alpha in 0..ns {
            face.n[alpha] = v * c_d[alpha];
        }
        face.e = eps * v * h_d;
        if !want_derivs {
            return Ok(face);
        }
        // Pressure-gradient columns drive the velocity; the donor pressure
        // additionally enters the transported enthalpy.
        for &(col, coeff) in grad_cols {
            let dv = chain * ee.dv_dg * coeff;
            let mut dn = SpeciesArray::default();
            for alpha in 0..ns {
                dn[alpha] = dv * c_d[alpha];
            }
            let mut de = eps * dv * h_d;
            if col == self.idx_p(d) {
                de += eps * v * gas.dh_dp;
            }
            face.derivs.push((VarCol::Y(col), dn, de));
        }
        // Donor temperature enters the transported enthalpy only.
        face.derivs.push((
            VarCol::Y(self.idx_t(d)),
            SpeciesArray::default(),
            eps * v * gas.dh_dt,
        ));
        // Donor concentrations: density in the Ergun B coefficient, the
        // advected composition itself, and the enthalpy composition partials.
        let db_drho = if rho > 0.0 { b / rho } else { 0.0 };
        for beta in 0..ns {
            let dv = chain * ee.dv_db * db_drho * masses[beta];
            let mut dn = SpeciesArray::default();
            for alpha in 0..ns {
                dn[alpha] = dv * c_d[alpha] + if alpha == beta { v } else { 0.0 };
            }
            let de = eps * (dv * h_d + v * gas.dh_dn[beta]);
            face.derivs.push((VarCol::X(self.idx_c(d, beta)), dn, de));
        }
        Ok(face)
    }

    /// Flux through the interior face between cells `k` and `k+1`.
    fn interior_face(
        &self,
        k: usize,
        x: &[f64],
        y: &[f64],
        cells: &[CellEval],
        want_derivs: bool,
    ) -> Result<FaceFlux, FvError> {
        let dz = self.dz();
        let dpdz = (y[self.idx_p(k + 1)] - y[self.idx_p(k)]) / dz;
        // The donor is always the left cell: the superstructure guarantees
        // unidirectional (+z) flow through its check valves, and a fixed
        // donor keeps the flux smooth in the state.
        self.donor_face(
            k,
            dpdz,
            &[(self.idx_p(k), -1.0 / dz), (self.idx_p(k + 1), 1.0 / dz)],
            None,
            x,
            &cells[k].gas,
            want_derivs,
        )
    }

    /// Flux through a boundary face (`end = 0` at z = 0, `end = 1` at z = L).
    pub fn boundary_face(
        &self,
        end: usize,
        bc: &FaceBc,
        x: &[f64],
        y: &[f64],
        want_derivs: bool,
    ) -> Result<FaceFlux, FvError> {
        let d = if end == 0 { 0 } else { self.n_cells - 1 };
        let gas = match bc {
            // Only the pressure closure needs the donor thermodynamics.
            FaceBc::Pressure { .. } => {
                let ns = self.n_species();
                self.thermo.evaluate(
                    y[self.idx_t(d)],
                    y[self.idx_p(d)],
                    &x[self.idx_c(d, 0)..self.idx_c(d, 0) + ns],
                )?
            }
            _ => ThermoEval::default(),
        };
        self.boundary_face_with_gas(end, bc, x, y, &gas, want_derivs)
    }

    fn boundary_face_with_gas(
        &self,
        end: usize,
        bc: &FaceBc,
        x: &[f64],
        y: &[f64],
        gas: &ThermoEval,
        want_derivs: bool,
    ) -> Result<FaceFlux, FvError> {
        match *bc {
            FaceBc::Closed => Ok(FaceFlux::default()),
            FaceBc::Flux { n, e } => Ok(FaceFlux {
                n,
                e,
                derivs: Vec::new(),
            }),
            FaceBc::Pressure { p, valve_delta } => {
                let half = self.dz() / 2.0;
                if end == 0 {
                    // Outflow is -z; gradient from the external plenum to
                    // cell 0 over half a cell.
                    let dpdz = (y[self.idx_p(0)] - p) / half;
                    self.donor_face(
                        0,
                        dpdz,
                        &[(self.idx_p(0), 1.0 / half)],
                        Some((-1.0, valve_delta)),
                        x,
                        gas,
                        want_derivs,
                    )
                } else {
                    let d = self.n_cells - 1;
                    let dpdz = (p - y[self.idx_p(d)]) / half;
                    self.donor_face(
                        d,
                        dpdz,
                        &[(self.idx_p(d), -1.0 / half)],
                        Some((1.0, valve_delta)),
                        x,
                        gas,
                        want_derivs,
                    )
                }
            }
        }
    }

    fn faces(
        &self,
        x: &[f64],
        y: &[f64],
        bc: &BoundaryConditions,
        cells: &[CellEval],
        want_derivs: bool,
    ) -> Result<Vec<FaceFlux>, FvError> {
        let k_cells = self.n_cells;
        let mut faces = Vec::with_capacity(k_cells + 1);
        faces.push(self.boundary_face_with_gas(0, &bc.inlet, x, y, &cells[0].gas, want_derivs)?);
        for k in 0..k_cells - 1 {
            faces.push(self.interior_face(k, x, y, cells, want_derivs)?);
        }
        faces.push(self.boundary_face_with_gas(
            1,
            &bc.outlet,
            x,
            y,
            &cells[k_cells - 1].gas,
            want_derivs,
        )?);
        Ok(faces)
    }

    /// Differential right-hand side `x' = f(x, y)` under boundary data `bc`.
    pub fn f(
        &self,
        x: &[f64],
        y: &[f64],
        bc: &BoundaryConditions,
        out: &mut [f64],
    ) -> Result<(), FvError> {
        let ns = self.n_species();
        let eps = self.geometry.porosity;
        let ratio = self.geometry.volume_ratio();
        let dz = self.dz();
        let dh: Vec<f64> = self.adsorbent.species.iter().map(|s| s.delta_h).collect();
        let cells = self.eval_cells(x, y)?;
        let faces = self.faces(x, y, bc, &cells, false)?;
        for k in 0..self.n_cells {
            let ce = &cells[k];
            for a in 0..ns {
                out[self.idx_q(k, a)] = ce.dtq[a];
                out[self.idx_c(k, a)] =
                    -(faces[k + 1].n[a] - faces[k].n[a]) / dz - ratio * ce.dtq[a];
            }
            out[self.idx_u(k)] =
                -(faces[k + 1].e - faces[k].e) / dz + heat_source(&ce.dtq[..ns], &dh, eps);
        }
        Ok(())
    }

    /// Algebraic residuals, scaled to O(1).
    pub fn g(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), FvError> {
        let eps = self.geometry.porosity;
        let scale = self.energy_scale();
        let cells = self.eval_cells(x, y)?;
        for k in 0..self.n_cells {
            let t = y[self.idx_t(k)];
            let ce = &cells[k];
            let u_model = eps * ce.gas.internal_energy
                + (1.0 - eps) * (ce.ads.internal_energy + scale * (t - T_REF));
            out[self.idx_t(k)] = (x[self.idx_u(k)] - u_model) / scale;
            out[self.idx_p(k)] = ce.gas.volume - 1.0;
        }
        Ok(())
    }

    /// Analytic Jacobian blocks, written into `jac` with row/column offsets
    /// `x_off` (differential) and `y_off` (algebraic) so that two beds can be
    /// assembled into one coupled system.
    pub fn jacobian(
        &self,
        x: &[f64],
        y: &[f64],
        bc: &BoundaryConditions,
        jac: &mut DaeJacobian,
        x_off: usize,
        y_off: usize,
    ) -> Result<(), FvError> {
        let ns = self.n_species();
        let eps = self.geometry.porosity;
        let ratio = self.geometry.volume_ratio();
        let dz = self.dz();
        let scale = self.energy_scale();
        let dh: Vec<f64> = self.adsorbent.species.iter().map(|s| s.delta_h).collect();
        let cells = self.eval_cells(x, y)?;
        let faces = self.faces(x, y, bc, &cells, true)?;

        for k in 0..self.n_cells {
            let ce = &cells[k];
            // LDF rate partials d(dtq_a)/d{q, c, T, P} (cell-local).
            // dtq_a = om_a (q*_a - q_a); q* and om depend on (T, pp(P, c)).
            let mut ddtq_dc = [[0.0f64; 8]; 8]; // [a][gamma]
            let mut ddtq_dt = SpeciesArray::default();
            let mut ddtq_dp = SpeciesArray::default();
            for a in 0..ns {
                let dq_star = ce.lang.q_star[a] - x[self.idx_q(k, a)];
                ddtq_dt[a] = ce.om.domega_dt[a] * dq_star + ce.om.omega[a] * ce.lang.dq_dt[a];
                // Partial-pressure chains: omega_a depends on p_a only,
                // q*_a on all p_b.
                let mut dqstar_dp = 0.0;
                for b in 0..ns {
                    dqstar_dp += ce.lang.dq_dpp[a][b] * ce.pp.dp_dptot[b];
                }
                ddtq_dp[a] = ce.om.domega_dpp[a] * ce.pp.dp_dptot[a] * dq_star
                    + ce.om.omega[a] * dqstar_dp;
                for g in 0..ns {
                    let mut dqstar_dc = 0.0;
                    for b in 0..ns {
                        dqstar_dc += ce.lang.dq_dpp[a][b] * ce.pp.dp_dc[b][g];
                    }
                    ddtq_dc[a][g] = ce.om.domega_dpp[a] * ce.pp.dp_dc[a][g] * dq_star
                        + ce.om.omega[a] * dqstar_dc;
                }
            }

            for a in 0..ns {
                let row_q = x_off + self.idx_q(k, a);
                let row_c = x_off + self.idx_c(k, a);
                // q rows.
                jac.fx
                    .push(row_q, x_off + self.idx_q(k, a), -ce.om.omega[a]);
                for g in 0..ns {
                    jac.fx
                        .push(row_q, x_off + self.idx_c(k, g), ddtq_dc[a][g]);
                }
                jac.fy.push(row_q, y_off + self.idx_t(k), ddtq_dt[a]);
                jac.fy.push(row_q, y_off + self.idx_p(k), ddtq_dp[a]);
                // c rows: adsorption source -ratio * dtq (flux part below).
                jac.fx
                    .push(row_c, x_off + self.idx_q(k, a), ratio * ce.om.omega[a]);
                for g in 0..ns {
                    jac.fx
                        .push(row_c, x_off + self.idx_c(k, g), -ratio * ddtq_dc[a][g]);
                }
                jac.fy
                    .push(row_c, y_off + self.idx_t(k), -ratio * ddtq_dt[a]);
                jac.fy
                    .push(row_c, y_off + self.idx_p(k), -ratio * ddtq_dp[a]);
            }
            // u row: heat source Q = -(1-eps) sum_a dH_a dtq_a (flux below).
            let row_u = x_off + self.idx_u(k);
            let w = -(1.0 - eps);
            for a in 0..ns {
                jac.fx.push(
                    row_u,
                    x_off + self.idx_q(k, a),
                    w * dh[a] * (-ce.om.omega[a]),
                );
            }
            for g in 0..ns {
                let mut acc = 0.0;
                for a in 0..ns {
                    acc += dh[a] * ddtq_dc[a][g];
                }
                jac.fx.push(row_u, x_off + self.idx_c(k, g), w * acc);
            }
            let mut acc_t = 0.0;
            let mut acc_p = 0.0;
            for a in 0..ns {
                acc_t += dh[a] * ddtq_dt[a];
                acc_p += dh[a] * ddtq_dp[a];
            }
            jac.fy.push(row_u, y_off + self.idx_t(k), w * acc_t);
            jac.fy.push(row_u, y_off + self.idx_p(k), w * acc_p);

            // Algebraic rows: energy reconstruction and volume constraint.
            let row_gt = y_off + self.idx_t(k);
            let row_gp = y_off + self.idx_p(k);
            jac.gx.push(row_gt, x_off + self.idx_u(k), 1.0 / scale);
            for a in 0..ns {
                jac.gx.push(
                    row_gt,
                    x_off + self.idx_c(k, a),
                    -eps * ce.gas.du_dn[a] / scale,
                );
                jac.gx.push(
                    row_gt,
                    x_off + self.idx_q(k, a),
                    -(1.0 - eps) * ce.ads.du_dn[a] / scale,
                );
            }
            jac.gy.push(
                row_gt,
                y_off + self.idx_t(k),
                -(eps * ce.gas.du_dt + (1.0 - eps) * (ce.ads.du_dt + scale)) / scale,
            );
            jac.gy.push(
                row_gt,
                y_off + self.idx_p(k),
                -(eps * ce.gas.du_dp + (1.0 - eps) * ce.ads.du_dp) / scale,
            );
            for a in 0..ns {
                jac.gx
                    .push(row_gp, x_off + self.idx_c(k, a), ce.gas.dv_dn[a]);
            }
            jac.gy.push(row_gp, y_off + self.idx_t(k), ce.gas.dv_dt);
            jac.gy.push(row_gp, y_off + self.idx_p(k), ce.gas.dv_dp);
        }

        // Face-flux contributions to the c and u rows. Face j sits between
        // cell j-1 (its right face, weight -1/dz) and cell j (left face,
        // weight +1/dz).
        for (j, face) in faces.iter().enumerate() {
            for &(cell, wgt) in &[(j as isize - 1, -1.0 / dz), (j as isize, 1.0 / dz)] {
                if cell < 0 || cell >= self.n_cells as isize {
                    continue;
                }
                let cell = cell as usize;
                for (col, dn, de) in &face.derivs {
                    match *col {
                        VarCol::X(c_idx) => {
                            for a in 0..ns {
                                jac.fx.push(
                                    x_off + self.idx_c(cell, a),
                                    x_off + c_idx,
                                    wgt * dn[a],
                                );
                            }
                            jac.fx
                                .push(x_off + self.idx_u(cell), x_off + c_idx, wgt * de);
                        }
                        VarCol::Y(y_idx) => {
                            for a in 0..ns {
                                jac.fy.push(
                                    x_off + self.idx_c(cell, a),
                                    y_off + y_idx,
                                    wgt * dn[a],
                                );
                            }
                            jac.fy
                                .push(x_off + self.idx_u(cell), y_off + y_idx, wgt * de);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-cell variable block size in the banded ordering.
pub fn bed_block_size(n_species: usize) -> usize {
    2 * n_species + 3
}

/// Banded symmetric ordering for `n_beds` identical beds of `n_cells` cells:
/// per cell the variables are interleaved `[c_0..c_S, q_0..q_S, u, T, P]`,
/// which keeps all intra-bed coupling within bandwidth `2 blk - 1`.
///
/// The returned vector maps the global index (all differential states of all
/// beds first, then all algebraic states) to its banded position.
pub fn banded_ordering(n_cells: usize, n_species: usize, n_beds: usize) -> (usize, Vec<usize>) {
    let blk = bed_block_size(n_species);
    let n_x_bed = n_cells * (2 * n_species + 1);
    let n_y_bed = 2 * n_cells;
    let n_x = n_beds * n_x_bed;
    let mut ordering = vec![0usize; n_beds * (n_x_bed + n_y_bed)];
    for bed in 0..n_beds {
        for k in 0..n_cells {
            let base = (bed * n_cells + k) * blk;
            for a in 0..n_species {
                // c then q.
                ordering[bed * n_x_bed + k * n_species + a] = base + a;
                ordering[bed * n_x_bed + n_cells * n_species + k * n_species + a] =
                    base + n_species + a;
            }
            ordering[bed * n_x_bed + 2 * n_cells * n_species + k] = base + 2 * n_species;
            // Algebraic: T then P, appended after all x in the global index.
            ordering[n_x + bed * n_y_bed + k] = base + 2 * n_species + 1;
            ordering[n_x + bed * n_y_bed + n_cells + k] = base + 2 * n_species + 2;
        }
    }
    (2 * blk - 1, ordering)
}

/// A single bed with fixed boundary conditions as a standalone DAE system
/// (test harness and single-column studies).
pub struct SingleBed {
    pub model: BedModel,
    pub bc: BoundaryConditions,
}

impl SingleBed {
    fn map_err(t: f64, e: FvError) -> DaeError {
        DaeError::ModelEval {
            t,
            message: e.to_string(),
        }
    }
}

impl DaeSystem for SingleBed {
    fn n_x(&self) -> usize {
        self.model.n_x()
    }

    fn n_y(&self) -> usize {
        self.model.n_y()
    }

    fn f(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError> {
        self.model
            .f(x, y, &self.bc, out)
            .map_err(|e| Self::map_err(t, e))
    }

    fn g(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError> {
        self.model.g(x, y, out).map_err(|e| Self::map_err(t, e))
    }

    fn jacobian(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        jac: &mut DaeJacobian,
    ) -> Result<(), DaeError> {
        jac.clear();
        self.model
            .jacobian(x, y, &self.bc, jac, 0, 0)
            .map_err(|e| Self::map_err(t, e))
    }

    fn feasible(&self, _x: &[f64], y: &[f64]) -> bool {
        y.iter().all(|v| v.is_finite() && *v > 0.0)
    }

    fn backend(&self) -> LinearBackend {
        let (bandwidth, ordering) = banded_ordering(self.model.n_cells, self.model.n_species(), 1);
        LinearBackend::Banded {
            bandwidth,
            ordering,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::{test_geometry, test_params};
    use crate::dae::{integrate, tableau::registry, NoopObserver, StepController};
    use crate::thermo::{default_air_species, ThermoKind};
    use approx::assert_relative_eq;

    const FEED: [f64; 3] = [0.78, 0.21, 0.01];

    fn test_model(kind: ThermoKind, n_cells: usize) -> BedModel {
        BedModel::new(
            test_geometry(),
            test_params(),
            ThermoModel::new(kind, default_air_species()).unwrap(),
            n_cells,
        )
        .unwrap()
    }

    /// A consistent but non-uniform state with ramped T and P profiles and
    /// sub-equilibrium loadings, so all closures are active.
    fn ramped_state(model: &BedModel) -> (Vec<f64>, Vec<f64>) {
        let kk = model.n_cells;
        let ns = model.n_species();
        let mut x = vec![0.0; model.n_x()];
        let mut y = vec![0.0; model.n_y()];
        for k in 0..kk {
            let frac = k as f64 / kk.max(1) as f64;
            let t = 300.0 + 10.0 * frac;
            let p = 8.0e5 - 1.0e4 * frac;
            let vm = model.thermo.volume(t, p, &FEED).unwrap();
            let mut c = vec![0.0; ns];
            for a in 0..ns {
                c[a] = FEED[a] / vm;
            }
            let pp = partial_pressures(p, &c);
            let lang = langmuir_eval(t, &pp, ns, &model.adsorbent);
            let mut q = vec![0.0; ns];
            for a in 0..ns {
                q[a] = 0.9 * lang.q_star[a];
            }
            let u = model.energy_density(t, p, &c, &q).unwrap();
            for a in 0..ns {
                x[model.idx_c(k, a)] = c[a];
                x[model.idx_q(k, a)] = q[a];
            }
            x[model.idx_u(k)] = u;
            y[model.idx_t(k)] = t;
            y[model.idx_p(k)] = p;
        }
        (x, y)
    }

    fn feed_flux_bc(model: &BedModel, v_in: f64, t_in: f64, p_in: f64) -> FaceBc {
        let ns = model.n_species();
        let vm = model.thermo.volume(t_in, p_in, &FEED).unwrap();
        let mut n = SpeciesArray::default();
        for a in 0..ns {
            n[a] = v_in * FEED[a] / vm;
        }
        let h = model.thermo.enthalpy(t_in, p_in, &FEED).unwrap() / vm;
        let e = model.geometry.porosity * v_in * h;
        FaceBc::Flux { n, e }
    }

    /// Analytic Jacobian vs central finite differences, all blocks, with
    /// active inlet flux and outlet check-valve boundary conditions.
    fn jacobian_fd_case(kind: ThermoKind, tol: f64) {
        let model = test_model(kind, 3);
        let (x, y) = ramped_state(&model);
        let bc = BoundaryConditions {
            inlet: feed_flux_bc(&model, 0.05, 298.0, 8.0e5),
            outlet: FaceBc::Pressure {
                p: 7.8e5,
                valve_delta: 1e-4,
            },
        };
        let n_x = model.n_x();
        let n_y = model.n_y();
        let mut jac = DaeJacobian::new(n_x, n_y);
        model.jacobian(&x, &y, &bc, &mut jac, 0, 0).unwrap();
        let fx = jac.fx.to_dense();
        let fy = jac.fy.to_dense();
        let gx = jac.gx.to_dense();
        let gy = jac.gy.to_dense();

        let eval = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut f = vec![0.0; n_x];
            let mut g = vec![0.0; n_y];
            model.f(x, y, &bc, &mut f).unwrap();
            model.g(x, y, &mut g).unwrap();
            (f, g)
        };

        let check = |name: &str, an: &nalgebra::DMatrix<f64>, fd: &nalgebra::DMatrix<f64>| {
            let scale = an.amax().max(fd.amax()).max(1e-10);
            for i in 0..an.nrows() {
                for j in 0..an.ncols() {
                    let denom = an[(i, j)].abs().max(fd[(i, j)].abs()).max(1e-7 * scale);
                    let rel = (an[(i, j)] - fd[(i, j)]).abs() / denom;
                    assert!(
                        rel <= tol,
                        "{name}[{i},{j}]: analytic {} vs fd {} (rel {rel:.2e})",
                        an[(i, j)],
                        fd[(i, j)]
                    );
                }
            }
        };

        // FD over x columns.
        let mut fx_fd = nalgebra::DMatrix::zeros(n_x, n_x);
        let mut gx_fd = nalgebra::DMatrix::zeros(n_y, n_x);
        for j in 0..n_x {
            let h = 1e-6 * x[j].abs().max(1e-2);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, gp) = eval(&xp, &y);
            let (fm, gm) = eval(&xm, &y);
            for i in 0..n_x {
                fx_fd[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
            for i in 0..n_y {
                gx_fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        // FD over y columns.
        let mut fy_fd = nalgebra::DMatrix::zeros(n_x, n_y);
        let mut gy_fd = nalgebra::DMatrix::zeros(n_y, n_y);
        for j in 0..n_y {
            let h = 1e-6 * y[j].abs().max(1e-2);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let (fp, gp) = eval(&x, &yp);
            let (fm, gm) = eval(&x, &ym);
            for i in 0..n_x {
                fy_fd[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
            for i in 0..n_y {
                gy_fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        check("fx", &fx, &fx_fd);
        check("fy", &fy, &fy_fd);
        check("gx", &gx, &gx_fd);
        check("gy", &gy, &gy_fd);
    }

    #[test]
    fn jacobian_matches_finite_difference_ideal() {
        jacobian_fd_case(ThermoKind::Ideal, 2e-4);
    }

    #[test]
    fn jacobian_matches_finite_difference_cubic() {
        jacobian_fd_case(ThermoKind::Cubic, 2e-4);
    }

    /// A uniform equilibrium state of a closed column is a fixed point of the
    /// semi-discretization.
    #[test]
    fn equilibrium_state_is_stationary() {
        let model = test_model(ThermoKind::Ideal, 4);
        let (x, y) = model.uniform_state(300.0, 5.0e5, &FEED, None).unwrap();
        let mut f = vec![0.0; model.n_x()];
        let mut g = vec![0.0; model.n_y()];
        model
            .f(&x, &y, &BoundaryConditions::closed(), &mut f)
            .unwrap();
        model.g(&x, &y, &mut g).unwrap();
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(fmax < 1e-9, "residual f = {fmax:.3e}");
        assert!(gmax < 1e-9, "residual g = {gmax:.3e}");
    }

    /// Closed-column relaxation conserves per-species moles and the combined
    /// energy invariant to integration tolerance.
    #[test]
    fn closed_column_conserves_invariants() {
        let model = test_model(ThermoKind::Ideal, 5);
        let (x0, y0) = ramped_state(&model);
        let system = SingleBed {
            model: model.clone(),
            bc: BoundaryConditions::closed(),
        };
        let tab = registry().remove(1);
        let mut ctrl = StepController::with_tolerances(1e-8, 1e-10);
        let r = integrate(
            &system, &tab, &mut ctrl, &x0, &y0, 0.0, 5.0, &[], &mut NoopObserver,
        )
        .unwrap();
        let inv0 = model.species_inventory(&x0);
        let inv1 = model.species_inventory(&r.x);
        for a in 0..model.n_species() {
            assert_relative_eq!(inv1[a], inv0[a], max_relative = 1e-8);
        }
        let e0 = model.energy_inventory(&x0);
        let e1 = model.energy_inventory(&r.x);
        assert_relative_eq!(e1, e0, max_relative = 1e-7);
        // The relaxation must have done something (loadings move to q*).
        assert!(r.stats.accepted_steps > 3);
    }

    /// Feeding a closed-outlet column raises pressure and the mole balance
    /// closes against the injected amount.
    #[test]
    fn pressurization_mole_balance() {
        let model = test_model(ThermoKind::Ideal, 4);
        let (x0, y0) = model.uniform_state(298.0, 4.0e5, &FEED, None).unwrap();
        let v_in = 0.05;
        let bc = BoundaryConditions {
            inlet: feed_flux_bc(&model, v_in, 298.0, 8.0e5),
            outlet: FaceBc::Closed,
        };
        let inlet_n = match bc.inlet {
            FaceBc::Flux { n, .. } => n,
            _ => unreachable!(),
        };
        let system = SingleBed {
            model: model.clone(),
            bc,
        };
        let tab = registry().remove(1);
        let mut ctrl = StepController::with_tolerances(1e-8, 1e-10);
        let tf = 2.0;
        let r = integrate(
            &system, &tab, &mut ctrl, &x0, &y0, 0.0, tf, &[], &mut NoopObserver,
        )
        .unwrap();
        let eps = model.geometry.porosity;
        let inv0 = model.species_inventory(&x0);
        let inv1 = model.species_inventory(&r.x);
        for a in 0..model.n_species() {
            let injected = eps * inlet_n[a] * tf;
            assert_relative_eq!(inv1[a] - inv0[a], injected, max_relative = 1e-6);
        }
        // Pressure must have risen everywhere.
        for k in 0..model.n_cells {
            assert!(r.y[model.idx_p(k)] > y0[model.idx_p(k)]);
        }
    }

    /// The banded ordering keeps every Jacobian entry of a single bed within
    /// the declared bandwidth.
    #[test]
    fn ordering_covers_bed_sparsity() {
        let model = test_model(ThermoKind::Ideal, 6);
        let (x, y) = ramped_state(&model);
        let bc = BoundaryConditions {
            inlet: feed_flux_bc(&model, 0.05, 298.0, 8.0e5),
            outlet: FaceBc::Pressure {
                p: 7.8e5,
                valve_delta: 1e-4,
            },
        };
        let mut jac = DaeJacobian::new(model.n_x(), model.n_y());
        model.jacobian(&x, &y, &bc, &mut jac, 0, 0).unwrap();
        let (bandwidth, ordering) = banded_ordering(model.n_cells, model.n_species(), 1);
        let n_x = model.n_x();
        let check = |rows: &[usize], cols: &[usize], row_is_y: bool, col_is_y: bool| {
            for (&i, &j) in rows.iter().zip(cols) {
                let pi = ordering[if row_is_y { n_x + i } else { i }];
                let pj = ordering[if col_is_y { n_x + j } else { j }];
                let span = pi.abs_diff(pj);
                assert!(
                    span <= bandwidth,
                    "entry ({i},{j}) span {span} exceeds bandwidth {bandwidth}"
                );
            }
        };
        check(&jac.fx.rows, &jac.fx.cols, false, false);
        check(&jac.fy.rows, &jac.fy.cols, false, true);
        check(&jac.gx.rows, &jac.gx.cols, true, false);
        check(&jac.gy.rows, &jac.gy.cols, true, true);
    }

    /// Consistent initialization recovers (T, P) from perturbed guesses.
    #[test]
    fn consistent_init_recovers_algebraic_state() {
        use crate::dae::consistent_init;
        let model = test_model(ThermoKind::Cubic, 4);
        let (x, y) = ramped_state(&model);
        let system = SingleBed {
            model,
            bc: BoundaryConditions::closed(),
        };
        let mut y_guess = y.clone();
        for (i, v) in y_guess.iter_mut().enumerate() {
            *v *= 1.0 + 0.02 * ((i % 3) as f64 - 1.0);
        }
        let y_rec = consistent_init(&system, 0.0, &x, &y_guess, 1e-11, 50).unwrap();
        for k in 0..y.len() {
            assert_relative_eq!(y_rec[k], y[k], max_relative = 1e-7);
        }
    }

    /// Outflow through the outlet valve vents a pressurized column toward
    /// the external pressure; no inflow occurs when the column is below it.
    #[test]
    fn check_valve_blocks_inflow() {
        let model = test_model(ThermoKind::Ideal, 3);
        // Column below the external pressure: valve must pass ~nothing.
        let (x, y) = model.uniform_state(298.0, 2.0e5, &FEED, None).unwrap();
        let face = model
            .boundary_face(
                1,
                &FaceBc::Pressure {
                    p: 8.0e5,
                    valve_delta: 1e-6,
                },
                &x,
                &y,
                false,
            )
            .unwrap();
        let ntot: f64 = face.n[..3].iter().sum();
        assert!(
            ntot.abs() < 1e-3,
            "valve leaked inflow: {ntot:.3e} mol/(m^2 s)"
        );
        // Column above: distinct outflow.
        let (x, y) = model.uniform_state(298.0, 8.0e5, &FEED, None).unwrap();
        let face = model
            .boundary_face(
                1,
                &FaceBc::Pressure {
                    p: 2.0e5,
                    valve_delta: 1e-6,
                },
                &x,
                &y,
                false,
            )
            .unwrap();
        let ntot: f64 = face.n[..3].iter().sum();
        assert!(ntot > 1.0, "expected outflow, got {ntot:.3e}");
    }
}
