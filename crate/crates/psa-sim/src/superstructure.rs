//! Two-bed PSA superstructure: step schedule, inter-bed coupling, half-cycle
//! propagator, and the bed-swap/axial-reversal permutation.
//!
//! The superstructure couples two identical beds through valve settings that
//! change piecewise-constantly over the schedule of a half-cycle. At any time
//! one bed is in the *adsorption* role (slot 0, fed and producing) and the
//! other in the *desorption* role (slot 1, venting and being purged). The
//! outlet of each bed faces its pressure header through a smoothed check
//! valve; inlets receive
//!
//! * adsorption bed: `n_in = phi f_in / S_gas + alpha n_out,des`,
//!   `e_in = eps phi h_in / S_gas + alpha e_out,des`,
//! * desorption bed: `n_in = beta n_out,ads`, `e_in = beta e_out,ads`,
//!
//! with species fluxes per gas area and energy fluxes per total area, so both
//! recycle terms are exactly mole- and energy-consistent at every instant.
//!
//! A half-cycle integrates the coupled system step by step; the full cycle is
//! the composition with the permutation `P` that swaps the bed roles and
//! reverses the axial cell ordering (the desorption slot is stored in the
//! reversed frame of its physical bed). Cyclic steady state is the fixed
//! point `P Phi(x) = x` of the half-cycle propagator `Phi`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dae::integrate::{integrate, Observer, Statistics};
use crate::dae::sens::integrate_with_sensitivities;
use crate::dae::{consistent_init, ButcherTableau, DaeError, DaeJacobian, DaeSystem, StepController};
use crate::fv::{banded_ordering, BedModel, BoundaryConditions, FaceBc, FaceFlux, FvError, VarCol};
use crate::linalg::LinearBackend;
use crate::thermo::SpeciesArray;
use crate::{GAS_CONSTANT, P_AMBIENT, T_AMBIENT};

#[derive(Debug, Error)]
pub enum SuperError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid feed: {0}")]
    Feed(String),
    #[error("model error: {0}")]
    Fv(#[from] FvError),
    #[error("degenerate product stream: no product collected")]
    EmptyProduct,
    #[error("trajectory not at cyclic steady state: residual {residual:.3e} exceeds {tol:.3e}")]
    NotConverged { residual: f64, tol: f64 },
}

/// One schedule step: valve settings and header pressures, constant over its
/// duration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    /// Duration [s].
    pub duration: f64,
    /// Adsorption-bed outlet header pressure [Pa].
    pub p_ads: f64,
    /// Desorption-bed outlet header pressure [Pa].
    pub p_des: f64,
    /// Fraction of the desorption outlet recycled to the adsorption inlet.
    pub alpha: f64,
    /// Fraction of the adsorption outlet routed to the desorption inlet
    /// (purge/equalization split); the remainder `1 - beta` is product.
    pub beta: f64,
    /// Feed valve opening fraction.
    pub phi: f64,
}

/// Half-cycle schedule: an ordered list of steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSchedule {
    pub steps: Vec<Step>,
}

impl StepSchedule {
    /// Half-cycle duration [s].
    pub fn tau(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    /// Start time of step `i` within the half-cycle [s].
    pub fn start_of(&self, i: usize) -> f64 {
        self.steps[..i].iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), SuperError> {
        if self.steps.is_empty() {
            return Err(SuperError::Schedule("schedule has no steps".into()));
        }
        for s in &self.steps {
            // Zero-duration steps are legal (identity propagation): they
            // let schedules be degenerate for testing without special cases.
            if !(s.duration >= 0.0) || !s.duration.is_finite() {
                return Err(SuperError::Schedule(format!(
                    "step {}: duration {} must be nonnegative",
                    s.name, s.duration
                )));
            }
            if !(s.p_ads > 0.0) || !(s.p_des > 0.0) {
                return Err(SuperError::Schedule(format!(
                    "step {}: header pressures must be positive",
                    s.name
                )));
            }
            for (label, v) in [("alpha", s.alpha), ("beta", s.beta), ("phi", s.phi)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(SuperError::Schedule(format!(
                        "step {}: {label} = {v} outside [0, 1]",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// The reference four-step nitrogen-generation schedule:
    /// pressurization, adsorption, purge, and pressure equalization.
    pub fn reference() -> Self {
        let step = |name: &str, duration, p_ads, p_des, alpha, beta, phi| Step {
            name: name.into(),
            duration,
            p_ads,
            p_des,
            alpha,
            beta,
            phi,
        };
        Self {
            steps: vec![
                step("PR", 20.0, 8.0e5, 1.0e5, 0.0, 0.0, 1.0),
                step("ADS", 20.0, 8.0e5, 1.0e5, 0.0, 0.0, 1.0),
                step("PUR", 45.0, 8.0e5, 1.0e5, 0.0, 0.5, 1.0),
                step("EQ", 5.0, 4.5e5, 8.0e5, 0.0, 1.0, 0.0),
            ],
        }
    }
}

/// Feed stream specification: a fixed molar flow at fixed inlet conditions.
#[derive(Debug, Clone)]
pub struct FeedSpec {
    /// Species molar flows [mol/s] at full feed-valve opening.
    pub f_in: SpeciesArray,
    /// Feed temperature [K].
    pub t_in: f64,
    /// Feed pressure [Pa].
    pub p_in: f64,
}

impl FeedSpec {
    /// Feed defined by a velocity through the column cross-section.
    ///
    /// `superficial` bases the velocity on the total cross-section; otherwise
    /// it is interstitial (gas cross-section).
    pub fn from_velocity(
        bed: &BedModel,
        v_in: f64,
        superficial: bool,
        t_in: f64,
        p_in: f64,
        y_frac: &[f64],
    ) -> Result<Self, SuperError> {
        let area = if superficial {
            bed.geometry.cross_section_total()
        } else {
            bed.geometry.cross_section_gas()
        };
        let vm = bed
            .thermo
            .volume(t_in, p_in, y_frac)
            .map_err(FvError::from)?;
        let mut f_in = SpeciesArray::default();
        for (a, &ya) in y_frac.iter().enumerate() {
            f_in[a] = v_in * area * ya / vm;
        }
        Ok(Self { f_in, t_in, p_in })
    }

    pub fn total_flow(&self, n_species: usize) -> f64 {
        self.f_in[..n_species].iter().sum()
    }
}

/// The two coupled beds over one half-cycle schedule.
///
/// State layout: `x = [x_ads; x_des]`, `y = [y_ads; y_des]` with each block
/// in the single-bed layout of [`BedModel`].
#[derive(Debug, Clone)]
pub struct TwoBedSystem {
    pub bed: BedModel,
    pub schedule: StepSchedule,
    pub feed: FeedSpec,
    /// Smoothing parameter of the outlet check valves [m^2/s^2].
    pub valve_delta: f64,
    /// Feed species flux per gas area [mol/(m^2 s)] at full valve opening.
    n_feed: SpeciesArray,
    /// Feed energy flux per total area [W/m^2] at full valve opening.
    e_feed: f64,
}

impl TwoBedSystem {
    pub fn new(
        bed: BedModel,
        schedule: StepSchedule,
        feed: FeedSpec,
        valve_delta: f64,
    ) -> Result<Self, SuperError> {
        schedule.validate()?;
        if !(valve_delta > 0.0) {
            return Err(SuperError::Schedule(format!(
                "valve delta {valve_delta} must be positive"
            )));
        }
        let ns = bed.n_species();
        if !(feed.t_in > 0.0) || !(feed.p_in > 0.0) {
            return Err(SuperError::Feed("feed T and P must be positive".into()));
        }
        if feed.f_in[..ns].iter().any(|v| *v < 0.0) || !(feed.total_flow(ns) > 0.0) {
            return Err(SuperError::Feed(
                "feed flows must be nonnegative with positive total".into(),
            ));
        }
        let s_gas = bed.geometry.cross_section_gas();
        let eps = bed.geometry.porosity;
        // Feed molar enthalpy flow [W] at inlet conditions.
        let h_in = bed
            .thermo
            .enthalpy(feed.t_in, feed.p_in, &feed.f_in[..ns])
            .map_err(FvError::from)?;
        let mut n_feed = SpeciesArray::default();
        for a in 0..ns {
            n_feed[a] = feed.f_in[a] / s_gas;
        }
        let e_feed = eps * h_in / s_gas;
        Ok(Self {
            bed,
            schedule,
            feed,
            valve_delta,
            n_feed,
            e_feed,
        })
    }

    pub fn n_x(&self) -> usize {
        2 * self.bed.n_x()
    }

    pub fn n_y(&self) -> usize {
        2 * self.bed.n_y()
    }

    /// View of the system with one schedule step pinned (piecewise-constant
    /// boundary data without time lookup at segment boundaries).
    pub fn at_step(&self, i: usize) -> SteppedTwoBed<'_> {
        SteppedTwoBed {
            sys: self,
            step: &self.schedule.steps[i],
        }
    }

    fn split<'a>(&self, v: &'a [f64], per_bed: usize) -> (&'a [f64], &'a [f64]) {
        v.split_at(per_bed)
    }

    /// Outlet check-valve fluxes of both beds under `step`'s header pressures.
    pub fn outlet_faces(
        &self,
        step: &Step,
        x: &[f64],
        y: &[f64],
        want_derivs: bool,
    ) -> Result<(FaceFlux, FaceFlux), FvError> {
        let (xa, xd) = self.split(x, self.bed.n_x());
        let (ya, yd) = self.split(y, self.bed.n_y());
        let out_ads = FaceBc::Pressure {
            p: step.p_ads,
            valve_delta: self.valve_delta,
        };
        let out_des = FaceBc::Pressure {
            p: step.p_des,
            valve_delta: self.valve_delta,
        };
        let fa = self.bed.boundary_face(1, &out_ads, xa, ya, want_derivs)?;
        let fd = self.bed.boundary_face(1, &out_des, xd, yd, want_derivs)?;
        Ok((fa, fd))
    }

    /// Boundary conditions of both beds under `step`, with the inter-bed
    /// recycle fluxes closed from the current outlet states.
    fn boundary_conditions(
        &self,
        step: &Step,
        out_ads: &FaceFlux,
        out_des: &FaceFlux,
    ) -> (BoundaryConditions, BoundaryConditions) {
        let ns = self.bed.n_species();
        let mut n_in_ads = SpeciesArray::default();
        let mut n_in_des = SpeciesArray::default();
        for a in 0..ns {
            n_in_ads[a] = step.phi * self.n_feed[a] + step.alpha * out_des.n[a];
            n_in_des[a] = step.beta * out_ads.n[a];
        }
        let e_in_ads = step.phi * self.e_feed + step.alpha * out_des.e;
        let e_in_des = step.beta * out_ads.e;
        let bc_ads = BoundaryConditions {
            inlet: FaceBc::Flux {
                n: n_in_ads,
                e: e_in_ads,
            },
            outlet: FaceBc::Pressure {
                p: step.p_ads,
                valve_delta: self.valve_delta,
            },
        };
        let bc_des = BoundaryConditions {
            inlet: FaceBc::Flux {
                n: n_in_des,
                e: e_in_des,
            },
            outlet: FaceBc::Pressure {
                p: step.p_des,
                valve_delta: self.valve_delta,
            },
        };
        (bc_ads, bc_des)
    }

    /// Uniform cold-start state: both beds at feed composition and
    /// temperature, at the lowest desorption header pressure, with loadings
    /// equilibrated to that state.
    pub fn cold_start_state(&self) -> Result<(Vec<f64>, Vec<f64>), SuperError> {
        let ns = self.bed.n_species();
        let p0 = self
            .schedule
            .steps
            .iter()
            .map(|s| s.p_des)
            .fold(f64::INFINITY, f64::min);
        let ftot = self.feed.total_flow(ns);
        let mut y_frac = vec![0.0; ns];
        for a in 0..ns {
            y_frac[a] = self.feed.f_in[a] / ftot;
        }
        let (xb, yb) = self.bed.uniform_state(self.feed.t_in, p0, &y_frac, None)?;
        let mut x = xb.clone();
        x.extend_from_slice(&xb);
        let mut y = yb.clone();
        y.extend_from_slice(&yb);
        Ok((x, y))
    }
}

/// [`TwoBedSystem`] restricted to one schedule step (boundary data constant).
pub struct SteppedTwoBed<'a> {
    pub sys: &'a TwoBedSystem,
    pub step: &'a Step,
}

impl SteppedTwoBed<'_> {
    fn map_err(t: f64, e: FvError) -> DaeError {
        DaeError::ModelEval {
            t,
            message: e.to_string(),
        }
    }
}

impl DaeSystem for SteppedTwoBed<'_> {
    fn n_x(&self) -> usize {
        self.sys.n_x()
    }

    fn n_y(&self) -> usize {
        self.sys.n_y()
    }

    fn f(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError> {
        let sys = self.sys;
        let bed = &sys.bed;
        let n_xb = bed.n_x();
        let (xa, xd) = sys.split(x, n_xb);
        let (ya, yd) = sys.split(y, bed.n_y());
        let (out_ads, out_des) = sys
            .outlet_faces(self.step, x, y, false)
            .map_err(|e| Self::map_err(t, e))?;
        let (bc_ads, bc_des) = sys.boundary_conditions(self.step, &out_ads, &out_des);
        let (oa, od) = out.split_at_mut(n_xb);
        bed.f(xa, ya, &bc_ads, oa).map_err(|e| Self::map_err(t, e))?;
        bed.f(xd, yd, &bc_des, od).map_err(|e| Self::map_err(t, e))?;
        Ok(())
    }

    fn g(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError> {
        let bed = &self.sys.bed;
        let (xa, xd) = self.sys.split(x, bed.n_x());
        let (ya, yd) = self.sys.split(y, bed.n_y());
        let (oa, od) = out.split_at_mut(bed.n_y());
        bed.g(xa, ya, oa).map_err(|e| Self::map_err(t, e))?;
        bed.g(xd, yd, od).map_err(|e| Self::map_err(t, e))?;
        Ok(())
    }

    fn jacobian(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        jac: &mut DaeJacobian,
    ) -> Result<(), DaeError> {
        let sys = self.sys;
        let bed = &sys.bed;
        let ns = bed.n_species();
        let n_xb = bed.n_x();
        let n_yb = bed.n_y();
        let dz = bed.dz();
        let (xa, xd) = sys.split(x, n_xb);
        let (ya, yd) = sys.split(y, n_yb);
        let (out_ads, out_des) = sys
            .outlet_faces(self.step, x, y, true)
            .map_err(|e| Self::map_err(t, e))?;
        let (bc_ads, bc_des) = sys.boundary_conditions(self.step, &out_ads, &out_des);

        jac.clear();
        bed.jacobian(xa, ya, &bc_ads, jac, 0, 0)
            .map_err(|e| Self::map_err(t, e))?;
        bed.jacobian(xd, yd, &bc_des, jac, n_xb, n_yb)
            .map_err(|e| Self::map_err(t, e))?;

        // Cross-bed coupling: each bed's inlet flux enters its cell-0
        // divergence with weight +1/dz and carries the other bed's outlet
        // derivatives scaled by the recycle fraction.
        let mut couple = |gain: f64,
                          face: &FaceFlux,
                          src_x_off: usize,
                          src_y_off: usize,
                          dst_x_off: usize| {
            if gain == 0.0 {
                return;
            }
            let w = gain / dz;
            for (col, dn, de) in &face.derivs {
                match *col {
                    VarCol::X(j) => {
                        for a in 0..ns {
                            jac.fx
                                .push(dst_x_off + bed.idx_c(0, a), src_x_off + j, w * dn[a]);
                        }
                        jac.fx.push(dst_x_off + bed.idx_u(0), src_x_off + j, w * de);
                    }
                    VarCol::Y(j) => {
                        for a in 0..ns {
                            jac.fy
                                .push(dst_x_off + bed.idx_c(0, a), src_y_off + j, w * dn[a]);
                        }
                        jac.fy.push(dst_x_off + bed.idx_u(0), src_y_off + j, w * de);
                    }
                }
            }
        };
        // Adsorption inlet from desorption outlet (alpha recycle).
        couple(self.step.alpha, &out_des, n_xb, n_yb, 0);
        // Desorption inlet from adsorption outlet (beta purge split).
        couple(self.step.beta, &out_ads, 0, 0, n_xb);
        Ok(())
    }

    fn feasible(&self, _x: &[f64], y: &[f64]) -> bool {
        y.iter().all(|v| v.is_finite() && *v > 0.0)
    }

    fn backend(&self) -> LinearBackend {
        let (bandwidth, ordering) =
            banded_ordering(self.sys.bed.n_cells, self.sys.bed.n_species(), 2);
        LinearBackend::Banded {
            bandwidth,
            ordering,
        }
    }
}

/// Integrated stream totals over a half-cycle [mol per species].
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FlowTotals {
    /// Product drawn from the adsorption outlet, `(1 - beta)` split.
    pub product: SpeciesArray,
    /// Vent leaving the desorption outlet, `(1 - alpha)` split.
    pub vent: SpeciesArray,
    /// Feed admitted through the feed valve.
    pub feed: SpeciesArray,
}

impl FlowTotals {
    fn add_assign(&mut self, other: &FlowTotals) {
        for a in 0..self.product.len() {
            self.product[a] += other.product[a];
            self.vent[a] += other.vent[a];
            self.feed[a] += other.feed[a];
        }
    }
}

/// One recorded trajectory sample of the coupled system.
#[derive(Debug, Clone)]
pub struct ProfileSample {
    /// Time within the half-cycle [s].
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Stage-quadrature accumulator for the stream totals of one schedule step,
/// optionally recording accepted states.
struct StepFlowObserver<'a> {
    sys: &'a TwoBedSystem,
    step: &'a Step,
    flows: FlowTotals,
    profile: Option<&'a mut Vec<ProfileSample>>,
    error: Option<FvError>,
}

impl Observer for StepFlowObserver<'_> {
    fn on_stage(&mut self, _t: f64, x: &[f64], y: &[f64], weight: f64) {
        if self.error.is_some() {
            return;
        }
        let (out_ads, out_des) = match self.sys.outlet_faces(self.step, x, y, false) {
            Ok(fluxes) => fluxes,
            Err(e) => {
                self.error = Some(e);
                return;
            }
        };
        let ns = self.sys.bed.n_species();
        let s_gas = self.sys.bed.geometry.cross_section_gas();
        for a in 0..ns {
            self.flows.product[a] += weight * (1.0 - self.step.beta) * out_ads.n[a] * s_gas;
            self.flows.vent[a] += weight * (1.0 - self.step.alpha) * out_des.n[a] * s_gas;
            self.flows.feed[a] += weight * self.step.phi * self.sys.feed.f_in[a];
        }
    }

    fn on_accepted(&mut self, t: f64, x: &[f64], y: &[f64]) {
        if let Some(profile) = self.profile.as_deref_mut() {
            profile.push(ProfileSample {
                t,
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
    }
}

/// Result of one half-cycle propagation `Phi(x0)`.
#[derive(Debug, Clone)]
pub struct HalfCycleResult {
    /// Terminal differential state `Phi(x0)`.
    pub x: Vec<f64>,
    /// Terminal algebraic state (consistent).
    pub y: Vec<f64>,
    /// Integrated stream totals.
    pub flows: FlowTotals,
    /// Accumulated integration statistics.
    pub stats: Statistics,
}

fn merge_stats(acc: &mut Statistics, s: &Statistics) {
    acc.accepted_steps += s.accepted_steps;
    acc.rejected_steps += s.rejected_steps;
    acc.newton_failures += s.newton_failures;
    acc.newton_iterations += s.newton_iterations;
    acc.factorizations += s.factorizations;
    acc.f_evaluations += s.f_evaluations;
    acc.jacobian_evaluations += s.jacobian_evaluations;
}

/// Tolerance of the consistent initialization at the half-cycle start.
const INIT_TOL: f64 = 1e-10;
const INIT_MAX_ITER: usize = 50;

/// Propagate one half-cycle: `(x, y) -> Phi(x, y)` with stream quadrature.
///
/// `y_guess` seeds the consistent initialization of the algebraic states;
/// the step size restarts at each schedule step with
/// `h = min(h_prev, duration / 100)`. When `record` is given, every accepted
/// state of the trajectory is appended to it (initial state included).
pub fn half_cycle_propagate(
    sys: &TwoBedSystem,
    x0: &[f64],
    y_guess: &[f64],
    tableau: &ButcherTableau,
    controller: &StepController,
    mut record: Option<&mut Vec<ProfileSample>>,
) -> Result<HalfCycleResult, DaeError> {
    let mut x = x0.to_vec();
    let mut y = consistent_init(&sys.at_step(0), 0.0, &x, y_guess, INIT_TOL, INIT_MAX_ITER)?;
    if let Some(profile) = record.as_deref_mut() {
        profile.push(ProfileSample {
            t: 0.0,
            x: x.clone(),
            y: y.clone(),
        });
    }
    let mut flows = FlowTotals::default();
    let mut stats = Statistics::default();
    let mut t = 0.0;
    let mut h_prev = f64::INFINITY;
    for (i, step) in sys.schedule.steps.iter().enumerate() {
        let stepped = sys.at_step(i);
        let mut ctrl = controller.clone();
        if !ctrl.fixed_step {
            ctrl.h_init = Some(h_prev.min(1e-2 * step.duration));
        }
        let mut obs = StepFlowObserver {
            sys,
            step,
            flows: FlowTotals::default(),
            profile: record.as_deref_mut(),
            error: None,
        };
        let r = integrate(
            &stepped,
            tableau,
            &mut ctrl,
            &x,
            &y,
            t,
            t + step.duration,
            &[],
            &mut obs,
        )?;
        if let Some(e) = obs.error {
            return Err(DaeError::ModelEval {
                t,
                message: e.to_string(),
            });
        }
        flows.add_assign(&obs.flows);
        merge_stats(&mut stats, &r.stats);
        x = r.x;
        y = r.y;
        t += step.duration;
        if r.h_last > 0.0 {
            h_prev = r.h_last;
        }
    }
    Ok(HalfCycleResult { x, y, flows, stats })
}

/// Propagate one half-cycle with forward sensitivities of the terminal
/// differential state with respect to seed directions in the initial state.
///
/// `seed` is `n_x x m` column-major; the returned matrix is
/// `d Phi / d x0 * seed` in the same layout. Sensitivities chain across the
/// schedule steps through the staggered direct method.
pub fn half_cycle_propagate_with_sensitivities(
    sys: &TwoBedSystem,
    x0: &[f64],
    y_guess: &[f64],
    tableau: &ButcherTableau,
    controller: &StepController,
    seed: &[f64],
) -> Result<(HalfCycleResult, Vec<f64>), DaeError> {
    let mut x = x0.to_vec();
    let mut y = consistent_init(&sys.at_step(0), 0.0, &x, y_guess, INIT_TOL, INIT_MAX_ITER)?;
    let mut sx = seed.to_vec();
    let mut flows = FlowTotals::default();
    let mut stats = Statistics::default();
    let mut t = 0.0;
    let mut h_prev = f64::INFINITY;
    for (i, step) in sys.schedule.steps.iter().enumerate() {
        let stepped = sys.at_step(i);
        let mut ctrl = controller.clone();
        if !ctrl.fixed_step {
            ctrl.h_init = Some(h_prev.min(1e-2 * step.duration));
        }
        let mut obs = StepFlowObserver {
            sys,
            step,
            flows: FlowTotals::default(),
            profile: None,
            error: None,
        };
        let (r, sx_next) = integrate_with_sensitivities(
            &stepped,
            tableau,
            &mut ctrl,
            &x,
            &y,
            t,
            t + step.duration,
            &[],
            &sx,
            &mut obs,
        )?;
        if let Some(e) = obs.error {
            return Err(DaeError::ModelEval {
                t,
                message: e.to_string(),
            });
        }
        flows.add_assign(&obs.flows);
        merge_stats(&mut stats, &r.stats);
        x = r.x;
        y = r.y;
        sx = sx_next;
        t += step.duration;
        if r.h_last > 0.0 {
            h_prev = r.h_last;
        }
    }
    Ok((HalfCycleResult { x, y, flows, stats }, sx))
}

/// Axially reverse the differential state of one bed block.
pub fn flip_bed_x(bed: &BedModel, xb: &[f64]) -> Vec<f64> {
    let kk = bed.n_cells;
    let ns = bed.n_species();
    let mut out = vec![0.0; bed.n_x()];
    for k in 0..kk {
        let ks = kk - 1 - k;
        for a in 0..ns {
            out[bed.idx_c(k, a)] = xb[bed.idx_c(ks, a)];
            out[bed.idx_q(k, a)] = xb[bed.idx_q(ks, a)];
        }
        out[bed.idx_u(k)] = xb[bed.idx_u(ks)];
    }
    out
}

/// Axially reverse the algebraic state of one bed block.
pub fn flip_bed_y(bed: &BedModel, yb: &[f64]) -> Vec<f64> {
    let kk = bed.n_cells;
    let mut out = vec![0.0; bed.n_y()];
    for k in 0..kk {
        let ks = kk - 1 - k;
        out[bed.idx_t(k)] = yb[bed.idx_t(ks)];
        out[bed.idx_p(k)] = yb[bed.idx_p(ks)];
    }
    out
}

/// The half-cycle permutation `P` on differential states: swap the two bed
/// blocks and reverse the axial cell ordering of each field. `P` is an
/// involution (`P P = I`).
pub fn permute_x(bed: &BedModel, x: &[f64]) -> Vec<f64> {
    let n_xb = bed.n_x();
    debug_assert_eq!(x.len(), 2 * n_xb);
    let mut out = flip_bed_x(bed, &x[n_xb..]);
    out.extend(flip_bed_x(bed, &x[..n_xb]));
    out
}

/// The half-cycle permutation on algebraic states.
pub fn permute_y(bed: &BedModel, y: &[f64]) -> Vec<f64> {
    let n_yb = bed.n_y();
    debug_assert_eq!(y.len(), 2 * n_yb);
    let mut out = flip_bed_y(bed, &y[n_yb..]);
    out.extend(flip_bed_y(bed, &y[..n_yb]));
    out
}

/// Cycle performance metrics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    /// Product mole fraction of the key species [-].
    pub purity: f64,
    /// Product moles of the key species per mole of it fed [-].
    pub recovery: f64,
    /// Product collected per half-cycle [mol].
    pub product_mol: f64,
    /// Product volumetric rate at ambient reference conditions [m^3/h].
    pub product_rate_m3h: f64,
}

/// Purity, recovery, and product rate from half-cycle stream totals.
///
/// `key` is the index of the product species (nitrogen). The volumetric rate
/// is reported as ideal gas at 298.15 K and 1 atm.
pub fn performance_metrics(
    flows: &FlowTotals,
    n_species: usize,
    key: usize,
    tau: f64,
) -> Result<Metrics, SuperError> {
    let product_mol: f64 = flows.product[..n_species].iter().sum();
    if !(product_mol > 0.0) {
        return Err(SuperError::EmptyProduct);
    }
    let fed_key = flows.feed[key];
    if !(fed_key > 0.0) {
        return Err(SuperError::EmptyProduct);
    }
    let vm_ambient = GAS_CONSTANT * T_AMBIENT / P_AMBIENT;
    Ok(Metrics {
        purity: flows.product[key] / product_mol,
        recovery: flows.product[key] / fed_key,
        product_mol,
        product_rate_m3h: product_mol / tau * vm_ambient * 3600.0,
    })
}

/// One full-cycle sample with both physical beds in their own axial frames.
#[derive(Debug, Clone)]
pub struct StitchedSample {
    /// Time within the full cycle [s].
    pub t: f64,
    pub bed_a_x: Vec<f64>,
    pub bed_a_y: Vec<f64>,
    pub bed_b_x: Vec<f64>,
    pub bed_b_y: Vec<f64>,
}

/// Stitch a converged half-cycle trajectory into the full `2 tau` cycle.
///
/// In the first half, physical bed A occupies the adsorption slot and bed B
/// the desorption slot (stored axially reversed); in the second half the
/// roles swap. At cyclic steady state the stitched trajectories are
/// continuous at `tau` and periodic over `2 tau`. Refuses trajectories whose
/// CSS residual exceeds `tol`.
pub fn stitch_full_cycle(
    bed: &BedModel,
    half: &[ProfileSample],
    tau: f64,
    css_residual: f64,
    tol: f64,
) -> Result<Vec<StitchedSample>, SuperError> {
    if !(css_residual <= tol) {
        return Err(SuperError::NotConverged {
            residual: css_residual,
            tol,
        });
    }
    let n_xb = bed.n_x();
    let n_yb = bed.n_y();
    let mut full = Vec::with_capacity(2 * half.len());
    for sample in half {
        full.push(StitchedSample {
            t: sample.t,
            bed_a_x: sample.x[..n_xb].to_vec(),
            bed_a_y: sample.y[..n_yb].to_vec(),
            bed_b_x: flip_bed_x(bed, &sample.x[n_xb..]),
            bed_b_y: flip_bed_y(bed, &sample.y[n_yb..]),
        });
    }
    for sample in half {
        full.push(StitchedSample {
            t: sample.t + tau,
            bed_a_x: flip_bed_x(bed, &sample.x[n_xb..]),
            bed_a_y: flip_bed_y(bed, &sample.y[n_yb..]),
            bed_b_x: sample.x[..n_xb].to_vec(),
            bed_b_y: sample.y[..n_yb].to_vec(),
        });
    }
    Ok(full)
}
