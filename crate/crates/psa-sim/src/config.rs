//! TOML configuration ingestion with explicit unit suffixes.
//!
//! All externally facing keys carry their unit in the name (`length_m`,
//! `pressure_bar`, `velocity_cm_s`); pressures are accepted in bar and
//! velocities in cm/s at the boundary and converted to strict SI on load.
//! Unknown keys are rejected, so a typo cannot silently drop a setting.
//! Adsorbent parameters come either inline or from a referenced parameter
//! file (resolved relative to the configuration file).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::column::{AdsorbentParams, BedGeometry, IsothermBasis, SpeciesAdsorption};
use crate::css::CssMethod;
use crate::dae::{ButcherTableau, DaeError, StepController};
use crate::fv::BedModel;
use crate::superstructure::{FeedSpec, Step, StepSchedule, SuperError, TwoBedSystem};
use crate::thermo::{default_air_species, SpeciesData, ThermoKind, ThermoModel};

pub const BAR: f64 = 1.0e5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] SuperError),
    #[error("unknown integrator tableau: {0}")]
    Tableau(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

// ---------------------------------------------------------------------------
// Raw (on-disk) schema.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    geometry: RawGeometry,
    thermo: RawThermo,
    feed: RawFeed,
    adsorbent: RawAdsorbentRef,
    grid: RawGrid,
    schedule: RawSchedule,
    #[serde(default)]
    valves: RawValves,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    css: RawCss,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    length_m: f64,
    diameter_m: f64,
    porosity: f64,
    particle_diameter_m: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermo {
    /// `ideal` or `cubic`.
    kind: String,
    /// Species drawn from the built-in air library, in simulation order.
    species: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeed {
    temperature_k: f64,
    pressure_bar: f64,
    velocity_cm_s: f64,
    /// `superficial` (total cross-section) or `interstitial` (gas).
    velocity_basis: String,
    /// Mole fractions, ordered like the species list.
    composition: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdsorbentRef {
    /// Path to a parameter file, relative to the configuration file.
    file: Option<String>,
    /// Inline parameters (exclusive with `file`).
    #[serde(flatten)]
    inline: Option<RawAdsorbent>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdsorbent {
    /// `mol_per_kg` or `mol_per_m3`.
    basis: String,
    rho_solid_kg_m3: f64,
    cp_solid_j_kg_k: f64,
    /// LDF geometric factor (15 for spherical particles).
    omega: f64,
    viscosity_pa_s: f64,
    species: Vec<RawAdsorbentSpecies>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdsorbentSpecies {
    name: String,
    /// Saturation-capacity intercept, in `basis` units.
    k1: f64,
    /// Saturation-capacity slope, in `basis` units per K.
    k2_per_k: f64,
    k3_per_pa: f64,
    k4_k: f64,
    k_per_s: f64,
    delta_h_j_mol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_cells: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    steps: Vec<RawStep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    name: String,
    duration_s: f64,
    p_ads_bar: f64,
    p_des_bar: f64,
    alpha: f64,
    beta: f64,
    phi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValves {
    delta_m2_s2: f64,
}

impl Default for RawValves {
    fn default() -> Self {
        Self { delta_m2_s2: 1e-4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    tableau: String,
    rtol: f64,
    atol: f64,
    #[serde(default)]
    controller: Option<RawController>,
}

impl Default for RawIntegrator {
    fn default() -> Self {
        Self {
            tableau: "esdirk3_5".into(),
            rtol: 1e-6,
            atol: 1e-8,
            controller: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    k_p: Option<f64>,
    k_i: Option<f64>,
    k_d: Option<f64>,
    safety: Option<f64>,
    max_newton: Option<usize>,
    newton_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCss {
    /// `picard`, `anderson`, or `newton`.
    method: String,
    tolerance: f64,
    max_iterations: usize,
    #[serde(default = "default_anderson_depth")]
    anderson_depth: usize,
    #[serde(default = "default_newton_warm_start")]
    newton_warm_start: usize,
}

fn default_anderson_depth() -> usize {
    5
}

fn default_newton_warm_start() -> usize {
    5
}

impl Default for RawCss {
    fn default() -> Self {
        Self {
            method: "newton".into(),
            tolerance: 1e-5,
            max_iterations: 200,
            anderson_depth: default_anderson_depth(),
            newton_warm_start: default_newton_warm_start(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: String,
    /// Keep every `stride`-th accepted trajectory sample in profile files.
    stride: usize,
    formats: Vec<String>,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            stride: 1,
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    n_cells: Vec<usize>,
    rtol: Vec<f64>,
    /// `ideal` / `cubic` (the latter also accepted as `real`).
    thermo: Vec<String>,
}

// ---------------------------------------------------------------------------
// Validated configuration.
// ---------------------------------------------------------------------------

/// Feed conditions in SI units.
#[derive(Debug, Clone)]
pub struct FeedConfig {
    pub temperature: f64,
    pub pressure: f64,
    /// Velocity [m/s] on the basis below.
    pub velocity: f64,
    pub superficial: bool,
    pub composition: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub tableau: String,
    pub rtol: f64,
    pub atol: f64,
    controller_overrides: Option<RawController>,
}

#[derive(Debug, Clone)]
pub struct CssConfig {
    pub method: CssMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub stride: usize,
    pub csv: bool,
    pub json: bool,
}

/// One sweep cell.
#[derive(Debug, Clone, Copy)]
pub struct SweepCell {
    pub n_cells: usize,
    pub rtol: f64,
    pub thermo: ThermoKind,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub cells: Vec<SweepCell>,
}

/// Fully validated simulation configuration in SI units.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub geometry: BedGeometry,
    pub thermo_kind: ThermoKind,
    pub species: Vec<SpeciesData>,
    pub adsorbent: AdsorbentParams,
    pub n_cells: usize,
    pub schedule: StepSchedule,
    pub feed: FeedConfig,
    pub valve_delta: f64,
    pub integrator: IntegratorConfig,
    pub css: CssConfig,
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

/// Current configuration schema version.
pub const SCHEMA_VERSION: u32 = 1;

fn read_to_string(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse_thermo_kind(s: &str) -> Result<ThermoKind, ConfigError> {
    match s {
        "ideal" => Ok(ThermoKind::Ideal),
        // Table-3 style naming: the cubic EOS is the "real" gas model.
        "cubic" | "real" => Ok(ThermoKind::Cubic),
        other => invalid(format!("thermo kind `{other}` (expected ideal | cubic)")),
    }
}

impl SimulationConfig {
    /// Load and validate a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_to_string(path)?;
        let raw: RawConfig = parse_toml(path, &text)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_raw(raw, dir)
    }

    fn from_raw(raw: RawConfig, dir: &Path) -> Result<Self, ConfigError> {
        if raw.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                raw.schema_version
            ));
        }

        let geometry = BedGeometry {
            length: raw.geometry.length_m,
            diameter: raw.geometry.diameter_m,
            porosity: raw.geometry.porosity,
            particle_diameter: raw.geometry.particle_diameter_m,
        };
        geometry
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let thermo_kind = parse_thermo_kind(&raw.thermo.kind)?;
        let library = default_air_species();
        let mut species = Vec::with_capacity(raw.thermo.species.len());
        for name in &raw.thermo.species {
            let sp = library
                .iter()
                .find(|s| s.name == *name)
                .ok_or_else(|| {
                    ConfigError::Invalid(format!(
                        "species `{name}` not in the built-in library ({})",
                        library
                            .iter()
                            .map(|s| s.name.as_str())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))
                })?
                .clone();
            species.push(sp);
        }
        if species.is_empty() {
            return invalid("species list is empty");
        }

        // Feed.
        let comp = &raw.feed.composition;
        if comp.len() != species.len() {
            return invalid(format!(
                "feed composition has {} entries for {} species",
                comp.len(),
                species.len()
            ));
        }
        if comp.iter().any(|f| *f < 0.0 || *f > 1.0) {
            return invalid("feed mole fractions must lie in [0, 1]");
        }
        let total: f64 = comp.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return invalid(format!("feed mole fractions sum to {total}, not 1"));
        }
        let superficial = match raw.feed.velocity_basis.as_str() {
            "superficial" => true,
            "interstitial" => false,
            other => {
                return invalid(format!(
                    "velocity_basis `{other}` (expected superficial | interstitial)"
                ))
            }
        };
        let feed = FeedConfig {
            temperature: raw.feed.temperature_k,
            pressure: raw.feed.pressure_bar * BAR,
            velocity: raw.feed.velocity_cm_s / 100.0,
            superficial,
            composition: comp.clone(),
        };
        if feed.temperature <= 0.0 || feed.pressure <= 0.0 || feed.velocity <= 0.0 {
            return invalid("feed temperature, pressure, velocity must be positive");
        }

        // Adsorbent: inline or referenced file.
        let raw_ads = match (&raw.adsorbent.file, &raw.adsorbent.inline) {
            (Some(_), Some(_)) => {
                return invalid("adsorbent: give either `file` or inline parameters, not both")
            }
            (None, None) => return invalid("adsorbent: missing parameters"),
            (Some(file), None) => {
                let path = dir.join(file);
                let text = read_to_string(&path)?;
                parse_toml::<RawAdsorbent>(&path, &text)?
            }
            (None, Some(inline)) => inline.clone(),
        };
        let adsorbent = build_adsorbent(&raw_ads, &species)?;

        // Grid.
        if raw.grid.n_cells == 0 {
            return invalid("grid n_cells must be at least 1");
        }

        // Schedule (durations/fractions validated by StepSchedule).
        let schedule = StepSchedule {
            steps: raw
                .schedule
                .steps
                .iter()
                .map(|s| Step {
                    name: s.name.clone(),
                    duration: s.duration_s,
                    p_ads: s.p_ads_bar * BAR,
                    p_des: s.p_des_bar * BAR,
                    alpha: s.alpha,
                    beta: s.beta,
                    phi: s.phi,
                })
                .collect(),
        };
        schedule.validate()?;

        if !(raw.valves.delta_m2_s2 > 0.0) {
            return invalid("valve delta must be positive");
        }

        // Integrator.
        ButcherTableau::by_name(&raw.integrator.tableau).map_err(|e| match e {
            DaeError::UnknownTableau(name) => ConfigError::Tableau(name),
            other => ConfigError::Invalid(other.to_string()),
        })?;
        if !(raw.integrator.rtol > 0.0) || !(raw.integrator.atol > 0.0) {
            return invalid("integrator tolerances must be positive");
        }
        let integrator = IntegratorConfig {
            tableau: raw.integrator.tableau.clone(),
            rtol: raw.integrator.rtol,
            atol: raw.integrator.atol,
            controller_overrides: raw.integrator.controller.clone(),
        };

        // CSS.
        let method = match raw.css.method.as_str() {
            "picard" => CssMethod::Picard,
            "anderson" => {
                if raw.css.anderson_depth == 0 {
                    return invalid("anderson_depth must be at least 1");
                }
                CssMethod::Anderson {
                    depth: raw.css.anderson_depth,
                }
            }
            "newton" => CssMethod::Newton {
                warm_start: raw.css.newton_warm_start,
            },
            other => {
                return invalid(format!(
                    "css method `{other}` (expected picard | anderson | newton)"
                ))
            }
        };
        if !(raw.css.tolerance > 0.0) || raw.css.max_iterations == 0 {
            return invalid("css tolerance and max_iterations must be positive");
        }
        let css = CssConfig {
            method,
            tolerance: raw.css.tolerance,
            max_iterations: raw.css.max_iterations,
        };

        // Output.
        if raw.output.stride == 0 {
            return invalid("output stride must be at least 1");
        }
        let mut csv = false;
        let mut json = false;
        for f in &raw.output.formats {
            match f.as_str() {
                "csv" => csv = true,
                "json" => json = true,
                other => return invalid(format!("output format `{other}` (expected csv | json)")),
            }
        }
        let output = OutputConfig {
            directory: PathBuf::from(&raw.output.directory),
            stride: raw.output.stride,
            csv,
            json,
        };

        // Sweep.
        let sweep = match &raw.sweep {
            None => None,
            Some(s) => {
                if s.n_cells.is_empty() || s.rtol.is_empty() || s.thermo.is_empty() {
                    return invalid("sweep axes must be non-empty");
                }
                let mut cells = Vec::new();
                for &k in &s.n_cells {
                    if k == 0 {
                        return invalid("sweep n_cells entries must be at least 1");
                    }
                    for &rtol in &s.rtol {
                        if !(rtol > 0.0) {
                            return invalid("sweep rtol entries must be positive");
                        }
                        for kind in &s.thermo {
                            cells.push(SweepCell {
                                n_cells: k,
                                rtol,
                                thermo: parse_thermo_kind(kind)?,
                            });
                        }
                    }
                }
                Some(SweepConfig { cells })
            }
        };

        Ok(Self {
            geometry,
            thermo_kind,
            species,
            adsorbent,
            n_cells: raw.grid.n_cells,
            schedule,
            feed,
            valve_delta: raw.valves.delta_m2_s2,
            integrator,
            css,
            output,
            sweep,
        })
    }

    /// Build the coupled two-bed system at the configured grid and EOS.
    pub fn build_system(&self) -> Result<TwoBedSystem, ConfigError> {
        self.build_system_with(self.thermo_kind, self.n_cells)
    }

    /// Build with overridden EOS kind and grid (sweep cells).
    pub fn build_system_with(
        &self,
        kind: ThermoKind,
        n_cells: usize,
    ) -> Result<TwoBedSystem, ConfigError> {
        let thermo = ThermoModel::new(kind, self.species.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let bed = BedModel::new(self.geometry.clone(), self.adsorbent.clone(), thermo, n_cells)
            .map_err(SuperError::from)?;
        let feed = FeedSpec::from_velocity(
            &bed,
            self.feed.velocity,
            self.feed.superficial,
            self.feed.temperature,
            self.feed.pressure,
            &self.feed.composition,
        )?;
        Ok(TwoBedSystem::new(bed, self.schedule.clone(), feed, self.valve_delta)?)
    }

    /// Step controller at the configured tolerances (optionally overridden).
    pub fn controller(&self) -> StepController {
        self.controller_with(self.integrator.rtol)
    }

    pub fn controller_with(&self, rtol: f64) -> StepController {
        // Scale atol with rtol so sweep cells keep the configured ratio.
        let atol = self.integrator.atol * rtol / self.integrator.rtol;
        let mut c = StepController::with_tolerances(rtol, atol);
        if let Some(o) = &self.integrator.controller_overrides {
            if let Some(v) = o.k_p {
                c.k_p = v;
            }
            if let Some(v) = o.k_i {
                c.k_i = v;
            }
            if let Some(v) = o.k_d {
                c.k_d = v;
            }
            if let Some(v) = o.safety {
                c.safety = v;
            }
            if let Some(v) = o.max_newton {
                c.max_newton = v;
            }
            if let Some(v) = o.newton_tol {
                c.newton_tol = v;
            }
        }
        c
    }

    pub fn tableau(&self) -> ButcherTableau {
        // Validated at load time.
        ButcherTableau::by_name(&self.integrator.tableau).expect("tableau validated on load")
    }
}

fn build_adsorbent(
    raw: &RawAdsorbent,
    species: &[SpeciesData],
) -> Result<AdsorbentParams, ConfigError> {
    let basis = match raw.basis.as_str() {
        "mol_per_kg" => IsothermBasis::MolPerKg,
        "mol_per_m3" => IsothermBasis::MolPerM3,
        other => {
            return invalid(format!(
                "adsorbent basis `{other}` (expected mol_per_kg | mol_per_m3)"
            ))
        }
    };
    // Cross-field consistency: one adsorbent entry per configured species,
    // matched by name, in species order.
    let mut entries = Vec::with_capacity(species.len());
    for sp in species {
        let e = raw
            .species
            .iter()
            .find(|a| a.name == sp.name)
            .ok_or_else(|| {
                ConfigError::Invalid(format!("adsorbent parameters missing species `{}`", sp.name))
            })?;
        entries.push(SpeciesAdsorption {
            k1: e.k1,
            k2: e.k2_per_k,
            k3: e.k3_per_pa,
            k4: e.k4_k,
            k: e.k_per_s,
            delta_h: e.delta_h_j_mol,
        });
    }
    if raw.species.len() != species.len() {
        return invalid(format!(
            "adsorbent file lists {} species, configuration has {}",
            raw.species.len(),
            species.len()
        ));
    }
    let params = AdsorbentParams {
        species: entries,
        basis,
        rho_solid: raw.rho_solid_kg_m3,
        cp_solid: raw.cp_solid_j_kg_k,
        omega: raw.omega,
        viscosity: raw.viscosity_pa_s,
        critical_pressure: species.iter().map(|s| s.critical_pressure).collect(),
    };
    params
        .validate(species.len())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(params)
}
