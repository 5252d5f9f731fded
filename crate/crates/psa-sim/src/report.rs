//! Versioned run reports, console summaries, and profile emission.
//!
//! Reports are emitted as JSON with stable key names and a schema version so
//! downstream tooling can rely on the layout. Trajectory profiles are
//! emitted as CSV with a self-describing header (every column carries its
//! unit) and rows ordered by `(t, z)`. A saved state file (`x`, `y` vectors)
//! can seed a later run in place of the cold-start state.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dae::Statistics;
use crate::fv::BedModel;

/// Current report/state-file schema version.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("report serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("invalid report: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Wall-time accounting per run phase [s].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Configuration loading and model construction.
    pub init_s: f64,
    /// Time integration / CSS solve.
    pub solve_s: f64,
    /// Profile and report emission.
    pub output_s: f64,
    /// Whole command, from entry to exit.
    pub total_s: f64,
}

impl Timings {
    /// Accounting sanity: the total covers the phases (1% slack).
    pub fn validate(&self) -> Result<(), ReportError> {
        let sum = self.init_s + self.solve_s + self.output_s;
        if self.total_s < sum * 0.99 {
            return Err(ReportError::Invalid(format!(
                "total wall time {:.3} s below phase sum {:.3} s",
                self.total_s, sum
            )));
        }
        Ok(())
    }
}

/// CSS-solver outcome, present for the `css` and `sweep` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CssReport {
    /// Solver name: `picard`, `anderson`, or `newton`.
    pub method: String,
    /// Convergence tolerance on the weighted cycle-map residual.
    pub tolerance: f64,
    /// Outer iterations of the configured method.
    pub iterations: usize,
    /// Warm-start Picard iterations preceding Newton (0 otherwise).
    pub warm_start_iterations: usize,
    pub converged: bool,
    /// Weighted residual norm after each cycle-map application.
    pub residual_history: Vec<f64>,
    /// Dominant cycle-map eigenvalue magnitude, when estimated.
    pub dominant_eigenvalue: Option<f64>,
}

/// Machine-readable result of one run (or one sweep cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub schema_version: u32,
    /// Command that produced the report: `simulate`, `css`, or `sweep`.
    pub command: String,
    /// Spatial cells per bed.
    pub n_cells: usize,
    /// EOS kind: `ideal` or `cubic`.
    pub thermo: String,
    pub tableau: String,
    pub rtol: f64,
    /// Product purity in the key species [%].
    pub purity_pct: f64,
    /// Key-species recovery, product over feed [%].
    pub recovery_pct: f64,
    /// Product volumetric flow at ambient conditions [m^3/h].
    pub product_rate_m3h: f64,
    /// Product withdrawn per half-cycle [mol].
    pub product_mol: f64,
    pub css: Option<CssReport>,
    /// Integrator statistics, one entry per propagated half-cycle.
    pub half_cycle_stats: Vec<Statistics>,
    pub timings: Timings,
}

impl CycleReport {
    pub fn validate(&self) -> Result<(), ReportError> {
        for (name, v) in [
            ("purity", self.purity_pct),
            ("recovery", self.recovery_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(ReportError::Invalid(format!(
                    "{name} {v:.3}% outside [0, 100]"
                )));
            }
        }
        self.timings.validate()
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: Self = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(ReportError::Invalid(format!(
                "report schema_version {} unsupported (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ReportError> {
        self.validate()?;
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    /// Human-readable console block for a single run.
    pub fn console_summary(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "run: {} (K={}, EOS={}, {} @ rtol={:.0e})",
            self.command, self.n_cells, self.thermo, self.tableau, self.rtol);
        let _ = writeln!(s, "  purity      {:7.2} %", self.purity_pct);
        let _ = writeln!(s, "  recovery    {:7.2} %", self.recovery_pct);
        let _ = writeln!(s, "  product     {:7.1} m^3/h at ambient", self.product_rate_m3h);
        if let Some(css) = &self.css {
            let residual = css.residual_history.last().copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                s,
                "  css         {}: {} iterations ({} warm-start), residual {:.3e}, {}",
                css.method,
                css.iterations,
                css.warm_start_iterations,
                residual,
                if css.converged { "converged" } else { "NOT converged" }
            );
            if let Some(lam) = css.dominant_eigenvalue {
                let _ = writeln!(s, "  cycle map   dominant |eigenvalue| {lam:.4}");
            }
        }
        let steps: usize = self.half_cycle_stats.iter().map(|st| st.accepted_steps).sum();
        let rejected: usize = self.half_cycle_stats.iter().map(|st| st.rejected_steps).sum();
        let facts: usize = self.half_cycle_stats.iter().map(|st| st.factorizations).sum();
        let _ = writeln!(
            s,
            "  integrator  {steps} accepted / {rejected} rejected steps, {facts} factorizations \
             over {} half-cycles",
            self.half_cycle_stats.len()
        );
        let _ = writeln!(
            s,
            "  wall time   {:.2} s (init {:.2}, solve {:.2}, output {:.2})",
            self.timings.total_s, self.timings.init_s, self.timings.solve_s, self.timings.output_s
        );
        s
    }
}

/// Sweep summary shaped like a performance table: one purity/recovery pair
/// per (EOS, K) cell, grids as columns.
pub fn sweep_summary(rows: &[CycleReport]) -> String {
    use std::fmt::Write;
    let mut grids: Vec<usize> = rows.iter().map(|r| r.n_cells).collect();
    grids.sort_unstable();
    grids.dedup();
    let mut kinds: Vec<&str> = rows.iter().map(|r| r.thermo.as_str()).collect();
    kinds.sort_unstable();
    kinds.dedup();
    let mut tols: Vec<f64> = rows.iter().map(|r| r.rtol).collect();
    tols.sort_by(f64::total_cmp);
    tols.dedup();

    let mut s = String::new();
    let _ = write!(s, "{:<14}{:<8}{:<10}", "Statistic", "EOS", "rtol");
    for k in &grids {
        let _ = write!(s, "K={k:<8}");
    }
    let _ = writeln!(s);
    for (label, field) in [
        ("Purity [%]", true),
        ("Recov. [%]", false),
    ] {
        for kind in &kinds {
            for &tol in &tols {
                let _ = write!(s, "{label:<14}{kind:<8}{tol:<10.0e}");
                for &k in &grids {
                    match rows
                        .iter()
                        .find(|r| r.n_cells == k && r.thermo == *kind && r.rtol == tol)
                    {
                        Some(r) => {
                            let v = if field { r.purity_pct } else { r.recovery_pct };
                            let _ = write!(s, "{v:<10.2}");
                        }
                        None => {
                            let _ = write!(s, "{:<10}", "-");
                        }
                    }
                }
                let _ = writeln!(s);
            }
        }
    }
    s
}

/// Saved simulation state, usable as a seed profile for later runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: u32,
    /// Differential state (both beds).
    pub x: Vec<f64>,
    /// Algebraic state (both beds).
    pub y: Vec<f64>,
}

impl StateFile {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            x,
            y,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let state: Self = serde_json::from_str(&text)?;
        if state.schema_version != REPORT_SCHEMA_VERSION {
            return Err(ReportError::Invalid(format!(
                "state schema_version {} unsupported (expected {REPORT_SCHEMA_VERSION})",
                state.schema_version
            )));
        }
        Ok(state)
    }
}

/// CSV header for a single-bed profile table.
pub fn profile_header(bed: &BedModel) -> String {
    let mut cols = vec!["t [s]".to_string(), "z [m]".to_string()];
    let names: Vec<&str> = bed.thermo.species.iter().map(|s| s.name.as_str()).collect();
    for n in &names {
        cols.push(format!("c_{n} [mol/m3]"));
    }
    for n in &names {
        cols.push(format!("q_{n} [mol/m3]"));
    }
    cols.push("T [K]".to_string());
    cols.push("P [Pa]".to_string());
    for n in &names {
        cols.push(format!("y_{n} [-]"));
    }
    cols.join(",")
}

/// Append profile rows for one sampled time of one bed: `x`/`y` are that
/// bed's state blocks; rows are ordered by cell (z ascending).
pub fn profile_rows(bed: &BedModel, t: f64, x: &[f64], y: &[f64], out: &mut String) {
    use std::fmt::Write;
    let ns = bed.n_species();
    let dz = bed.dz();
    for k in 0..bed.n_cells {
        let z = (k as f64 + 0.5) * dz;
        let _ = write!(out, "{t:.9},{z:.9}");
        let ctot: f64 = (0..ns).map(|a| x[bed.idx_c(k, a)]).sum();
        for a in 0..ns {
            let _ = write!(out, ",{:.9e}", x[bed.idx_c(k, a)]);
        }
        for a in 0..ns {
            let _ = write!(out, ",{:.9e}", x[bed.idx_q(k, a)]);
        }
        let _ = write!(out, ",{:.9e},{:.9e}", y[bed.idx_t(k)], y[bed.idx_p(k)]);
        for a in 0..ns {
            let _ = write!(out, ",{:.9e}", x[bed.idx_c(k, a)] / ctot);
        }
        let _ = writeln!(out);
    }
}

/// Write a per-bed profile CSV from `(t, x_bed, y_bed)` samples, keeping
/// every `stride`-th sample.
pub fn write_profile_csv<'a>(
    path: &Path,
    bed: &BedModel,
    samples: impl Iterator<Item = (f64, &'a [f64], &'a [f64])>,
    stride: usize,
) -> Result<(), ReportError> {
    let mut text = profile_header(bed);
    text.push('\n');
    for (i, (t, x, y)) in samples.enumerate() {
        if i % stride != 0 {
            continue;
        }
        profile_rows(bed, t, x, y, &mut text);
    }
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::BedGeometry;
    use crate::thermo::{default_air_species, ThermoKind, ThermoModel};

    fn report() -> CycleReport {
        CycleReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "css".into(),
            n_cells: 10,
            thermo: "cubic".into(),
            tableau: "esdirk3_5".into(),
            rtol: 1e-6,
            purity_pct: 95.8,
            recovery_pct: 45.9,
            product_rate_m3h: 447.0,
            product_mol: 1234.5,
            css: Some(CssReport {
                method: "newton".into(),
                tolerance: 1e-5,
                iterations: 3,
                warm_start_iterations: 5,
                converged: true,
                residual_history: vec![1e-2, 1e-4, 1e-7],
                dominant_eigenvalue: Some(0.83),
            }),
            half_cycle_stats: vec![Statistics {
                accepted_steps: 120,
                rejected_steps: 4,
                newton_failures: 0,
                newton_iterations: 300,
                factorizations: 40,
                f_evaluations: 700,
                jacobian_evaluations: 40,
            }],
            timings: Timings {
                init_s: 0.1,
                solve_s: 2.0,
                output_s: 0.05,
                total_s: 2.2,
            },
        }
    }

    fn test_bed() -> BedModel {
        let thermo = ThermoModel::new(ThermoKind::Ideal, default_air_species()).unwrap();
        BedModel::new(
            BedGeometry {
                length: 2.0,
                diameter: 1.0,
                porosity: 0.4,
                particle_diameter: 2e-3,
            },
            crate::column::test_params(),
            thermo,
            10,
        )
        .unwrap()
    }

    #[test]
    fn report_round_trips_through_json() {
        let r = report();
        let parsed = CycleReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn validation_rejects_out_of_range_and_bad_accounting() {
        let mut r = report();
        r.purity_pct = 104.0;
        assert!(r.validate().is_err());
        let mut r = report();
        r.timings.total_s = 1.0;
        assert!(r.validate().is_err());
        assert!(report().validate().is_ok());
    }

    #[test]
    fn summaries_contain_key_figures() {
        let s = report().console_summary();
        assert!(s.contains("95.80"), "{s}");
        assert!(s.contains("45.90"), "{s}");
        assert!(s.contains("newton"), "{s}");

        let mut rows = vec![report()];
        let mut b = report();
        b.n_cells = 20;
        b.thermo = "ideal".into();
        b.purity_pct = 95.4;
        rows.push(b);
        let table = sweep_summary(&rows);
        assert!(table.contains("K=10"), "{table}");
        assert!(table.contains("K=20"), "{table}");
        assert!(table.contains("Purity [%]"), "{table}");
        assert!(table.contains("Recov. [%]"), "{table}");
    }

    #[test]
    fn profile_rows_are_ordered_and_normalized() {
        let bed = test_bed();
        let (x, y) = bed
            .uniform_state(300.0, 2e5, &[0.78, 0.21, 0.01], None)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bed_a.csv");
        let samples = [(0.0, &x[..], &y[..]), (1.0, &x[..], &y[..])];
        write_profile_csv(&path, &bed, samples.iter().map(|(t, x, y)| (*t, *x, *y)), 1)
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t [s],z [m],c_N2 [mol/m3]"), "{header}");
        assert!(header.contains("y_Ar [-]"), "{header}");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2 * bed.n_cells);
        let mut prev = (-1.0, -1.0);
        for row in &rows {
            let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f.len(), 2 + 3 + 3 + 2 + 3);
            assert!((f[0], f[1]) > prev, "rows not ordered by (t, z)");
            prev = (f[0], f[1]);
            let ysum: f64 = f[10..13].iter().sum();
            assert!((ysum - 1.0).abs() < 1e-9);
            assert!(f[10..13].iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // Stride 2 keeps every other sampled time.
        let path2 = dir.path().join("strided.csv");
        write_profile_csv(&path2, &bed, samples.iter().map(|(t, x, y)| (*t, *x, *y)), 2)
            .unwrap();
        let n = std::fs::read_to_string(&path2).unwrap().lines().count();
        assert_eq!(n, 1 + bed.n_cells);
    }

    #[test]
    fn state_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let s = StateFile::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0]);
        s.write(&path).unwrap();
        assert_eq!(StateFile::read(&path).unwrap(), s);
    }
}
