//! Command-line driver: configuration ingestion, experiment orchestration,
//! and artifact emission.
//!
//! Three commands share one configuration file: `simulate` integrates a
//! single half-cycle from the cold-start (or seeded) state, `css` solves for
//! the cyclic steady state and stitches the full cycle, and `sweep` runs the
//! cross-product of configured grids, tolerances, and EOS kinds. Artifacts
//! (JSON report, per-bed CSV profiles, a reusable state file) land in the
//! output directory; exit codes are 0 on success, 1 on configuration
//! errors, 2 on solver failures.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{SimulationConfig, SweepCell};
use crate::css::{self, CssMethod, CssOptions, CycleMap};
use crate::report::{
    sweep_summary, CssReport, CycleReport, StateFile, Timings, REPORT_SCHEMA_VERSION,
};
use crate::superstructure::{
    flip_bed_x, flip_bed_y, half_cycle_propagate, performance_metrics, stitch_full_cycle,
    FlowTotals, Metrics, ProfileSample, TwoBedSystem,
};
use crate::thermo::ThermoKind;

/// Key (product) species index: the first configured species.
const KEY_SPECIES: usize = 0;

#[derive(Debug, Parser)]
#[command(name = "psa-sim", version, about = "Two-bed PSA cycle simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides config and `PSA_SIM_OUT`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps; 1 forces deterministic serial execution
    /// (overrides `PSA_SIM_THREADS`).
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON state file to start from instead of the cold-start state.
    #[arg(long)]
    pub seed_profile: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one half-cycle from the cold-start (or seeded) state.
    Simulate(CommonArgs),
    /// Solve for the cyclic steady state and stitch the full cycle.
    Css(CommonArgs),
    /// Run the configured grid / tolerance / EOS cross-product.
    Sweep(CommonArgs),
}

/// Exit status: success.
pub const EXIT_OK: i32 = 0;
/// Exit status: configuration error.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status: solver failure.
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug)]
enum RunError {
    Config(String),
    Solver(String),
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

fn solver_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solver(e.to_string())
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate(a) => run_command(a, CommandKind::Simulate),
        Command::Css(a) => run_command(a, CommandKind::Css),
        Command::Sweep(a) => run_command(a, CommandKind::Sweep),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("psa-sim: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Simulate,
    Css,
    Sweep,
}

/// Resolve the output directory: CLI flag, then `PSA_SIM_OUT`, then config.
fn resolve_out_dir(args: &CommonArgs, config: &SimulationConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os("PSA_SIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| config.output.directory.clone())
}

/// Resolve worker threads: CLI flag, then `PSA_SIM_THREADS`, then all cores.
fn resolve_threads(args: &CommonArgs) -> Option<usize> {
    args.threads.or_else(|| {
        std::env::var("PSA_SIM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn run_command(args: &CommonArgs, kind: CommandKind) -> Result<(), RunError> {
    let t_start = Instant::now();
    let config = SimulationConfig::load(&args.config).map_err(config_err)?;
    let out_dir = resolve_out_dir(args, &config);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| config_err(format!("cannot create {}: {e}", out_dir.display())))?;
    let init_s = t_start.elapsed().as_secs_f64();

    match kind {
        CommandKind::Simulate => cmd_simulate(args, &config, &out_dir, t_start, init_s),
        CommandKind::Css => cmd_css(args, &config, &out_dir, t_start, init_s),
        CommandKind::Sweep => cmd_sweep(args, &config, &out_dir, t_start),
    }
}

/// Initial state: seeded from a saved state file, or the cold start.
fn initial_state(
    args: &CommonArgs,
    sys: &TwoBedSystem,
) -> Result<(Vec<f64>, Vec<f64>), RunError> {
    match &args.seed_profile {
        Some(path) => {
            let s = StateFile::read(path).map_err(config_err)?;
            if s.x.len() != sys.n_x() || s.y.len() != sys.n_y() {
                return Err(config_err(format!(
                    "seed profile state sizes ({}, {}) do not match the model ({}, {})",
                    s.x.len(),
                    s.y.len(),
                    sys.n_x(),
                    sys.n_y()
                )));
            }
            Ok((s.x, s.y))
        }
        None => sys.cold_start_state().map_err(config_err),
    }
}

/// Metrics with an explicit zero fallback for empty product streams
/// (degenerate schedules), so trivial runs still produce a report.
fn metrics_or_zero(flows: &FlowTotals, n_species: usize, tau: f64) -> Metrics {
    performance_metrics(flows, n_species, KEY_SPECIES, tau).unwrap_or(Metrics {
        purity: 0.0,
        recovery: 0.0,
        product_mol: 0.0,
        product_rate_m3h: 0.0,
    })
}

fn thermo_name(kind: ThermoKind) -> &'static str {
    match kind {
        ThermoKind::Ideal => "ideal",
        ThermoKind::Cubic => "cubic",
    }
}

/// Write per-bed profile CSVs from half-cycle samples (both beds in slot
/// layout: bed A is the adsorption slot, bed B the desorption slot stored
/// axially reversed — flipped back to physical orientation on output).
fn write_half_cycle_profiles(
    out_dir: &Path,
    sys: &TwoBedSystem,
    profile: &[ProfileSample],
    stride: usize,
) -> Result<(), RunError> {
    let bed = &sys.bed;
    let (n_xb, n_yb) = (bed.n_x(), bed.n_y());
    let bed_a: Vec<(f64, Vec<f64>, Vec<f64>)> = profile
        .iter()
        .map(|s| (s.t, s.x[..n_xb].to_vec(), s.y[..n_yb].to_vec()))
        .collect();
    let bed_b: Vec<(f64, Vec<f64>, Vec<f64>)> = profile
        .iter()
        .map(|s| {
            (
                s.t,
                flip_bed_x(bed, &s.x[n_xb..]),
                flip_bed_y(bed, &s.y[n_yb..]),
            )
        })
        .collect();
    for (name, data) in [("bed_a.csv", &bed_a), ("bed_b.csv", &bed_b)] {
        crate::report::write_profile_csv(
            &out_dir.join(name),
            bed,
            data.iter().map(|(t, x, y)| (*t, x.as_slice(), y.as_slice())),
            stride,
        )
        .map_err(solver_err)?;
    }
    Ok(())
}

fn cmd_simulate(
    args: &CommonArgs,
    config: &SimulationConfig,
    out_dir: &Path,
    t_start: Instant,
    init_s: f64,
) -> Result<(), RunError> {
    let sys = config.build_system().map_err(config_err)?;
    let tableau = config.tableau();
    let controller = config.controller();
    let (x0, y0) = initial_state(args, &sys)?;

    let t_solve = Instant::now();
    let mut profile = Vec::new();
    let result = half_cycle_propagate(&sys, &x0, &y0, &tableau, &controller, Some(&mut profile))
        .map_err(solver_err)?;
    let solve_s = t_solve.elapsed().as_secs_f64();

    let t_out = Instant::now();
    let metrics = metrics_or_zero(&result.flows, sys.bed.n_species(), sys.schedule.tau());
    write_half_cycle_profiles(out_dir, &sys, &profile, config.output.stride)?;
    StateFile::new(result.x.clone(), result.y.clone())
        .write(&out_dir.join("state.json"))
        .map_err(solver_err)?;
    let output_s = t_out.elapsed().as_secs_f64();

    let report = CycleReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "simulate".into(),
        n_cells: config.n_cells,
        thermo: thermo_name(config.thermo_kind).into(),
        tableau: tableau.name.into(),
        rtol: config.integrator.rtol,
        purity_pct: 100.0 * metrics.purity,
        recovery_pct: 100.0 * metrics.recovery,
        product_rate_m3h: metrics.product_rate_m3h,
        product_mol: metrics.product_mol,
        css: None,
        half_cycle_stats: vec![result.stats],
        timings: Timings {
            init_s,
            solve_s,
            output_s,
            total_s: t_start.elapsed().as_secs_f64(),
        },
    };
    emit_report(&report, &out_dir.join("report.json"))
}

fn emit_report(report: &CycleReport, path: &Path) -> Result<(), RunError> {
    report.write_json(path).map_err(solver_err)?;
    print!("{}", report.console_summary());
    Ok(())
}

/// One CSS solve at the given grid / EOS / tolerance; shared by `css` and
/// the sweep cells.
fn solve_css_cell(
    config: &SimulationConfig,
    kind: ThermoKind,
    n_cells: usize,
    rtol: f64,
    x_seed: Option<&[f64]>,
) -> Result<CssCell, RunError> {
    let sys = config.build_system_with(kind, n_cells).map_err(config_err)?;
    let tableau = config.tableau();
    let controller = config.controller_with(rtol);
    let (x0, y0) = match x_seed {
        Some(x) => {
            if x.len() != sys.n_x() {
                return Err(config_err(format!(
                    "seed profile size {} does not match the model ({})",
                    x.len(),
                    sys.n_x()
                )));
            }
            let (_, y0) = sys.cold_start_state().map_err(config_err)?;
            (x.to_vec(), y0)
        }
        None => sys.cold_start_state().map_err(config_err)?,
    };

    let map = CycleMap::new(&sys, &tableau, controller.clone(), y0.clone());
    let opts = CssOptions {
        css_tol: config.css.tolerance,
        max_iter: config.css.max_iterations,
        atol: controller.atol,
        rtol: controller.rtol,
    };
    let result = css::solve(&map, &x0, config.css.method, &opts).map_err(solver_err)?;

    // Re-propagate at the solution to record the trajectory and the stream
    // totals the metrics are built from.
    let mut profile = Vec::new();
    let run = half_cycle_propagate(
        &sys,
        &result.x_css,
        &y0,
        &tableau,
        &controller,
        Some(&mut profile),
    )
    .map_err(solver_err)?;
    let flows = run.flows;
    let stats = run.stats;
    drop(map);
    Ok(CssCell {
        sys,
        result,
        flows,
        profile,
        stats,
    })
}

/// Outcome of one CSS solve plus one recording re-propagation.
struct CssCell {
    sys: TwoBedSystem,
    result: crate::css::CssResult,
    flows: FlowTotals,
    profile: Vec<ProfileSample>,
    stats: crate::dae::Statistics,
}

fn css_report(
    config: &SimulationConfig,
    kind: ThermoKind,
    n_cells: usize,
    rtol: f64,
    command: &str,
    result: &crate::css::CssResult,
    flows: &FlowTotals,
    sys: &TwoBedSystem,
    stats: Vec<crate::dae::Statistics>,
    timings: Timings,
) -> CycleReport {
    let metrics = metrics_or_zero(flows, sys.bed.n_species(), sys.schedule.tau());
    CycleReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: command.into(),
        n_cells,
        thermo: thermo_name(kind).into(),
        tableau: config.integrator.tableau.clone(),
        rtol,
        purity_pct: 100.0 * metrics.purity,
        recovery_pct: 100.0 * metrics.recovery,
        product_rate_m3h: metrics.product_rate_m3h,
        product_mol: metrics.product_mol,
        css: Some(CssReport {
            method: match config.css.method {
                CssMethod::Picard => "picard".into(),
                CssMethod::Anderson { .. } => "anderson".into(),
                CssMethod::Newton { .. } => "newton".into(),
            },
            tolerance: config.css.tolerance,
            iterations: result.iterations,
            warm_start_iterations: result.warm_start_iterations,
            converged: result.converged,
            residual_history: result.residual_history.clone(),
            dominant_eigenvalue: None,
        }),
        half_cycle_stats: stats,
        timings,
    }
}

fn cmd_css(
    args: &CommonArgs,
    config: &SimulationConfig,
    out_dir: &Path,
    t_start: Instant,
    init_s: f64,
) -> Result<(), RunError> {
    let seed = match &args.seed_profile {
        Some(path) => Some(StateFile::read(path).map_err(config_err)?),
        None => None,
    };
    let t_solve = Instant::now();
    let CssCell {
        sys,
        result,
        flows,
        profile,
        stats,
    } = solve_css_cell(
        config,
        config.thermo_kind,
        config.n_cells,
        config.integrator.rtol,
        seed.as_ref().map(|s| s.x.as_slice()),
    )?;
    let solve_s = t_solve.elapsed().as_secs_f64();

    let t_out = Instant::now();
    let residual = result.residual_history.last().copied().unwrap_or(f64::NAN);
    let mut output_s = t_out.elapsed().as_secs_f64();
    let stats = vec![stats];

    if !result.converged {
        // Partial artifacts plus a failure report, then a solver exit code.
        let report = css_report(
            config,
            config.thermo_kind,
            config.n_cells,
            config.integrator.rtol,
            "css",
            &result,
            &flows,
            &sys,
            stats,
            Timings {
                init_s,
                solve_s,
                output_s,
                total_s: t_start.elapsed().as_secs_f64(),
            },
        );
        emit_report(&report, &out_dir.join("report.json"))?;
        return Err(solver_err(format!(
            "CSS not converged after {} iterations (residual {residual:.3e} > {:.3e})",
            result.iterations, config.css.tolerance
        )));
    }

    // Stitch the converged half-cycle into the full 2-tau cycle and emit
    // physical-orientation per-bed profiles.
    let tau = sys.schedule.tau();
    let stitched = stitch_full_cycle(&sys.bed, &profile, tau, residual, config.css.tolerance)
        .map_err(solver_err)?;
    let bed = &sys.bed;
    for (name, pick) in [
        ("bed_a.csv", 0usize),
        ("bed_b.csv", 1usize),
    ] {
        crate::report::write_profile_csv(
            &out_dir.join(name),
            bed,
            stitched.iter().map(|s| {
                if pick == 0 {
                    (s.t, s.bed_a_x.as_slice(), s.bed_a_y.as_slice())
                } else {
                    (s.t, s.bed_b_x.as_slice(), s.bed_b_y.as_slice())
                }
            }),
            config.output.stride,
        )
        .map_err(solver_err)?;
    }
    StateFile::new(result.x_css.clone(), profile[0].y.clone())
        .write(&out_dir.join("state.json"))
        .map_err(solver_err)?;
    output_s = t_out.elapsed().as_secs_f64();

    let report = css_report(
        config,
        config.thermo_kind,
        config.n_cells,
        config.integrator.rtol,
        "css",
        &result,
        &flows,
        &sys,
        stats,
        Timings {
            init_s,
            solve_s,
            output_s,
            total_s: t_start.elapsed().as_secs_f64(),
        },
    );
    emit_report(&report, &out_dir.join("report.json"))
}

fn cmd_sweep(
    args: &CommonArgs,
    config: &SimulationConfig,
    out_dir: &Path,
    t_start: Instant,
) -> Result<(), RunError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| config_err("sweep command requires a [sweep] section"))?;
    let threads = resolve_threads(args);

    let run_cell = |cell: &SweepCell| -> Result<CycleReport, RunError> {
        let t_cell = Instant::now();
        let c = solve_css_cell(config, cell.thermo, cell.n_cells, cell.rtol, None)?;
        let elapsed = t_cell.elapsed().as_secs_f64();
        let report = css_report(
            config,
            cell.thermo,
            cell.n_cells,
            cell.rtol,
            "sweep",
            &c.result,
            &c.flows,
            &c.sys,
            vec![c.stats],
            Timings {
                init_s: 0.0,
                solve_s: elapsed,
                output_s: 0.0,
                total_s: elapsed,
            },
        );
        // Atomic per-cell artifact: write to a temp name, then rename.
        let name = format!(
            "cell_K{}_{}_rtol{:.0e}.json",
            cell.n_cells,
            thermo_name(cell.thermo),
            cell.rtol
        );
        let tmp = out_dir.join(format!("{name}.tmp"));
        report.write_json(&tmp).map_err(solver_err)?;
        std::fs::rename(&tmp, out_dir.join(&name)).map_err(solver_err)?;
        Ok(report)
    };

    let rows: Result<Vec<CycleReport>, RunError> = match threads {
        Some(1) => sweep.cells.iter().map(run_cell).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(solver_err)?
            .install(|| sweep.cells.par_iter().map(run_cell).collect()),
        None => sweep.cells.par_iter().map(run_cell).collect(),
    };
    let rows = rows?;

    let summary = sweep_summary(&rows);
    print!("{summary}");
    let mut all = serde_json::Map::new();
    all.insert(
        "schema_version".into(),
        serde_json::json!(REPORT_SCHEMA_VERSION),
    );
    all.insert("rows".into(), serde_json::to_value(&rows).map_err(solver_err)?);
    std::fs::write(
        out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(all)).map_err(solver_err)?,
    )
    .map_err(solver_err)?;
    log::info!("sweep finished in {:.1} s", t_start.elapsed().as_secs_f64());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = include_str!("../../../configs/reference.toml");
    const ADSORBENT: &str = include_str!("../../../configs/adsorbent_cms.toml");

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        std::fs::write(dir.join("config.toml"), body).unwrap();
        std::fs::write(dir.join("adsorbent_cms.toml"), ADSORBENT).unwrap();
        dir.join("config.toml")
    }

    /// Reference config shrunk for test runtimes: coarse grid, loose
    /// tolerances, ideal EOS.
    fn coarse_config() -> String {
        REFERENCE
            .replace("n_cells = 10", "n_cells = 3")
            .replace("kind = \"cubic\"", "kind = \"ideal\"")
            .replace("rtol = 1.0e-6", "rtol = 1.0e-4")
            .replace("atol = 1.0e-8", "atol = 1.0e-6")
            .replace("tolerance = 1.0e-5", "tolerance = 1.0e-3")
    }

    fn args(config: PathBuf, out: PathBuf) -> CommonArgs {
        CommonArgs {
            config,
            out: Some(out),
            threads: Some(1),
            seed_profile: None,
        }
    }

    #[test]
    fn simulate_emits_report_profiles_and_state() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), &coarse_config());
        let out = dir.path().join("out");
        let a = args(config, out.clone());
        run_command(&a, CommandKind::Simulate).unwrap();
        let report =
            CycleReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report.command, "simulate");
        assert!(report.purity_pct > 50.0, "purity {}", report.purity_pct);
        assert!(out.join("bed_a.csv").exists());
        assert!(out.join("bed_b.csv").exists());
        let state = StateFile::read(&out.join("state.json")).unwrap();
        assert_eq!(state.x.len(), 2 * 3 * 7);

        // Determinism: a rerun is bit-identical.
        let out2 = dir.path().join("out2");
        let a2 = args(a.config.clone(), out2.clone());
        run_command(&a2, CommandKind::Simulate).unwrap();
        let r1: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        let mut r2: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out2.join("report.json")).unwrap())
                .unwrap();
        // Wall times legitimately differ between reruns.
        r2["timings"] = r1["timings"].clone();
        assert_eq!(r1, r2);
        assert_eq!(
            std::fs::read(out.join("bed_a.csv")).unwrap(),
            std::fs::read(out2.join("bed_a.csv")).unwrap()
        );
    }

    #[test]
    fn simulate_seeded_with_own_state_round_trips_zero_duration() {
        let dir = tempfile::tempdir().unwrap();
        // All-zero durations: identity propagation, trivial report.
        let body = coarse_config()
            .replace("duration_s = 20.0", "duration_s = 0.0")
            .replace("duration_s = 45.0", "duration_s = 0.0")
            .replace("duration_s = 5.0", "duration_s = 0.0");
        let config = write_config(dir.path(), &body);
        let out = dir.path().join("out");
        let a = args(config, out.clone());
        run_command(&a, CommandKind::Simulate).unwrap();
        let s1 = StateFile::read(&out.join("state.json")).unwrap();

        let out2 = dir.path().join("out2");
        let a2 = CommonArgs {
            seed_profile: Some(out.join("state.json")),
            ..args(a.config.clone(), out2.clone())
        };
        run_command(&a2, CommandKind::Simulate).unwrap();
        let s2 = StateFile::read(&out2.join("state.json")).unwrap();
        assert_eq!(s1.x, s2.x, "zero-duration schedule must round-trip the state");
        let report =
            CycleReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report.product_mol, 0.0);
        assert_eq!(report.purity_pct, 0.0);
    }

    #[test]
    fn invalid_config_maps_to_config_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let body = coarse_config().replace("porosity = 0.4", "porosity = 1.4");
        let config = write_config(dir.path(), &body);
        let a = args(config, dir.path().join("out"));
        let e = run_command(&a, CommandKind::Simulate).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn sweep_produces_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        // 2 grids x 1 rtol x 2 EOS kinds with a tiny iteration budget: the
        // cross-product structure is the point, not convergence.
        let body = coarse_config()
            .replace("n_cells = [10, 20]", "n_cells = [2, 3]")
            .replace("rtol = [1.0e-6]", "rtol = [1.0e-4]")
            .replace("max_iterations = 200", "max_iterations = 2")
            .replace("method = \"newton\"", "method = \"picard\"");
        let config = write_config(dir.path(), &body);
        let out = dir.path().join("out");
        let a = args(config, out.clone());
        // Unconverged cells are still reported (sweep is a survey, not a
        // gate), so this must succeed structurally.
        run_command(&a, CommandKind::Sweep).unwrap();
        let text = std::fs::read_to_string(out.join("sweep.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 4, "2 grids x 1 rtol x 2 thermo kinds");
        for k in [2, 3] {
            for kind in ["ideal", "cubic"] {
                assert!(out
                    .join(format!("cell_K{k}_{kind}_rtol1e-4.json"))
                    .exists());
            }
        }
    }
}
