//! Subcommand implementations. Each writes its artifacts under `out` and
//! returns the in-memory result for callers that want to inspect it.

use std::fs;
use std::path::{Path, PathBuf};

use ortholoc_core::dataset::{load_flight, load_map, save_flight, save_map};
use ortholoc_core::report::{RunReport, RunSummary};
use ortholoc_core::run_flight;

use crate::config::Config;
use crate::error::CliError;
use crate::rank::{compare, rank, write_rank_csv, Comparison, RankRow};
use crate::scenario::{build_flight, build_world, shape_of};
use crate::svg::{line_chart, Series};
use crate::sweep::{read_csv, run_grid, write_csv, CellResult, Progress, SweepResult};

pub const MAP_FILE: &str = "map.png";
pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const RANK_FILE: &str = "rank.csv";
pub const COMPARE_FILE: &str = "compare.txt";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";
pub const ROBUSTNESS_RUNS_FILE: &str = "robustness_runs.csv";
pub const ROBUSTNESS_SVG: &str = "robustness.svg";
pub const REPORT_SVG: &str = "report.svg";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Inputs that fail to load are configuration problems (exit code 2).
fn input<T>(r: ortholoc_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

/// Generates a world with `cfg.terrain` and `cfg.seed`; writes the map and
/// its sidecar.
pub fn cmd_gen_world(cfg: &Config, out: &Path) -> Result<PathBuf, CliError> {
    ensure_dir(out)?;
    let map = build_world(cfg, cfg.terrain, cfg.seed)?;
    let path = out.join(MAP_FILE);
    save_map(&map, &path)?;
    Ok(path)
}

/// Flies `cfg.shape` over the configured map and stores the flight directory.
pub fn cmd_gen_flight(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let map_path = cfg.map_path()?;
    let map = input(load_map(&map_path))?;
    let mut flight = build_flight(
        cfg,
        &map,
        shape_of(cfg.shape, cfg),
        cfg.altitude_m,
        cfg.seed,
    )?;
    let abs = fs::canonicalize(&map_path).unwrap_or(map_path);
    flight.map_ref = Some(abs.to_string_lossy().into_owned());
    ensure_dir(out)?;
    save_flight(&flight, out)?;
    Ok(())
}

/// One filter run over a stored flight; writes the per-frame report and the
/// summary.
pub fn cmd_run(cfg: &Config, out: &Path) -> Result<RunReport, CliError> {
    let map = input(load_map(&cfg.map_path()?))?;
    let flight = input(load_flight(&cfg.flight_path()?))?;
    let filter = cfg.filter()?;
    let report = run_flight(&flight, &map, &filter, cfg.seed)?;
    ensure_dir(out)?;
    report.write_csv(&out.join(REPORT_FILE))?;
    report.summary().write(&out.join(SUMMARY_FILE))?;
    Ok(report)
}

/// Scenario × conversion grid, `cfg.repetitions` runs per cell.
pub fn cmd_sweep(
    cfg: &Config,
    out: &Path,
    progress: Progress<'_>,
) -> Result<SweepResult, CliError> {
    let result = run_grid(cfg, &cfg.grid_specs()?, &[0.0], progress)?;
    ensure_dir(out)?;
    write_csv(&result.cells, &out.join(SWEEP_FILE))?;
    write_csv(&result.runs, &out.join(RUNS_FILE))?;
    Ok(result)
}

/// Ranks the level-0 cells of a sweep table.
pub fn cmd_rank(sweep_csv: &Path, out: &Path) -> Result<Vec<RankRow>, CliError> {
    let cells: Vec<CellResult> = read_csv(sweep_csv)?;
    let rows = rank(&cells)?;
    ensure_dir(out)?;
    write_rank_csv(&rows, &out.join(RANK_FILE))?;
    Ok(rows)
}

/// Compares two run summaries; `a` is the reference.
pub fn cmd_compare(a: &Path, b: &Path, out: &Path) -> Result<Comparison, CliError> {
    let sa = input(RunSummary::read(a))?;
    let sb = input(RunSummary::read(b))?;
    let c = compare(
        sa.mean_error_m,
        sa.mean_evaluations,
        sb.mean_error_m,
        sb.mean_evaluations,
    );
    ensure_dir(out)?;
    write_text(&out.join(COMPARE_FILE), &c.to_text())?;
    Ok(c)
}

/// Configured age levels, ascending, always starting at 0.
pub fn robustness_levels(cfg: &Config) -> Vec<f64> {
    let mut levels = cfg.age_levels.clone();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Matches frames from the original map against maps aged to each level.
pub fn cmd_robustness(
    cfg: &Config,
    out: &Path,
    progress: Progress<'_>,
) -> Result<SweepResult, CliError> {
    let result = run_grid(cfg, &cfg.grid_specs()?, &robustness_levels(cfg), progress)?;
    ensure_dir(out)?;
    write_csv(&result.cells, &out.join(ROBUSTNESS_FILE))?;
    write_csv(&result.runs, &out.join(ROBUSTNESS_RUNS_FILE))?;
    write_text(&out.join(ROBUSTNESS_SVG), &robustness_chart(&result.cells))?;
    Ok(result)
}

fn robustness_chart(cells: &[CellResult]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for c in cells {
        let label = format!("{} {}", c.scenario, c.conversion);
        let point = (c.level, c.mean_error_m.unwrap_or(f64::NAN));
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    line_chart(
        "Accuracy against map age",
        "age level",
        "mean error [m]",
        &series,
    )
}

/// Renders a chart for a run report (`report.csv`) or a robustness table.
pub fn cmd_report(input_path: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let text = fs::read_to_string(input_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", input_path.display())))?;
    ensure_dir(out)?;
    if text.starts_with("# seed=") {
        let report = input(RunReport::read_csv(input_path))?;
        let series = vec![
            Series {
                label: "filter".into(),
                points: report.rows.iter().map(|r| (r.t_sec, r.error_m)).collect(),
            },
            Series {
                label: "dead reckoning".into(),
                points: report
                    .rows
                    .iter()
                    .map(|r| (r.t_sec, r.dr_error_m))
                    .collect(),
            },
        ];
        let title = format!(
            "Localization error, {} (seed {})",
            report.conversion, report.seed
        );
        let path = out.join(REPORT_SVG);
        write_text(&path, &line_chart(&title, "time [s]", "error [m]", &series))?;
        report.summary().write(&out.join(SUMMARY_FILE))?;
        Ok(path)
    } else if text.starts_with("scenario,conversion,level,") {
        let cells: Vec<CellResult> = read_csv(input_path)?;
        let path = out.join(ROBUSTNESS_SVG);
        write_text(&path, &robustness_chart(&cells))?;
        Ok(path)
    } else {
        Err(CliError::Config(format!(
            "{} is neither a run report nor a robustness table",
            input_path.display()
        )))
    }
}
