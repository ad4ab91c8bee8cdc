//! Repeated seeded runs over scenario × conversion grids, optionally against
//! aged maps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ortholoc_core::{run_flight, ConversionSpec, RasterMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::CliError;
use crate::scenario::{aged, build_dataset, dataset_seed, filter_seed, parse_scenarios, Scenario};

/// One filter run; a row of the seed ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub conversion: String,
    pub level: f64,
    pub rep: usize,
    pub dataset_seed: u64,
    pub filter_seed: u64,
    pub frames: usize,
    pub mean_error_m: Option<f64>,
    pub mean_evaluations: Option<f64>,
    pub dr_mean_error_m: Option<f64>,
    pub degenerate_frames: usize,
    /// Empty on success, else the failure message.
    pub error: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Mean over the completed repetitions of one (scenario, conversion, level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub conversion: String,
    pub level: f64,
    pub repetitions: usize,
    pub completed: usize,
    pub mean_error_m: Option<f64>,
    pub mean_evaluations: Option<f64>,
    pub dr_mean_error_m: Option<f64>,
    /// Mean error divided by the level-0 mean error of the same cell.
    pub error_ratio: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub runs: Vec<RunRecord>,
}

/// Progress sink; `None` keeps the harness quiet.
pub type Progress<'a> = Option<&'a (dyn Fn(&RunRecord) + Sync)>;

struct Unit {
    scenario: Scenario,
    name: String,
    rep: usize,
}

/// Runs every (scenario, conversion, level) cell `cfg.repetitions` times.
/// Frames always come from the level-0 map; the filter matches against the
/// map aged to each level.
pub fn run_grid(
    cfg: &Config,
    conversions: &[ConversionSpec],
    levels: &[f64],
    progress: Progress<'_>,
) -> Result<SweepResult, CliError> {
    cfg.check_repetitions()?;
    if conversions.is_empty() {
        return Err(CliError::Config("conversion grid is empty".into()));
    }
    if levels.is_empty() {
        return Err(CliError::Config("no age levels configured".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(CliError::Config(format!("age level {l} outside [0, 1]")));
    }
    let scenarios = parse_scenarios(cfg)?;
    let filters = conversions
        .iter()
        .map(|c| cfg.filter_with(*c))
        .collect::<Result<Vec<_>, _>>()?;

    let units: Vec<Unit> = scenarios
        .iter()
        .flat_map(|s| {
            (0..cfg.repetitions).map(move |rep| Unit {
                scenario: *s,
                name: s.name(),
                rep,
            })
        })
        .collect();

    let runs: Vec<RunRecord> = units
        .par_iter()
        .flat_map_iter(|unit| run_unit(cfg, unit, &filters, levels, progress))
        .collect();

    let cells = aggregate(&scenarios, conversions, levels, cfg.repetitions, &runs);
    Ok(SweepResult { cells, runs })
}

fn run_unit(
    cfg: &Config,
    unit: &Unit,
    filters: &[ortholoc_core::FilterConfig],
    levels: &[f64],
    progress: Progress<'_>,
) -> Vec<RunRecord> {
    let dseed = dataset_seed(cfg.seed, &unit.name, unit.rep);
    let dataset = build_dataset(cfg, &unit.scenario, dseed);
    let mut out = Vec::with_capacity(filters.len() * levels.len());
    for &level in levels {
        let map: Result<RasterMap, CliError> = match &dataset {
            Ok(d) => aged(cfg, &d.map, dseed, level),
            Err(e) => Err(CliError::Runtime(e.to_string())),
        };
        for f in filters {
            let label = f.conversion.label();
            let fseed = filter_seed(cfg.seed, &unit.name, &label, unit.rep);
            let mut rec = RunRecord {
                scenario: unit.name.clone(),
                conversion: label,
                level,
                rep: unit.rep,
                dataset_seed: dseed,
                filter_seed: fseed,
                frames: 0,
                mean_error_m: None,
                mean_evaluations: None,
                dr_mean_error_m: None,
                degenerate_frames: 0,
                error: String::new(),
            };
            let result = match (&dataset, &map) {
                (Ok(d), Ok(m)) => run_flight(&d.flight, m, f, fseed).map_err(CliError::from),
                (_, Err(e)) => Err(CliError::Runtime(e.to_string())),
                (Err(e), _) => Err(CliError::Runtime(e.to_string())),
            };
            match result {
                Ok(report) => {
                    let s = report.summary();
                    rec.frames = s.frames;
                    rec.mean_error_m = Some(s.mean_error_m);
                    rec.mean_evaluations = Some(s.mean_evaluations);
                    rec.dr_mean_error_m = Some(s.dr_mean_error_m);
                    rec.degenerate_frames = s.degenerate_frames;
                }
                Err(e) => rec.error = e.to_string(),
            }
            if let Some(p) = progress {
                p(&rec);
            }
            out.push(rec);
        }
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn aggregate(
    scenarios: &[Scenario],
    conversions: &[ConversionSpec],
    levels: &[f64],
    repetitions: usize,
    runs: &[RunRecord],
) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for s in scenarios {
        let name = s.name();
        for c in conversions {
            let label = c.label();
            let mut base: Option<f64> = None;
            for (li, &level) in levels.iter().enumerate() {
                let done: Vec<&RunRecord> = runs
                    .iter()
                    .filter(|r| {
                        r.scenario == name && r.conversion == label && r.level == level && r.ok()
                    })
                    .collect();
                let err = mean(done.iter().filter_map(|r| r.mean_error_m));
                if li == 0 {
                    base = err;
                }
                let ratio = match (err, base) {
                    (Some(e), Some(b)) if b > 0.0 => Some(e / b),
                    _ => None,
                };
                cells.push(CellResult {
                    scenario: name.clone(),
                    conversion: label.clone(),
                    level,
                    repetitions,
                    completed: done.len(),
                    mean_error_m: err,
                    mean_evaluations: mean(done.iter().filter_map(|r| r.mean_evaluations)),
                    dr_mean_error_m: mean(done.iter().filter_map(|r| r.dr_mean_error_m)),
                    error_ratio: ratio,
                    valid: !done.is_empty(),
                });
            }
        }
    }
    cells
}

/// Per-seed error ratio (level / level 0) for one scenario and conversion,
/// indexed by repetition.
pub fn per_rep_ratios(
    runs: &[RunRecord],
    scenario: &str,
    conversion: &str,
    level: f64,
) -> BTreeMap<usize, f64> {
    let pick = |l: f64| -> BTreeMap<usize, f64> {
        runs.iter()
            .filter(|r| {
                r.scenario == scenario && r.conversion == conversion && r.level == l && r.ok()
            })
            .filter_map(|r| r.mean_error_m.map(|e| (r.rep, e)))
            .collect()
    };
    let base = pick(0.0);
    pick(level)
        .into_iter()
        .filter_map(|(rep, e)| base.get(&rep).filter(|b| **b > 0.0).map(|b| (rep, e / b)))
        .collect()
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(CliError::runtime)?;
    }
    w.flush().map_err(CliError::runtime)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
