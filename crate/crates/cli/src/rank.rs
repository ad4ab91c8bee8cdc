//! Rank-point aggregation across scenarios and Δ-accuracy comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use crate::sweep::CellResult;

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub conversion: String,
    /// Points per scenario, keyed by scenario name.
    pub points: BTreeMap<String, f64>,
    pub total: f64,
}

/// Per scenario, the configuration with the lowest mean error gets 1 point,
/// the next 2, and so on; tied configurations share the mean of their
/// positions. Invalid cells share the worst positions. Rows come back sorted
/// by total (lowest first), ties broken by name.
pub fn rank(cells: &[CellResult]) -> Result<Vec<RankRow>, CliError> {
    let level0: Vec<&CellResult> = cells.iter().filter(|c| c.level == 0.0).collect();
    let mut by_scenario: BTreeMap<&str, Vec<&CellResult>> = BTreeMap::new();
    for c in &level0 {
        by_scenario.entry(c.scenario.as_str()).or_default().push(c);
    }
    let conversions: Vec<String> = {
        let mut v: Vec<String> = level0.iter().map(|c| c.conversion.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    if conversions.len() < 2 || by_scenario.is_empty() {
        return Err(CliError::Config(
            "ranking needs at least two configurations and one scenario".into(),
        ));
    }

    let mut rows: BTreeMap<String, RankRow> = conversions
        .iter()
        .map(|c| {
            (
                c.clone(),
                RankRow {
                    conversion: c.clone(),
                    points: BTreeMap::new(),
                    total: 0.0,
                },
            )
        })
        .collect();

    for (scenario, group) in &by_scenario {
        if group.len() != conversions.len() {
            return Err(CliError::Config(format!(
                "scenario {scenario} has {} configurations, expected {}",
                group.len(),
                conversions.len()
            )));
        }
        // Invalid cells sort last and tie with each other.
        let key = |c: &CellResult| match (c.valid, c.mean_error_m) {
            (true, Some(e)) if e.is_finite() => e,
            _ => f64::INFINITY,
        };
        let mut sorted: Vec<(&str, f64)> = group
            .iter()
            .map(|c| (c.conversion.as_str(), key(c)))
            .collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j].1 == sorted[i].1 {
                j += 1;
            }
            // Positions i+1 ..= j share their mean.
            let shared = (i + 1 + j) as f64 / 2.0;
            for (conv, _) in &sorted[i..j] {
                let row = rows.get_mut(*conv).expect("known conversion");
                row.points.insert(scenario.to_string(), shared);
                row.total += shared;
            }
            i = j;
        }
    }

    let mut out: Vec<RankRow> = rows.into_values().collect();
    out.sort_by(|a, b| {
        a.total
            .total_cmp(&b.total)
            .then_with(|| a.conversion.cmp(&b.conversion))
    });
    Ok(out)
}

/// CSV with one column per scenario plus the total.
pub fn write_rank_csv(rows: &[RankRow], path: &Path) -> Result<(), CliError> {
    let scenarios: Vec<&String> = rows
        .first()
        .map(|r| r.points.keys().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_path(path).map_err(CliError::runtime)?;
    let mut header = vec!["conversion".to_string()];
    header.extend(scenarios.iter().map(|s| s.to_string()));
    header.push("total_points".into());
    w.write_record(&header).map_err(CliError::runtime)?;
    for r in rows {
        let mut rec = vec![r.conversion.clone()];
        rec.extend(scenarios.iter().map(|s| r.points[*s].to_string()));
        rec.push(r.total.to_string());
        w.write_record(&rec).map_err(CliError::runtime)?;
    }
    w.flush().map_err(CliError::runtime)
}

pub fn read_rank_csv(path: &Path) -> Result<Vec<RankRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::config)?;
    let header: Vec<String> = r
        .headers()
        .map_err(CliError::config)?
        .iter()
        .map(String::from)
        .collect();
    let n = header.len();
    if n < 2 || header[0] != "conversion" || header[n - 1] != "total_points" {
        return Err(CliError::Config(format!(
            "{} is not a ranking table",
            path.display()
        )));
    }
    let num = |s: &str| -> Result<f64, CliError> {
        s.parse()
            .map_err(|_| CliError::Config(format!("bad number '{s}' in {}", path.display())))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(CliError::config)?;
        let mut points = BTreeMap::new();
        for (i, name) in header.iter().enumerate().take(n - 1).skip(1) {
            points.insert(name.clone(), num(&rec[i])?);
        }
        rows.push(RankRow {
            conversion: rec[0].to_string(),
            points,
            total: num(&rec[n - 1])?,
        });
    }
    Ok(rows)
}

/// Accuracy and speed of run `b` relative to run `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub mean_a: f64,
    pub mean_b: f64,
    pub evaluations_a: f64,
    pub evaluations_b: f64,
    /// `(mean_b − mean_a) / mean_a · 100`; `None` when `mean_a` is zero.
    pub delta_accuracy_pct: Option<f64>,
    /// `evaluations_b / evaluations_a`; `None` when `evaluations_a` is zero.
    pub speedup: Option<f64>,
}

pub fn compare(mean_a: f64, evaluations_a: f64, mean_b: f64, evaluations_b: f64) -> Comparison {
    let ratio =
        |num: f64, den: f64| (den != 0.0 && den.is_finite() && num.is_finite()).then(|| num / den);
    Comparison {
        mean_a,
        mean_b,
        evaluations_a,
        evaluations_b,
        delta_accuracy_pct: ratio(mean_b - mean_a, mean_a).map(|r| r * 100.0),
        speedup: ratio(evaluations_b, evaluations_a),
    }
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "invalid".to_string(), |x| x.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "mean_error_a_m={}", self.mean_a);
        let _ = writeln!(s, "mean_error_b_m={}", self.mean_b);
        let _ = writeln!(s, "mean_evaluations_a={}", self.evaluations_a);
        let _ = writeln!(s, "mean_evaluations_b={}", self.evaluations_b);
        let _ = writeln!(s, "delta_accuracy_pct={}", opt(self.delta_accuracy_pct));
        let _ = writeln!(s, "speedup={}", opt(self.speedup));
        s
    }
}
