//! Aggregation, comparison and CSV output of benchmark runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunReport;
use crate::error::{Error, Result};
use crate::signal::ControllerKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

/// Metrics compared against the signalized baseline.
pub const COMPARED_METRICS: [&str; 7] = [
    "avg_wait_ped_s",
    "avg_wait_veh_s",
    "avg_wait_combined_s",
    "total_wait_ped_hr",
    "total_wait_veh_hr",
    "conflicts",
    "switches",
];

fn metric(r: &RunReport, name: &str) -> f64 {
    match name {
        "avg_wait_ped_s" => r.avg_wait_ped_s,
        "avg_wait_veh_s" => r.avg_wait_veh_s,
        "avg_wait_combined_s" => r.avg_wait_combined_s,
        "total_wait_ped_hr" => r.total_wait_ped_hr,
        "total_wait_veh_hr" => r.total_wait_veh_hr,
        "conflicts" => r.conflicts as f64,
        "switches" => r.switches as f64,
        "avg_simultaneous_mb_green" => r.avg_simultaneous_mb_green,
        other => panic!("unknown metric {other}"),
    }
}

/// Mean and spread of every metric over the runs of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub controller: ControllerKind,
    pub scale: f64,
    pub runs: usize,
    pub avg_wait_ped_s: MeanStd,
    pub avg_wait_veh_s: MeanStd,
    pub avg_wait_combined_s: MeanStd,
    pub total_wait_ped_hr: MeanStd,
    pub total_wait_veh_hr: MeanStd,
    pub conflicts: MeanStd,
    pub switches: MeanStd,
    pub avg_simultaneous_mb_green: MeanStd,
    pub audit_failures: usize,
}

impl CellSummary {
    pub fn get(&self, name: &str) -> MeanStd {
        match name {
            "avg_wait_ped_s" => self.avg_wait_ped_s,
            "avg_wait_veh_s" => self.avg_wait_veh_s,
            "avg_wait_combined_s" => self.avg_wait_combined_s,
            "total_wait_ped_hr" => self.total_wait_ped_hr,
            "total_wait_veh_hr" => self.total_wait_veh_hr,
            "conflicts" => self.conflicts,
            "switches" => self.switches,
            "avg_simultaneous_mb_green" => self.avg_simultaneous_mb_green,
            other => panic!("unknown metric {other}"),
        }
    }
}

/// Groups runs by (controller, scale) in order of first appearance.
pub fn summarize(runs: &[RunReport]) -> Vec<CellSummary> {
    let mut keys: Vec<(ControllerKind, f64)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|&(c, s)| c == r.controller && s == r.scale) {
            keys.push((r.controller, r.scale));
        }
    }
    keys.into_iter()
        .map(|(c, s)| {
            let cell: Vec<&RunReport> = runs.iter().filter(|r| r.controller == c && r.scale == s).collect();
            let ms = |name: &str| MeanStd::of(&cell.iter().map(|r| metric(r, name)).collect::<Vec<_>>());
            CellSummary {
                controller: c,
                scale: s,
                runs: cell.len(),
                avg_wait_ped_s: ms("avg_wait_ped_s"),
                avg_wait_veh_s: ms("avg_wait_veh_s"),
                avg_wait_combined_s: ms("avg_wait_combined_s"),
                total_wait_ped_hr: ms("total_wait_ped_hr"),
                total_wait_veh_hr: ms("total_wait_veh_hr"),
                conflicts: ms("conflicts"),
                switches: ms("switches"),
                avg_simultaneous_mb_green: ms("avg_simultaneous_mb_green"),
                audit_failures: cell.iter().filter(|r| !r.audit().is_clean()).count(),
            }
        })
        .collect()
}

/// Percentage reduction of `value` relative to `baseline`.
pub fn improvement_pct(baseline: f64, value: f64) -> f64 {
    if baseline == value {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scale: f64,
    pub metric: String,
    pub rl: f64,
    pub signalized: f64,
    pub unsignalized: Option<f64>,
    pub improvement_vs_signalized_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

fn scale_set(cells: &[CellSummary], c: ControllerKind) -> BTreeSet<u64> {
    cells
        .iter()
        .filter(|x| x.controller == c)
        .map(|x| x.scale.to_bits())
        .collect()
}

/// RL against the signalized baseline (and the unsignalized one when
/// present) at every scale.
pub fn compare(cells: &[CellSummary]) -> Result<Comparison> {
    let rl = scale_set(cells, ControllerKind::Rl);
    let fixed = scale_set(cells, ControllerKind::Fixed);
    let uns = scale_set(cells, ControllerKind::Unsignalized);
    if rl.is_empty() || fixed.is_empty() {
        return Err(Error::Mismatch("need both rl and fixed reports".into()));
    }
    if rl != fixed || (!uns.is_empty() && uns != fixed) {
        return Err(Error::Mismatch("controllers were evaluated on different scale sets".into()));
    }
    let find = |c: ControllerKind, s: u64| cells.iter().find(|x| x.controller == c && x.scale.to_bits() == s);
    let mut scales: Vec<f64> = rl.iter().map(|&b| f64::from_bits(b)).collect();
    scales.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for s in scales {
        let b = s.to_bits();
        let r = find(ControllerKind::Rl, b).expect("scale present");
        let f = find(ControllerKind::Fixed, b).expect("scale present");
        let u = find(ControllerKind::Unsignalized, b);
        for m in COMPARED_METRICS {
            let (rv, fv) = (r.get(m).mean, f.get(m).mean);
            rows.push(ComparisonRow {
                scale: s,
                metric: m.to_string(),
                rl: rv,
                signalized: fv,
                unsignalized: u.map(|u| u.get(m).mean),
                improvement_vs_signalized_pct: improvement_pct(fv, rv),
            });
        }
    }
    Ok(Comparison { rows })
}

impl Comparison {
    /// Human-readable block with the wait metrics per scale.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6}  {:<20} {:>10} {:>10} {:>10} {:>8}",
            "scale", "metric", "rl", "fixed", "unsig", "gain%"
        );
        for r in self.rows.iter().filter(|r| r.metric.starts_with("avg_wait")) {
            let _ = writeln!(
                s,
                "{:>6.2}  {:<20} {:>10.2} {:>10.2} {:>10} {:>8.1}",
                r.scale,
                r.metric,
                r.rl,
                r.signalized,
                r.unsignalized.map_or("-".to_string(), |u| format!("{u:.2}")),
                r.improvement_vs_signalized_pct
            );
        }
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_runs_csv(path: impl AsRef<Path>, runs: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in runs {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv(path: impl AsRef<Path>) -> Result<Vec<RunReport>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|x| x.map_err(csv_err)).collect()
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    controller: ControllerKind,
    scale: f64,
    runs: usize,
    metric: &'a str,
    mean: f64,
    std: f64,
}

pub fn write_summary_csv(path: impl AsRef<Path>, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for c in cells {
        for m in COMPARED_METRICS.iter().copied().chain(["avg_simultaneous_mb_green"]) {
            let v = c.get(m);
            w.serialize(SummaryRecord {
                controller: c.controller,
                scale: c.scale,
                runs: c.runs,
                metric: m,
                mean: v.mean,
                std: v.std,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv(path: impl AsRef<Path>, cmp: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in &cmp.rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
