//! Accuracy and uncertainty metrics, canopy chlorophyll from the joint
//! posterior, and evaluation against field records.

mod field;

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use field::{
    field_columns, parse_field_csv, read_field_csv, write_field_csv, CccUnit, FieldRecord, ParsedRecords,
};

use crate::error::{Error, Result};
use crate::params::idx;
use crate::tvae::{infer, LatentPosterior, TrainedModel, INTERVAL_LEVEL};

/// Minimum joint draws for a chlorophyll estimate.
pub const MIN_CCC_SAMPLES: usize = 100;

/// Point estimate with a prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval membership.
    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { mean: self.mean * c, lower: self.lower * c, upper: self.upper * c }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Data(format!("length mismatch: {a} predictions, {b} truths")));
    }
    if a == 0 {
        return Err(Error::Data("no values".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// `1 − SS_res / SS_tot`.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.len() < 2 {
        return Err(Error::Data("R² needs at least two values".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Data("R² is undefined for constant truth".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mpiw(intervals: &[IntervalEstimate]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Data("no intervals".into()));
    }
    Ok(intervals.iter().map(IntervalEstimate::width).sum::<f64>() / intervals.len() as f64)
}

/// Fraction of truths inside their closed intervals.
pub fn picp(intervals: &[IntervalEstimate], truth: &[f64]) -> Result<f64> {
    check_lengths(intervals.len(), truth.len())?;
    let hits = intervals.iter().zip(truth).filter(|(iv, &t)| iv.covers(t)).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Empirical quantile with linear interpolation between order statistics.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// CCC (µg cm⁻²) from `m` independent joint draws of the LAI and Cab
/// marginals: sample mean and central interval at [`INTERVAL_LEVEL`].
pub fn ccc_posterior<R: Rng + ?Sized>(post: &LatentPosterior, m: usize, rng: &mut R) -> Result<IntervalEstimate> {
    if m < MIN_CCC_SAMPLES {
        return Err(Error::Config(format!("CCC needs at least {MIN_CCC_SAMPLES} draws, got {m}")));
    }
    if post.len() <= idx::LAI.max(idx::CAB) {
        return Err(Error::Data("posterior lacks LAI or Cab".into()));
    }
    let lai = post.physical(idx::LAI)?;
    let cab = post.physical(idx::CAB)?;
    let mut draws: Vec<f64> = (0..m).map(|_| lai.quantile(rng.random()) * cab.quantile(rng.random())).collect();
    let mean = draws.iter().sum::<f64>() / m as f64;
    draws.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - INTERVAL_LEVEL);
    Ok(IntervalEstimate { mean, lower: percentile(&draws, tail), upper: percentile(&draws, 1.0 - tail) })
}

/// Random stream for the chlorophyll draws of record `index`.
pub fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    rng.set_stream(index as u64);
    rng
}

/// Estimates for one record: LAI and CCC, the latter in µg cm⁻².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordEstimate {
    pub lai: IntervalEstimate,
    pub ccc: IntervalEstimate,
}

pub fn estimate_record(model: &TrainedModel, rec: &FieldRecord, m: usize, seed: u64, index: usize) -> Result<RecordEstimate> {
    let est = infer(model, &rec.bands, &rec.geometry)?;
    let v = &est.variables[idx::LAI];
    let ccc = ccc_posterior(&est.posterior, m, &mut record_rng(seed, index))?;
    Ok(RecordEstimate { lai: IntervalEstimate { mean: v.mean, lower: v.lower, upper: v.upper }, ccc })
}

/// One line of the long-format report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: String,
    pub variable: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn get(&self, group: &str, variable: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.group == group && r.variable == variable && r.metric == metric).map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Data(format!("CSV export failed: {e}"));
        w.write_record(["group", "variable", "metric", "value", "n"]).map_err(map)?;
        for r in &self.rows {
            w.write_record([r.group.clone(), r.variable.clone(), r.metric.clone(), r.value.to_string(), r.n.to_string()])
                .map_err(map)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Prediction against truth for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub site: String,
    pub date: String,
    pub variable: String,
    pub unit: String,
    pub truth: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(format!("CSV export failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub scatter: Vec<ScatterRow>,
    /// Records without any truth value.
    pub skipped: usize,
}

fn metric_rows(group: &str, variable: &str, ivs: &[IntervalEstimate], truth: &[f64]) -> Result<Vec<MetricRow>> {
    let n = truth.len();
    let pred: Vec<f64> = ivs.iter().map(|iv| iv.mean).collect();
    let row = |metric: &str, value: f64| MetricRow {
        group: group.to_string(),
        variable: variable.to_string(),
        metric: metric.to_string(),
        value,
        n,
    };
    let mut rows = vec![row("rmse", rmse(&pred, truth)?)];
    if let Ok(v) = r2(&pred, truth) {
        rows.push(row("r2", v));
    }
    rows.push(row("mpiw", mpiw(ivs)?));
    rows.push(row("picp", picp(ivs, truth)?));
    Ok(rows)
}

/// Scores the model on `records`, by site and over all records ("all").
/// Chlorophyll predictions are converted to each record's declared unit;
/// records mixing units are rejected.
pub fn evaluate(model: &TrainedModel, records: &[FieldRecord], m: usize, seed: u64) -> Result<Evaluation> {
    if records.is_empty() {
        return Err(Error::Data("no field records".into()));
    }
    if records.iter().any(|r| r.site == "all") {
        return Err(Error::Data("site name `all` is reserved for the overall group".into()));
    }
    let units: Vec<CccUnit> = records.iter().filter(|r| r.ccc.is_some()).filter_map(|r| r.ccc_unit).collect();
    if units.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Data("field records declare more than one ccc_unit".into()));
    }
    let usable: Vec<(usize, &FieldRecord)> = records.iter().enumerate().filter(|(_, r)| r.has_truth()).collect();
    let skipped = records.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Data("no record carries an LAI or CCC value".into()));
    }
    let estimates: Vec<RecordEstimate> =
        usable.par_iter().map(|&(i, r)| estimate_record(model, r, m, seed, i)).collect::<Result<_>>()?;

    type Series = (Vec<IntervalEstimate>, Vec<f64>);
    let mut groups: BTreeMap<(String, &str), Series> = BTreeMap::new();
    let mut scatter = Vec::new();
    for (&(_, r), est) in usable.iter().zip(&estimates) {
        let mut push = |variable: &'static str, unit: &str, iv: IntervalEstimate, truth: f64| {
            for g in [r.site.clone(), "all".to_string()] {
                let e = groups.entry((g, variable)).or_default();
                e.0.push(iv);
                e.1.push(truth);
            }
            scatter.push(ScatterRow {
                site: r.site.clone(),
                date: r.date.clone(),
                variable: variable.to_string(),
                unit: unit.to_string(),
                truth,
                mean: iv.mean,
                lower: iv.lower,
                upper: iv.upper,
            });
        };
        if let Some(t) = r.lai {
            push("LAI", "m2/m2", est.lai, t);
        }
        if let (Some(t), Some(u)) = (r.ccc, r.ccc_unit) {
            push("CCC", u.label(), est.ccc.scaled(u.from_ug_per_cm2()), t);
        }
    }
    let mut report = MetricsReport::default();
    let (all, sites): (Vec<_>, Vec<_>) = groups.iter().partition(|((g, _), _)| g == "all");
    for ((group, variable), (ivs, truth)) in sites.into_iter().chain(all) {
        report.rows.extend(metric_rows(group, variable, ivs, truth)?);
    }
    Ok(Evaluation { report, scatter, skipped })
}
