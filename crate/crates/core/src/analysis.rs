//! Regression against social factors, distribution summaries and model
//! comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::OverallRisk;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Weighted least squares fit of `ys ~ a + b * xs`.
pub fn wls_fit(xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<RegressionResult> {
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} xs, {} ys, {} weights",
            xs.len(),
            ys.len(),
            weights.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidDistribution(format!("regression weight {w}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution("non-finite regression input".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("regression weights are all zero".into()));
    }
    let live: Vec<(f64, f64, f64)> = xs
        .iter()
        .zip(ys)
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|((x, y), w)| (*x, *y, *w))
        .collect();
    if live.iter().all(|(x, _, _)| *x == live[0].0) {
        return Err(Error::DegenerateDesign);
    }
    let mx = live.iter().map(|(x, _, w)| w * x).sum::<f64>() / total;
    if live.iter().all(|(_, y, _)| *y == live[0].1) {
        return Ok(RegressionResult {
            slope: 0.0,
            intercept: live[0].1,
            r_squared: 0.0,
            n: xs.len(),
        });
    }
    let my = live.iter().map(|(_, y, w)| w * y).sum::<f64>() / total;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y, w) in &live {
        let (dx, dy) = (x - mx, y - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionResult {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub group_id: String,
    pub factor_value: f64,
    /// Population of the group.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialFactorTable {
    pub rows: Vec<FactorRow>,
}

impl SocialFactorTable {
    pub fn new(rows: Vec<FactorRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(r.group_id.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "group `{}` listed twice in factor table",
                    r.group_id
                )));
            }
            if !r.factor_value.is_finite() || !r.weight.is_finite() || r.weight < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "bad factor row for `{}`",
                    r.group_id
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Reads CSV with header `group_id,factor_value,weight`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<FactorRow>, _>>()?;
        Self::new(rows)
    }
}

/// Regresses per-group risk on the factor, weighted by population.
pub fn regress(per_group_risk: &BTreeMap<String, f64>, factors: &SocialFactorTable) -> Result<RegressionResult> {
    let missing: Vec<String> = factors
        .rows
        .iter()
        .filter(|r| !per_group_risk.contains_key(&r.group_id))
        .map(|r| r.group_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingGroups(missing));
    }
    let positive = factors.rows.iter().filter(|r| r.weight > 0.0).count();
    if positive < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: positive,
        });
    }
    let xs: Vec<f64> = factors.rows.iter().map(|r| r.factor_value).collect();
    let ys: Vec<f64> = factors.rows.iter().map(|r| per_group_risk[&r.group_id]).collect();
    let ws: Vec<f64> = factors.rows.iter().map(|r| r.weight).collect();
    wls_fit(&xs, &ys, &ws)
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    /// Equal-width bins over `[min, max]`; the last bin is closed.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.max - self.min) / self.counts.len() as f64;
        let hi = if i + 1 == self.counts.len() {
            self.max
        } else {
            self.min + width * (i + 1) as f64
        };
        (self.min + width * i as f64, hi)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_edges(i);
            w.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    /// From population moments; 0 when the values have no spread.
    pub excess_kurtosis: f64,
    pub degenerate: bool,
    pub histogram: Histogram,
}

pub fn summarize_distribution(values: &[f64]) -> Result<DistributionSummary> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution("non-finite sample".into()));
    }
    // sorted so the summary does not depend on input order
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in &v {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    let std = (m2 / (n - 1.0)).sqrt();
    let (m2, m4) = (m2 / n, m4 / n);
    let degenerate = m2 == 0.0;
    let excess_kurtosis = if degenerate { 0.0 } else { m4 / (m2 * m2) - 3.0 };

    let (min, max) = (v[0], v[v.len() - 1]);
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    let width = (max - min) / HISTOGRAM_BINS as f64;
    for x in &v {
        let bin = if width > 0.0 {
            (((x - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(DistributionSummary {
        n: v.len(),
        mean,
        std,
        excess_kurtosis,
        degenerate,
        histogram: Histogram { min, max, counts },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_id: String,
    /// Scaled overall indices.
    #[serde(rename = "R")]
    pub discrimination: f64,
    #[serde(rename = "R_p")]
    pub prejudice: f64,
    #[serde(rename = "R_v")]
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Two decimals, with negative zero printed as zero.
pub fn format_index(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Rows sorted by scaled discrimination risk, highest first; ties by id.
pub fn compare_models(reports: &[(String, OverallRisk)], scale: f64) -> ComparisonTable {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(id, o)| {
            let s = o.totals().scaled(scale);
            ComparisonRow {
                model_id: id.clone(),
                discrimination: s.discrimination,
                prejudice: s.prejudice,
                volatility: s.volatility,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.discrimination
            .total_cmp(&a.discrimination)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    ComparisonTable { rows }
}

impl ComparisonTable {
    fn cells(row: &ComparisonRow) -> [String; 3] {
        [
            format_index(row.discrimination),
            format_index(row.prejudice),
            format_index(row.volatility),
        ]
    }

    /// Formatted `[R, R_p, R_v]` per row.
    pub fn formatted(&self) -> Vec<(String, [String; 3])> {
        self.rows.iter().map(|r| (r.model_id.clone(), Self::cells(r))).collect()
    }

    /// Markdown table; the worst (largest) value of each column is bold
    /// when the column is not constant.
    pub fn to_markdown(&self) -> String {
        let cols = |r: &ComparisonRow| [r.discrimination, r.prejudice, r.volatility];
        let mut worst = [f64::NEG_INFINITY; 3];
        let mut best = [f64::INFINITY; 3];
        for r in &self.rows {
            for (i, v) in cols(r).into_iter().enumerate() {
                worst[i] = worst[i].max(v);
                best[i] = best[i].min(v);
            }
        }
        let mut out = String::from("| Model | R | R^p | R^v |\n|---|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = write!(out, "| {} |", r.model_id);
            for (i, v) in cols(r).into_iter().enumerate() {
                let s = format_index(v);
                if worst[i] > best[i] && v == worst[i] {
                    let _ = write!(out, " **{s}** |");
                } else {
                    let _ = write!(out, " {s} |");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model_id", "R", "R_p", "R_v"])?;
        for (id, [a, b, c]) in self.formatted() {
            w.write_record([id, a, b, c])?;
        }
        csv_string(w)
    }
}
