//! Batch report: one CSV row per image plus summary statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 8] = [
    "file",
    "gaze_x",
    "gaze_y",
    "p_orig_w",
    "p_mod_w",
    "savings",
    "pct_modulated",
    "pct_clamped",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub file: String,
    pub gaze_x: f64,
    pub gaze_y: f64,
    pub p_orig_w: f64,
    pub p_mod_w: f64,
    /// Fraction of total predicted power saved.
    pub savings: f64,
    pub pct_modulated: f64,
    pub pct_clamped: f64,
    /// Fraction of the content-dependent power saved. Not part of the CSV.
    #[serde(skip)]
    pub dynamic_savings: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges spanning `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of_savings(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        for &v in values {
            let i = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub images: usize,
    pub mean_savings: f64,
    pub max_savings: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub mean_dynamic_savings: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<ImageReport>,
    /// `(file, reason)` for inputs that could not be processed.
    pub skipped: Vec<(String, String)>,
    pub histogram: Histogram,
    pub summary: Summary,
}

/// Linearly interpolated percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BatchReport {
    pub fn new(images: Vec<ImageReport>, skipped: Vec<(String, String)>, bins: usize) -> Self {
        let savings: Vec<f64> = images.iter().map(|r| r.savings).collect();
        let mut sorted = savings.clone();
        sorted.sort_by(f64::total_cmp);
        let n = images.len().max(1) as f64;
        let summary = Summary {
            images: images.len(),
            mean_savings: savings.iter().sum::<f64>() / n,
            max_savings: sorted.last().copied().unwrap_or(0.0),
            p5: percentile(&sorted, 5.0),
            p50: percentile(&sorted, 50.0),
            p95: percentile(&sorted, 95.0),
            mean_dynamic_savings: images.iter().map(|r| r.dynamic_savings).sum::<f64>() / n,
        };
        BatchReport {
            histogram: Histogram::of_savings(&savings, bins),
            images,
            skipped,
            summary,
        }
    }

    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let mut out = format!(
            "images: {}  skipped: {}\nsavings mean {:.4}  max {:.4}  P5 {:.4}  P50 {:.4}  P95 {:.4}\n\
             dynamic-power savings mean {:.4}\nhistogram:\n",
            s.images,
            self.skipped.len(),
            s.mean_savings,
            s.max_savings,
            s.p5,
            s.p50,
            s.p95,
            s.mean_dynamic_savings
        );
        for (i, c) in self.histogram.counts.iter().enumerate() {
            if *c > 0 {
                out.push_str(&format!(
                    "  [{:.2}, {:.2})  {c}\n",
                    self.histogram.edges[i],
                    self.histogram.edges[i + 1]
                ));
            }
        }
        out
    }
}

pub fn write_report_csv<W: Write>(writer: W, report: &BatchReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in &report.images {
        w.write_record([
            r.file.clone(),
            r.gaze_x.to_string(),
            r.gaze_y.to_string(),
            r.p_orig_w.to_string(),
            r.p_mod_w.to_string(),
            r.savings.to_string(),
            r.pct_modulated.to_string(),
            r.pct_clamped.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
