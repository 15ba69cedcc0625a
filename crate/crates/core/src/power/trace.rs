//! Power-meter traces.
//!
//! A trace is a CSV with header `t_seconds,watts` and strictly increasing
//! timestamps. A sidecar CSV with header `r,g,b,start_s,end_s` annotates which
//! full-screen linear sRGB color was shown during `[start_s, end_s)`.
//! Already-averaged samples use `r,g,b,watts`.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{predict_power, PowerModel, PowerSample};
use crate::colorspace::LinearRgb;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Reading {
    t_seconds: f64,
    watts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl Segment {
    pub fn color(&self) -> LinearRgb {
        LinearRgb::new(self.r, self.g, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerTrace {
    /// `(seconds, watts)`
    pub readings: Vec<(f64, f64)>,
    pub segments: Vec<Segment>,
}

impl PowerTrace {
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, name: &str, want: &[&str]) -> Result<()> {
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != want {
        return Err(Error::parse(
            name,
            1,
            format!("expected header '{}', found '{}'", want.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn row_line(e: &csv::Error) -> usize {
    e.position().map_or(0, |p| p.line() as usize)
}

pub fn parse_power_trace<R1: Read, R2: Read>(
    trace: R1,
    trace_name: &str,
    segments: R2,
    segments_name: &str,
) -> Result<PowerTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(trace);
    check_header(&mut rdr, trace_name, &["t_seconds", "watts"])?;
    let mut readings: Vec<(f64, f64)> = Vec::new();
    for row in rdr.deserialize::<Reading>() {
        let row = row.map_err(|e| Error::parse(trace_name, row_line(&e), e.to_string()))?;
        let line = readings.len() + 2;
        if !row.t_seconds.is_finite() || !row.watts.is_finite() {
            return Err(Error::parse(trace_name, line, "non-finite value"));
        }
        if let Some(&(prev, _)) = readings.last() {
            if row.t_seconds <= prev {
                return Err(Error::parse(
                    trace_name,
                    line,
                    format!("timestamp {} does not increase (previous {prev})", row.t_seconds),
                ));
            }
        }
        readings.push((row.t_seconds, row.watts));
    }

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(segments);
    check_header(&mut rdr, segments_name, &["r", "g", "b", "start_s", "end_s"])?;
    let mut segs = Vec::new();
    for row in rdr.deserialize::<Segment>() {
        let seg = row.map_err(|e| Error::parse(segments_name, row_line(&e), e.to_string()))?;
        if !(seg.end_s > seg.start_s) {
            return Err(Error::parse(segments_name, segs.len() + 2, "segment end must be after its start"));
        }
        segs.push(seg);
    }
    Ok(PowerTrace {
        readings,
        segments: segs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SampleRow {
    r: f64,
    g: f64,
    b: f64,
    watts: f64,
}

pub const SAMPLES_HEADER: [&str; 4] = ["r", "g", "b", "watts"];

pub fn read_power_samples<R: Read>(reader: R, name: &str) -> Result<Vec<PowerSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, name, &SAMPLES_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<SampleRow>() {
        let row = row.map_err(|e| Error::parse(name, row_line(&e), e.to_string()))?;
        out.push(PowerSample {
            color: LinearRgb::new(row.r, row.g, row.b),
            watts: row.watts,
        });
    }
    Ok(out)
}

pub fn write_power_samples<W: Write>(writer: W, samples: &[PowerSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(SampleRow {
            r: s.color.r,
            g: s.color.g,
            b: s.color.b,
            watts: s.watts,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One sample per segment: the arithmetic mean of the readings it covers.
pub fn trace_to_samples(trace: &PowerTrace) -> Result<Vec<PowerSample>> {
    trace
        .segments
        .iter()
        .map(|seg| {
            let lo = trace.readings.partition_point(|r| r.0 < seg.start_s);
            let hi = trace.readings.partition_point(|r| r.0 < seg.end_s);
            let window = &trace.readings[lo..hi];
            if window.is_empty() {
                return Err(Error::EmptySegment {
                    start: seg.start_s,
                    end: seg.end_s,
                });
            }
            let mean = window.iter().map(|r| r.1).sum::<f64>() / window.len() as f64;
            Ok(PowerSample {
                color: seg.color(),
                watts: mean,
            })
        })
        .collect()
}

/// Simulates a measurement run: each color is shown for `seconds_per_color`
/// and the meter reports every `period_s` with multiplicative noise.
pub fn synthesize_trace(
    m: &PowerModel,
    palette: &[LinearRgb],
    seconds_per_color: f64,
    period_s: f64,
    noise_rel: f64,
    seed: u64,
) -> PowerTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_rel.max(0.0)).expect("finite noise level");
    let segments: Vec<Segment> = palette
        .iter()
        .enumerate()
        .map(|(i, c)| Segment {
            r: c.r,
            g: c.g,
            b: c.b,
            start_s: i as f64 * seconds_per_color,
            end_s: (i + 1) as f64 * seconds_per_color,
        })
        .collect();
    let total = palette.len() as f64 * seconds_per_color;
    let mut readings = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * period_s;
        if t >= total {
            break;
        }
        let seg = &segments[((t / seconds_per_color) as usize).min(segments.len() - 1)];
        let w = predict_power(m, seg.color()) * (1.0 + noise.sample(&mut rng));
        readings.push((t, w));
        k += 1;
    }
    PowerTrace { readings, segments }
}

pub fn write_trace<W: Write>(writer: W, trace: &PowerTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for &(t_seconds, watts) in &trace.readings {
        w.serialize(Reading { t_seconds, watts })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_segments<W: Write>(writer: W, trace: &PowerTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in &trace.segments {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
