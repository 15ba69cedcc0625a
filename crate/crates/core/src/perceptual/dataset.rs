//! CSV files for threshold data.
//!
//! Raw records: `participant,direction,ecc_deg,k_lm,k_s,threshold`
//! Processed samples: `k_lm,k_s,ecc_deg,alpha_lm,alpha_s`

use std::io::{Read, Write};

use serde::de::DeserializeOwned;

use super::{RawThresholdRecord, ThresholdSample};
use crate::error::{Error, Result};

pub const RAW_HEADER: [&str; 6] = ["participant", "direction", "ecc_deg", "k_lm", "k_s", "threshold"];
pub const SAMPLE_HEADER: [&str; 5] = ["k_lm", "k_s", "ecc_deg", "alpha_lm", "alpha_s"];

fn read_rows<T: DeserializeOwned, R: Read>(reader: R, name: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::parse(
            name,
            1,
            format!("expected header '{}', found '{}'", header.join(","), found.join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: T = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(name, line, e.to_string())
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_raw_records<R: Read>(reader: R, name: &str) -> Result<Vec<RawThresholdRecord>> {
    read_rows(reader, name, &RAW_HEADER)
}

pub fn read_samples<R: Read>(reader: R, name: &str) -> Result<Vec<ThresholdSample>> {
    let rows: Vec<ThresholdSample> = read_rows(reader, name, &SAMPLE_HEADER)?;
    for (i, s) in rows.iter().enumerate() {
        if !(s.alpha_lm > 0.0 && s.alpha_s > 0.0) {
            return Err(Error::parse(name, i + 2, "thresholds must be positive"));
        }
    }
    Ok(rows)
}

pub fn write_raw_records<W: Write>(writer: W, records: &[RawThresholdRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_samples<W: Write>(writer: W, samples: &[ThresholdSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
