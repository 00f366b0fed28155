//! Load profile ingestion, exclusion rules and reduction to
//! `(energy, peak)` records.
//!
//! The interval length Δ is normalized to 1, so energy is measured in
//! kW·interval and `interval_minutes` is carried for provenance only.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of leading readings (one week of 15-minute data) that must not
/// all be zero.
pub const LEADING_WINDOW: usize = 672;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub customer_id: String,
    pub interval_minutes: u32,
    /// Load in kW, in timestamp order.
    pub readings: Vec<f64>,
}

impl LoadProfile {
    pub fn new(customer_id: impl Into<String>, interval_minutes: u32, readings: Vec<f64>) -> Result<Self> {
        if interval_minutes == 0 {
            return Err(Error::InvalidArgument("interval_minutes must be positive".into()));
        }
        Ok(Self {
            customer_id: customer_id.into(),
            interval_minutes,
            readings,
        })
    }
}

/// The reduced observation every fit consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub customer_id: String,
    /// Sum of readings, kW·interval.
    pub energy: f64,
    /// Maximum reading, kW.
    pub peak: f64,
}

impl CustomerRecord {
    pub fn new(customer_id: impl Into<String>, energy: f64, peak: f64) -> Self {
        Self {
            customer_id: customer_id.into(),
            energy,
            peak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Incomplete,
    Negative,
    LeadingZero,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped_incomplete: usize,
    pub dropped_negative: usize,
    pub dropped_leading_zero: usize,
    pub dropped_ids: Vec<(String, DropReason)>,
}

impl FilterReport {
    pub fn total(&self) -> usize {
        self.kept + self.dropped_incomplete + self.dropped_negative + self.dropped_leading_zero
    }
}

pub fn reduce_profile(profile: &LoadProfile) -> Result<CustomerRecord> {
    if profile.readings.is_empty() {
        return Err(Error::Empty("profile has no readings"));
    }
    let peak = profile.readings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let energy = profile.readings.iter().sum();
    Ok(CustomerRecord::new(profile.customer_id.clone(), energy, peak))
}

/// First rule that excludes the profile, checked in the order
/// incomplete, negative, leading-zero.
pub fn drop_reason(profile: &LoadProfile, expected_len: usize, leading_window: usize) -> Option<DropReason> {
    if profile.readings.len() != expected_len {
        Some(DropReason::Incomplete)
    } else if profile.readings.iter().any(|&r| r < 0.0) {
        Some(DropReason::Negative)
    } else if profile.readings[..leading_window].iter().all(|&r| r == 0.0) {
        Some(DropReason::LeadingZero)
    } else {
        None
    }
}

pub fn filter_profiles(
    profiles: Vec<LoadProfile>,
    expected_len: usize,
    leading_window: usize,
) -> Result<(Vec<LoadProfile>, FilterReport)> {
    if expected_len == 0 || leading_window == 0 || leading_window > expected_len {
        return Err(Error::InvalidArgument(format!(
            "need 0 < leading_window ({leading_window}) <= expected length ({expected_len})"
        )));
    }
    let mut report = FilterReport::default();
    let mut kept = Vec::with_capacity(profiles.len());
    for p in profiles {
        match drop_reason(&p, expected_len, leading_window) {
            None => {
                report.kept += 1;
                kept.push(p);
            }
            Some(reason) => {
                match reason {
                    DropReason::Incomplete => report.dropped_incomplete += 1,
                    DropReason::Negative => report.dropped_negative += 1,
                    DropReason::LeadingZero => report.dropped_leading_zero += 1,
                }
                report.dropped_ids.push((p.customer_id, reason));
            }
        }
    }
    Ok((kept, report))
}

/// Most common profile length; ties resolve to the longer length.
pub fn modal_length(profiles: &[LoadProfile]) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for p in profiles {
        *counts.entry(p.readings.len()).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(len, _)| len)
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| Error::Schema {
        row,
        column: column.to_string(),
        message: format!("'{value}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Schema {
            row,
            column: column.to_string(),
            message: format!("'{value}' is not finite"),
        });
    }
    Ok(v)
}

/// Reads the profile CSV: `customer_id,interval_minutes,r_0,...,r_{T-1}`.
///
/// Rows are numbered from 1 for the first data row. Rows may be shorter
/// than the header (incomplete profiles) but not longer.
pub fn ingest_csv<R: Read>(reader: R) -> Result<Vec<LoadProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    let schema = |column: &str, message: String| Error::Schema {
        row: 0,
        column: column.to_string(),
        message,
    };
    if header.len() < 2 || &header[0] != "customer_id" || &header[1] != "interval_minutes" {
        return Err(schema(
            header.get(0).unwrap_or(""),
            "header must start with customer_id,interval_minutes".into(),
        ));
    }
    for (t, name) in header.iter().skip(2).enumerate() {
        if name != format!("r_{t}") {
            return Err(schema(name, format!("expected column r_{t}")));
        }
    }

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Schema {
                row,
                column: "interval_minutes".into(),
                message: "missing field".into(),
            });
        }
        if rec.len() > header.len() {
            return Err(Error::Schema {
                row,
                column: format!("#{}", header.len() + 1),
                message: "more fields than header columns".into(),
            });
        }
        let interval: u32 = rec[1].trim().parse().ok().filter(|&v| v > 0).ok_or_else(|| Error::Schema {
            row,
            column: "interval_minutes".into(),
            message: format!("'{}' is not a positive integer", &rec[1]),
        })?;
        let readings = rec
            .iter()
            .enumerate()
            .skip(2)
            .filter(|(_, cell)| !cell.trim().is_empty())
            .map(|(j, cell)| parse_cell(cell, row, &header[j]))
            .collect::<Result<Vec<f64>>>()?;
        out.push(LoadProfile::new(&rec[0], interval, readings)?);
    }
    Ok(out)
}

pub fn write_profiles_csv<W: Write>(writer: W, profiles: &[LoadProfile]) -> Result<()> {
    let width = profiles.iter().map(|p| p.readings.len()).max().unwrap_or(0);
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let mut header = vec!["customer_id".to_string(), "interval_minutes".to_string()];
    header.extend((0..width).map(|t| format!("r_{t}")));
    wtr.write_record(&header)?;
    for p in profiles {
        let mut row = vec![p.customer_id.clone(), p.interval_minutes.to_string()];
        row.extend(p.readings.iter().map(|r| r.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the record CSV: `customer_id,energy,peak`.
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<CustomerRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["customer_id", "energy", "peak"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Schema {
            row: 0,
            column: header.iter().collect::<Vec<_>>().join(","),
            message: "header must be customer_id,energy,peak".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Schema {
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        let energy = parse_cell(&rec[1], row, "energy")?;
        let peak = parse_cell(&rec[2], row, "peak")?;
        out.push(CustomerRecord::new(&rec[0], energy, peak));
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(writer: W, records: &[CustomerRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["customer_id", "energy", "peak"])?;
    for r in records {
        wtr.write_record([r.customer_id.clone(), r.energy.to_string(), r.peak.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
