//! Line-delimited JSON records for snapshots, reports and comparisons.
//!
//! Floats are written in shortest round-trip form, so parsing a record gives
//! back the exact values. Non-finite values are written as `null` and read
//! back as NaN.

use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize};

use crate::compare::{GapRow, PolygonPair};
use crate::error::{Error, Result};
use crate::smc::SnapshotRecord;
use crate::warmup::{ConvergenceRow, Verdict};

/// Reads a float that may have been written as `null`.
pub fn f64_or_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Snapshot(SnapshotRecord),
    Convergence(ConvergenceRow),
    Verdict {
        n_warm: usize,
        attempt: usize,
        #[serde(deserialize_with = "f64_or_nan")]
        max_gap: f64,
        threshold: f64,
        verdict: Verdict,
    },
    Gap(GapRow),
    Polygon(PolygonPair),
}

pub fn write_record<W: Write>(out: &mut W, record: &Record) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_snapshot<W: Write>(out: &mut W, record: &SnapshotRecord) -> Result<()> {
    write_record(out, &Record::Snapshot(record.clone()))
}

/// Parses every non-blank line.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Ingest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// The snapshot records of a record stream, in order.
pub fn snapshots(records: &[Record]) -> Vec<SnapshotRecord> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Snapshot(s) => Some(s.clone()),
            _ => None,
        })
        .collect()
}

/// Plot-ready table of convergence trajectories.
pub fn write_trajectory_table<W: Write>(out: &mut W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["n", "parameter", "smc_mean", "smc_lo", "smc_hi", "mcmc_mean", "mcmc_lo", "mcmc_hi"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.parameter.clone(),
            r.smc_mean.to_string(),
            r.smc_lo.to_string(),
            r.smc_hi.to_string(),
            r.mcmc_mean.to_string(),
            r.mcmc_lo.to_string(),
            r.mcmc_hi.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
