//! Online-versus-batch comparison: standardized gaps at matched sample sizes
//! and paired frequency polygons on a shared bin grid.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::discrete::{fp_bin_width, overlap_coefficient, DiscreteDistribution, FrequencyPolygon};
use crate::engine::chain_record;
use crate::error::{Error, Result};
use crate::gibbs::ChainOutput;
use crate::linalg::Matrix;
use crate::output::f64_or_nan;
use crate::smc::SnapshotRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: u64,
    pub parameter: String,
    #[serde(deserialize_with = "f64_or_nan")]
    pub run_mean: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub reference_mean: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub reference_sd: f64,
    /// |run − reference| / reference sd.
    #[serde(deserialize_with = "f64_or_nan")]
    pub gap: f64,
    /// |run − reference| / sqrt(se_run² + se_reference²).
    #[serde(deserialize_with = "f64_or_nan")]
    pub z: f64,
}

/// Gaps at every sample size present in both streams, for every reference
/// parameter. A reference parameter missing from the run is an error.
pub fn compare_records(run: &[SnapshotRecord], reference: &[SnapshotRecord]) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for r in reference {
        let Some(a) = run.iter().rev().find(|a| a.n == r.n) else {
            continue;
        };
        for p in &r.params {
            let q = a
                .param(&p.name)
                .ok_or_else(|| Error::InvalidParameter(format!("parameter `{}` missing from run", p.name)))?;
            let diff = (q.mean - p.mean).abs();
            let ratio = |d: f64, s: f64| if d == 0.0 { 0.0 } else { d / s };
            rows.push(GapRow {
                n: r.n,
                parameter: p.name.clone(),
                run_mean: q.mean,
                reference_mean: p.mean,
                reference_sd: p.sd,
                gap: ratio(diff, p.sd),
                z: ratio(diff, (q.se * q.se + p.se * p.se).sqrt()),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no sample size shared by run and reference".into()));
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonPair {
    pub parameter: String,
    pub bin_width: f64,
    pub smc: FrequencyPolygon,
    pub mcmc: FrequencyPolygon,
    pub overlap: f64,
}

/// Polygons of a weighted particle posterior and batch draws, both binned with
/// the width the bin rule gives for the batch draws.
pub fn polygon_pair(parameter: &str, smc: &DiscreteDistribution, draws: &[f64]) -> Result<PolygonPair> {
    let h = fp_bin_width(draws)?;
    let lo = smc
        .atoms()
        .iter()
        .chain(draws)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let origin = (lo / h).floor() * h;
    let mcmc = DiscreteDistribution::uniform(draws.to_vec())?.frequency_polygon(h, origin)?;
    let smc_fp = smc.frequency_polygon(h, origin)?;
    let overlap = overlap_coefficient(&smc_fp, &mcmc)?;
    Ok(PolygonPair {
        parameter: parameter.into(),
        bin_width: h,
        smc: smc_fp,
        mcmc,
        overlap,
    })
}

/// A draws table: header of parameter names, one draw per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawsTable {
    pub names: Vec<String>,
    pub draws: Matrix,
}

impl DrawsTable {
    pub fn from_chain(chain: &ChainOutput, names: Vec<String>) -> Self {
        DrawsTable {
            names,
            draws: chain.draws.clone(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.draws.column(j))
    }

    /// Summary record of the draws at sample size `n`.
    pub fn record(&self, n: u64) -> Result<SnapshotRecord> {
        let chain = ChainOutput {
            draws: self.draws.clone(),
            n_warm: 0,
            n_kept: self.draws.rows(),
            upsilon: None,
            accept_rate: None,
        };
        chain_record(&chain, &self.names, n)
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Config(e.to_string());
        w.write_record(&self.names).map_err(err)?;
        for g in 0..self.draws.rows() {
            w.write_record(self.draws.row(g).iter().map(|v| v.to_string())).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let names: Vec<String> = r
            .headers()
            .map_err(|e| Error::Ingest {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(String::from)
            .collect();
        let mut draws = Matrix::with_cols(names.len());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Ingest {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let row = rec
                .iter()
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Ingest {
                        line,
                        message: format!("malformed number `{v}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            draws.push_row(&row)?;
        }
        Ok(DrawsTable { names, draws })
    }
}
