//! Aggregation of result tables into per-figure series.

use super::config::Method;
use super::experiment::TrialResult;
use super::metrics::to_db;
use crate::error::Result;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// Mean over trials of one (method, scenario, SNR, pilot count) point.
/// Means are taken on linear NMSE values and reported in dB.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: Method,
    pub scenario: String,
    pub snr_db: f64,
    pub n_pilots: usize,
    pub trials: usize,
    pub nmse_h_db: f64,
    pub nmse_cr_db: f64,
}

fn lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn aggregate(rows: &[TrialResult]) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(String, Method, i64, usize), Vec<&TrialResult>> = BTreeMap::new();
    for r in rows {
        let key = (r.scenario.clone(), r.method, (r.snr_db * 1000.0).round() as i64, r.n_pilots);
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, method, _, n_pilots), g)| {
            let n = g.len() as f64;
            CurvePoint {
                method,
                scenario,
                snr_db: g[0].snr_db,
                n_pilots,
                trials: g.len(),
                nmse_h_db: to_db(g.iter().map(|r| lin(r.nmse_h_db)).sum::<f64>() / n),
                nmse_cr_db: to_db(g.iter().map(|r| lin(r.nmse_cr_db)).sum::<f64>() / n),
            }
        })
        .collect()
}

pub fn write_curves<W: Write>(mut w: W, pts: &[CurvePoint]) -> Result<()> {
    writeln!(w, "method,scenario,snr_db,n_pilots,trials,nmse_h_db,nmse_cr_db")?;
    for p in pts {
        writeln!(
            w,
            "{},{},{:.3},{},{},{:.6},{:.6}",
            p.method, p.scenario, p.snr_db, p.n_pilots, p.trials, p.nmse_h_db, p.nmse_cr_db
        )?;
    }
    Ok(())
}
