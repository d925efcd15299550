//! The two-criterion Same/Different rule.
//!
//! A pair is Same only when the mean of its per-fold maxima is within two
//! RAD standard deviations of the chance mean *and* no single fold reached
//! the finite-sampling threshold. Both comparisons are strict.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discriminator::FoldAccuracies;
use crate::error::{Error, Result};
use crate::rad::{rad_zscore, RadModel, ThresholdSpec};

/// z-score at or above which a pair is Different.
pub const DEFAULT_Z_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Same,
    Different,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Same => "Same",
            Verdict::Different => "Different",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair_id: String,
    pub region_a: String,
    pub region_b: String,
    pub verdict: Verdict,
    pub z: f64,
    pub max_observed: f64,
    pub threshold_accuracy: f64,
    pub n_test: usize,
    pub k_epochs: usize,
}

pub fn classify_pair(acc: &FoldAccuracies, rad: &RadModel, thr: &ThresholdSpec) -> Result<PairVerdict> {
    classify_pair_with(acc, rad, thr, DEFAULT_Z_THRESHOLD)
}

pub fn classify_pair_with(
    acc: &FoldAccuracies,
    rad: &RadModel,
    thr: &ThresholdSpec,
    z_threshold: f64,
) -> Result<PairVerdict> {
    if acc.n_test != rad.n_test {
        return Err(Error::TestSizeMismatch {
            acc: acc.n_test,
            model: rad.n_test,
        });
    }
    if thr.n_test != rad.n_test || thr.k_epochs != rad.k_epochs {
        return Err(Error::Invalid(format!(
            "threshold built for (n={}, k={}) but RAD model is (n={}, k={})",
            thr.n_test, thr.k_epochs, rad.n_test, rad.k_epochs
        )));
    }
    if acc.max_val_accuracies.is_empty() {
        return Err(Error::Invalid(format!("{}: no fold accuracies", acc.pair_id)));
    }
    let z = rad_zscore(acc.mean(), rad)?;
    let max_observed = acc.max();
    let same = z < z_threshold && max_observed < thr.threshold_accuracy;
    Ok(PairVerdict {
        pair_id: acc.pair_id.clone(),
        region_a: acc.region_a.clone(),
        region_b: acc.region_b.clone(),
        verdict: if same { Verdict::Same } else { Verdict::Different },
        z,
        max_observed,
        threshold_accuracy: thr.threshold_accuracy,
        n_test: rad.n_test,
        k_epochs: rad.k_epochs,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct VerdictRow {
    pair_id: String,
    region_a: String,
    region_b: String,
    verdict: Verdict,
    z: f64,
    max_observed: f64,
    threshold: f64,
}

/// Write the verdict table, sorted by pair id so the file does not depend
/// on evaluation order.
pub fn write_verdicts(verdicts: &[PairVerdict], path: &Path) -> Result<()> {
    let mut sorted: Vec<&PairVerdict> = verdicts.iter().collect();
    sorted.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for v in sorted {
        w.serialize(VerdictRow {
            pair_id: v.pair_id.clone(),
            region_a: v.region_a.clone(),
            region_b: v.region_b.clone(),
            verdict: v.verdict,
            z: v.z,
            max_observed: v.max_observed,
            threshold: v.threshold_accuracy,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a verdict table. The RAD parameters are not part of the CSV, so
/// `n_test` and `k_epochs` come back as zero.
pub fn read_verdicts(path: &Path) -> Result<Vec<PairVerdict>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize::<VerdictRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::csv(path, e))?;
            Ok(PairVerdict {
                pair_id: row.pair_id,
                region_a: row.region_a,
                region_b: row.region_b,
                verdict: row.verdict,
                z: row.z,
                max_observed: row.max_observed,
                threshold_accuracy: row.threshold,
                n_test: 0,
                k_epochs: 0,
            })
        })
        .collect()
}
