//! Surface-roughness baseline and classification metrics.
//!
//! The baseline treats each patch's height standard deviation as a scalar
//! roughness and calls two regions Same when a rank-sum test cannot tell
//! their roughness samples apart at a Bonferroni-corrected level.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::decision::Verdict;
use crate::discriminator::pair_id;
use crate::error::{Error, Result};
use crate::heightmap::PatchSet;
use crate::par::Exec;

/// Combined sample size up to which the rank-sum p-value is exact.
pub const EXACT_LIMIT: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        idx[i..j].iter().for_each(|&k| ranks[k] = r);
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Invalid("rank-sum test needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("rank-sum test got a non-finite value".into()));
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum p-value: exact for combined size up to
/// [`EXACT_LIMIT`], normal approximation above.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() + y.len() <= EXACT_LIMIT {
        wilcoxon_exact(x, y)
    } else {
        wilcoxon_normal(x, y)
    }
}

/// Exact permutation p-value, twice the smaller one-sided tail, capped at 1.
///
/// Midranks are doubled so every rank is an integer, and the null
/// distribution of the rank sum of `x` is counted by dynamic programming
/// over subsets of size `|x|`.
pub fn wilcoxon_exact(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&all);
    if ties.len() == 1 {
        return Ok(1.0);
    }
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let n1 = x.len();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s, as f64 counts
    // normalized at the end; binomial counts stay exact in f64 well past
    // the sizes this is used for
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let observed: usize = doubled[..n1].iter().sum();
    let lower: f64 = ways[n1][..=observed].iter().sum::<f64>() / total;
    let upper: f64 = ways[n1][observed..].iter().sum::<f64>() / total;
    Ok((2.0 * lower.min(upper)).min(1.0))
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn wilcoxon_normal(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&all);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let n = n1 + n2;
    let w: f64 = ranks[..x.len()].iter().sum();
    let mean = n1 * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::standard();
    Ok((2.0 * std_normal.sf(z)).min(1.0))
}

/// Per-patch height standard deviations of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughnessProfile {
    pub region_id: String,
    pub stds: Vec<f64>,
}

/// Roughness over the full detrended square of every patch. The octagon
/// mask only matters for the oriented classifier inputs, not for a scalar.
pub fn roughness_profile(set: &PatchSet) -> RoughnessProfile {
    RoughnessProfile {
        region_id: set.region_id.clone(),
        stds: set.patches.iter().map(|p| crate::numeric::std_dev(&p.raw)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughnessVerdict {
    pub pair_id: String,
    pub region_a: String,
    pub region_b: String,
    pub p_value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// All-pairs rank-sum tests at the Bonferroni level `alpha / pairs`;
/// `p > level` means Same. Rows come back sorted by pair id.
pub fn roughness_verdicts(profiles: &[RoughnessProfile], alpha: f64, exec: Exec) -> Result<Vec<RoughnessVerdict>> {
    if profiles.len() < 2 {
        return Err(Error::Invalid("roughness baseline needs at least two regions".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha {alpha} not in (0, 1)")));
    }
    let mut pairs = Vec::new();
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            pairs.push((i, j));
        }
    }
    let threshold = alpha / pairs.len() as f64;
    let rows = exec.map(&pairs, |&(i, j)| {
        let (a, b) = (&profiles[i], &profiles[j]);
        let p = wilcoxon_rank_sum(&a.stds, &b.stds)?;
        let (lo, hi) = if a.region_id <= b.region_id { (a, b) } else { (b, a) };
        Ok(RoughnessVerdict {
            pair_id: pair_id(&a.region_id, &b.region_id),
            region_a: lo.region_id.clone(),
            region_b: hi.region_id.clone(),
            p_value: p,
            threshold,
            verdict: if p > threshold {
                Verdict::Same
            } else {
                Verdict::Different
            },
        })
    });
    let mut rows: Vec<RoughnessVerdict> = rows.into_iter().collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    Ok(rows)
}

pub fn write_roughness_verdicts(rows: &[RoughnessVerdict], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_roughness_verdicts(path: &Path) -> Result<Vec<RoughnessVerdict>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Precision, recall and F1 of one class; `None` where a denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl ClassMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        ClassMetrics { precision, recall, f1 }
    }
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub same: ClassMetrics,
    pub different: ClassMetrics,
    /// Mean over the classes whose value is defined.
    pub macro_avg: ClassMetrics,
    /// Names of values left out of the macro average.
    pub flags: Vec<String>,
}

/// Per-class and macro metrics, each class taken as the positive class in
/// turn.
pub fn classification_metrics(method: &str, predicted: &[Verdict], actual: &[Verdict]) -> Result<MetricsRow> {
    if predicted.len() != actual.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} ground-truth pairs",
            predicted.len(),
            actual.len()
        )));
    }
    let class = |pos: Verdict| {
        let mut c = (0, 0, 0);
        for (p, a) in predicted.iter().zip(actual) {
            match (*p == pos, *a == pos) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                _ => {}
            }
        }
        ClassMetrics::from_counts(c.0, c.1, c.2)
    };
    let (same, different) = (class(Verdict::Same), class(Verdict::Different));
    let mut flags = Vec::new();
    let mut avg = |name: &str, a: Option<f64>, b: Option<f64>| {
        for (cls, v) in [("same", a), ("different", b)] {
            if v.is_none() {
                flags.push(format!("{cls}_{name}"));
            }
        }
        let vals: Vec<f64> = [a, b].into_iter().flatten().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let macro_avg = ClassMetrics {
        precision: avg("precision", same.precision, different.precision),
        recall: avg("recall", same.recall, different.recall),
        f1: avg("f1", same.f1, different.f1),
    };
    Ok(MetricsRow {
        method: method.to_string(),
        same,
        different,
        macro_avg,
        flags,
    })
}

/// Metrics CSV: method, then precision/recall/F1 for same, different and
/// the macro average. Undefined values are empty cells.
pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = [
        "method",
        "same_precision",
        "same_recall",
        "same_f1",
        "different_precision",
        "different_recall",
        "different_f1",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "flags",
    ];
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        let mut rec = vec![r.method.clone()];
        for m in [&r.same, &r.different, &r.macro_avg] {
            rec.extend([cell(m.precision), cell(m.recall), cell(m.f1)]);
        }
        rec.push(r.flags.join(";"));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
