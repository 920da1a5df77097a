//! Internal (silhouette) and external (ARI, purity) clustering scores.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::result::NOISE;

/// What silhouette and purity do with points labeled [`NOISE`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePolicy {
    /// Drop noise points before scoring.
    #[default]
    #[serde(rename = "exclude")]
    ExcludeNoise,
    /// Treat all noise points as one more cluster.
    #[serde(rename = "as-cluster")]
    NoiseAsCluster,
}

impl NoisePolicy {
    pub fn tag(self) -> &'static str {
        match self {
            NoisePolicy::ExcludeNoise => "exclude",
            NoisePolicy::NoiseAsCluster => "as-cluster",
        }
    }

    fn keeps(self, label: i64) -> bool {
        label != NOISE || self == NoisePolicy::NoiseAsCluster
    }
}

impl fmt::Display for NoisePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NoisePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(NoisePolicy::ExcludeNoise),
            "as-cluster" => Ok(NoisePolicy::NoiseAsCluster),
            _ => Err(Error::InvalidArgument(format!("unknown noise policy `{s}`"))),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Maps arbitrary labels to `0..k` in order of first appearance.
fn dense_labels(labels: impl Iterator<Item = i64>) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

/// Mean silhouette coefficient, `None` when fewer than two clusters remain
/// after applying `policy`.
///
/// Points alone in their cluster score 0, as do points with `a = b = 0`.
pub fn silhouette(distances: &DistanceMatrix, labels: &[i64], policy: NoisePolicy) -> Result<Option<f64>> {
    check_lengths(distances.len(), labels.len())?;
    if labels.len() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least 2 samples".into()));
    }
    let kept: Vec<usize> = (0..labels.len()).filter(|&i| policy.keeps(labels[i])).collect();
    let (cluster, k) = dense_labels(kept.iter().map(|&i| labels[i]));
    if k < 2 {
        return Ok(None);
    }
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }

    let scores: Vec<f64> = (0..kept.len())
        .into_par_iter()
        .map(|a| {
            let own = cluster[a];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (b, &j) in kept.iter().enumerate() {
                sums[cluster[b]] += distances.get(kept[a], j);
            }
            let intra = sums[own] / (sizes[own] - 1) as f64;
            let nearest = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = intra.max(nearest);
            if denom > 0.0 {
                (nearest - intra) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(Some(scores.iter().sum::<f64>() / scores.len() as f64))
}

fn comb2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Adjusted Rand index. Noise is an ordinary class here.
///
/// When both partitions make the index degenerate (all singletons or a
/// single cluster each), returns 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(labels_true: &[i64], labels_pred: &[i64]) -> Result<f64> {
    check_lengths(labels_true.len(), labels_pred.len())?;
    let n = labels_true.len();
    if n < 2 {
        return Err(Error::InvalidArgument("ARI needs at least 2 samples".into()));
    }
    let (t, kt) = dense_labels(labels_true.iter().copied());
    let (p, kp) = dense_labels(labels_pred.iter().copied());
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut row = vec![0u64; kt];
    let mut col = vec![0u64; kp];
    for (&a, &b) in t.iter().zip(&p) {
        *table.entry((a, b)).or_default() += 1;
        row[a] += 1;
        col[b] += 1;
    }
    let index: i128 = table.values().map(|&c| comb2(c)).sum();
    let sum_rows: i128 = row.iter().map(|&c| comb2(c)).sum();
    let sum_cols: i128 = col.iter().map(|&c| comb2(c)).sum();
    let pairs = comb2(n as u64);

    // ARI scaled by 2·C(n,2) so that every term stays integral.
    let num = 2 * pairs * index - 2 * sum_rows * sum_cols;
    let den = pairs * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
    if den == 0 {
        let identical = table.len() == kt && kt == kp;
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

/// Fraction of retained points whose cluster's majority class is their class.
/// `None` when no point is retained.
pub fn purity(labels_true: &[i64], labels_pred: &[i64], policy: NoisePolicy) -> Result<Option<f64>> {
    check_lengths(labels_true.len(), labels_pred.len())?;
    let mut counts: HashMap<i64, HashMap<i64, usize>> = HashMap::new();
    let mut retained = 0usize;
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        if !policy.keeps(p) {
            continue;
        }
        *counts.entry(p).or_default().entry(t).or_default() += 1;
        retained += 1;
    }
    if retained == 0 {
        return Ok(None);
    }
    let majority: usize = counts
        .values()
        .map(|classes| classes.values().copied().max().unwrap_or(0))
        .sum();
    Ok(Some(majority as f64 / retained as f64))
}

/// Mean and standard error of the mean (sample std with ddof = 1, over √n).
pub fn mean_and_sem(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty sequence".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
