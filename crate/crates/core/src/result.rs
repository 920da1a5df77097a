use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label given to points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    SingleLinkage,
    Dbscan,
    Hdbscan,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Kmeans,
        Algorithm::SingleLinkage,
        Algorithm::Dbscan,
        Algorithm::Hdbscan,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::SingleLinkage => "single_linkage",
            Algorithm::Dbscan => "dbscan",
            Algorithm::Hdbscan => "hdbscan",
        }
    }

    /// Name of the swept hyperparameter.
    pub fn grid_param(self) -> &'static str {
        match self {
            Algorithm::Kmeans | Algorithm::SingleLinkage => "n_clusters",
            Algorithm::Dbscan => "eps",
            Algorithm::Hdbscan => "min_cluster_size",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// Flat clustering of a dataset: one label per sample, [`NOISE`] for outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    labels: Vec<i64>,
    n_clusters: usize,
    algorithm: Algorithm,
    params: BTreeMap<String, f64>,
}

impl ClusteringResult {
    /// Validates that cluster ids are exactly `0..C` and noise is `-1`.
    pub fn new(labels: Vec<i64>, algorithm: Algorithm) -> Result<Self> {
        let distinct: BTreeSet<i64> = labels.iter().copied().filter(|&l| l != NOISE).collect();
        if let Some(&bad) = distinct.iter().find(|&&l| l < 0) {
            return Err(Error::InvalidArgument(format!("invalid cluster label {bad}")));
        }
        let n_clusters = distinct.len();
        if distinct.last().is_some_and(|&max| max as usize != n_clusters - 1) {
            return Err(Error::InvalidArgument(
                "cluster labels must be contiguous from 0".into(),
            ));
        }
        Ok(ClusteringResult {
            labels,
            n_clusters,
            algorithm,
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<i64> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn count_noise(&self) -> usize {
        count_noise(&self.labels)
    }

    /// Members of each cluster, indexed by label.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE {
                out[l as usize].push(i);
            }
        }
        out
    }
}

pub fn count_noise(labels: &[i64]) -> usize {
    labels.iter().filter(|&&l| l == NOISE).count()
}

/// Relabels components so that ids follow the order of first appearance.
pub(crate) fn relabel_by_first_member(raw: &[usize]) -> Vec<i64> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|&r| {
            let next = map.len() as i64;
            *map.entry(r).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_noise() {
        let all_noise = ClusteringResult::new(vec![NOISE; 7], Algorithm::Dbscan).unwrap();
        assert_eq!(all_noise.count_noise(), 7);
        assert_eq!(all_noise.n_clusters(), 0);
        let none = ClusteringResult::new(vec![0, 1, 1, 2], Algorithm::Dbscan).unwrap();
        assert_eq!(none.count_noise(), 0);
        assert_eq!(none.n_clusters(), 3);
    }

    #[test]
    fn rejects_gapped_labels() {
        assert!(ClusteringResult::new(vec![0, 2], Algorithm::Kmeans).is_err());
        assert!(ClusteringResult::new(vec![0, -3], Algorithm::Kmeans).is_err());
    }

    #[test]
    fn first_member_numbering() {
        assert_eq!(relabel_by_first_member(&[7, 7, 2, 9, 2]), [0, 0, 1, 2, 1]);
    }
}
