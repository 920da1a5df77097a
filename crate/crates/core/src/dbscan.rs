//! DBSCAN over a precomputed distance matrix.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::distance::{pairwise_distances, DistanceMatrix};
use crate::error::{Error, Result};
use crate::result::{Algorithm, ClusteringResult, NOISE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanConfig {
    /// Closed neighborhood radius.
    pub eps: f64,
    /// Neighborhood size, the point itself included, that makes a core point.
    pub min_samples: usize,
}

impl DbscanConfig {
    pub const DEFAULT_MIN_SAMPLES: usize = 5;

    pub fn new(eps: f64) -> Self {
        DbscanConfig {
            eps,
            min_samples: Self::DEFAULT_MIN_SAMPLES,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps = {} must be positive", self.eps)));
        }
        if self.min_samples == 0 {
            return Err(Error::InvalidArgument("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Indices within `eps` of each point, itself included, ascending.
fn neighborhoods(distances: &DistanceMatrix, eps: f64) -> Vec<Vec<usize>> {
    let n = distances.len();
    (0..n)
        .map(|i| (0..n).filter(|&j| distances.get(i, j) <= eps).collect())
        .collect()
}

pub fn core_mask(distances: &DistanceMatrix, config: &DbscanConfig) -> Result<Vec<bool>> {
    config.validate()?;
    Ok(neighborhoods(distances, config.eps)
        .iter()
        .map(|nb| nb.len() >= config.min_samples)
        .collect())
}

pub fn fit_precomputed(distances: &DistanceMatrix, config: &DbscanConfig) -> Result<ClusteringResult> {
    config.validate()?;
    let n = distances.len();
    if n == 0 {
        return Err(Error::InvalidDataset("DBSCAN needs a non-empty dataset".into()));
    }
    let neighbors = neighborhoods(distances, config.eps);
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= config.min_samples).collect();

    let mut labels = vec![NOISE; n];
    let mut next_label = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        labels[seed] = next_label;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] != NOISE {
                    continue;
                }
                labels[q] = next_label;
                if core[q] {
                    queue.push_back(q);
                }
            }
        }
        next_label += 1;
    }

    Ok(ClusteringResult::new(labels, Algorithm::Dbscan)?
        .with_param("eps", config.eps)
        .with_param("min_samples", config.min_samples as f64))
}

pub fn fit(dataset: &EmbeddingDataset, config: &DbscanConfig) -> Result<ClusteringResult> {
    if dataset.n_samples() == 0 {
        return Err(Error::InvalidDataset("DBSCAN needs a non-empty dataset".into()));
    }
    if dataset.n_samples() == 1 {
        config.validate()?;
        let label = if config.min_samples <= 1 { 0 } else { NOISE };
        return Ok(ClusteringResult::new(vec![label], Algorithm::Dbscan)?
            .with_param("eps", config.eps)
            .with_param("min_samples", config.min_samples as f64));
    }
    fit_precomputed(&pairwise_distances(dataset)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>]) -> EmbeddingDataset {
        EmbeddingDataset::from_rows(rows, vec![1; rows.len()]).unwrap()
    }

    #[test]
    fn sparse_points_are_noise() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 10.0]).collect();
        let cfg = DbscanConfig { eps: 1.0, min_samples: 2 };
        let r = fit(&ds(&rows), &cfg).unwrap();
        assert_eq!(r.n_clusters(), 0);
        assert_eq!(r.count_noise(), 6);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let rows = vec![vec![1.0, 2.0]; 7];
        let r = fit(&ds(&rows), &DbscanConfig { eps: 0.1, min_samples: 7 }).unwrap();
        assert_eq!(r.n_clusters(), 1);
        assert_eq!(r.count_noise(), 0);
    }

    #[test]
    fn two_blobs() {
        let offsets = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [-0.1, 0.0], [0.0, -0.1]];
        let mut rows = Vec::new();
        for c in [0.0, 10.0] {
            for o in offsets {
                rows.push(vec![c + o[0], o[1]]);
            }
        }
        let r = fit(&ds(&rows), &DbscanConfig::new(0.5)).unwrap();
        assert_eq!(r.n_clusters(), 2);
        assert_eq!(r.count_noise(), 0);
        assert_eq!(r.labels(), [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // Cores at 0 and 2 (each with 3 points), border at 1 reachable from both.
        let rows: Vec<Vec<f64>> = [-0.6, -0.3, 0.0, 1.0, 2.0, 2.3, 2.6]
            .iter()
            .map(|&x| vec![x])
            .collect();
        let r = fit(&ds(&rows), &DbscanConfig { eps: 1.0, min_samples: 4 }).unwrap();
        // 1.0 has neighbors {0.0, 1.0, 2.0}: border, claimed by the first cluster.
        assert_eq!(r.labels(), [0, 0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn rejects_bad_config() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(fit(&ds(&rows), &DbscanConfig { eps: 0.0, min_samples: 2 }).is_err());
        assert!(fit(&ds(&rows), &DbscanConfig { eps: 1.0, min_samples: 0 }).is_err());
    }

    #[test]
    fn single_point() {
        let r = fit(&ds(&[vec![0.0]]), &DbscanConfig { eps: 1.0, min_samples: 1 }).unwrap();
        assert_eq!(r.labels(), [0]);
    }
}
