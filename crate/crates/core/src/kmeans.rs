//! Lloyd's algorithm with k-means++ seeding.
//!
//! Randomness comes from [`ChaCha8Rng`] seeded with
//! `SeedableRng::seed_from_u64(seed)`. ChaCha8 is a portable stream cipher, so
//! a given seed yields the same centroids on every platform. The first centroid
//! index is drawn with `gen_range(0..n)`; each D² draw consumes one
//! `gen::<f64>()` (53 random mantissa bits in `[0, 1)`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingDataset, Matrix};
use crate::distance::squared_euclidean;
use crate::error::{Error, Result};
use crate::result::{Algorithm, ClusteringResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl KMeansConfig {
    pub const DEFAULT_MAX_ITER: usize = 300;
    pub const DEFAULT_TOL: f64 = 1e-4;

    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iter: Self::DEFAULT_MAX_ITER,
            seed,
            tol: Self::DEFAULT_TOL,
        }
    }

    fn validate(&self, n_samples: usize) -> Result<()> {
        if self.k == 0 || self.k > n_samples {
            return Err(Error::InvalidArgument(format!(
                "k = {} must be in 1..={n_samples}",
                self.k
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidArgument(format!("tol = {} must be >= 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub n_iter: usize,
}

/// Row indices picked by D² sampling.
pub(crate) fn kmeanspp_indices(data: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_euclidean(data.row(i), data.row(first)))
        .collect();

    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Every remaining row duplicates a chosen centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(squared_euclidean(data.row(i), data.row(next)));
        }
    }
    Ok(chosen)
}

/// k-means++ initial centroids.
pub fn kmeanspp_init(dataset: &EmbeddingDataset, k: usize, seed: u64) -> Result<Matrix> {
    let data = dataset.matrix();
    let idx = kmeanspp_indices(data, k, seed)?;
    let mut centroids = Matrix::zeros(k, data.ncols());
    for (c, &i) in idx.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(data.row(i));
    }
    Ok(centroids)
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia(dataset: &EmbeddingDataset, centroids: &Matrix, labels: &[usize]) -> Result<f64> {
    let data = dataset.matrix();
    if labels.len() != data.nrows() {
        return Err(Error::DimensionMismatch {
            expected: data.nrows(),
            found: labels.len(),
        });
    }
    if centroids.ncols() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            found: centroids.ncols(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= centroids.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {} centroids",
            centroids.nrows()
        )));
    }
    Ok(inertia_unchecked(data, centroids, labels))
}

fn inertia_unchecked(data: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_euclidean(data.row(i), centroids.row(l)))
        .sum()
}

/// Nearest centroid per point, ties to the lowest index.
fn assign(data: &Matrix, centroids: &Matrix, labels: &mut [usize], counts: &mut [usize]) {
    counts.iter_mut().for_each(|c| *c = 0);
    for (i, label) in labels.iter_mut().enumerate() {
        let x = data.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.nrows() {
            let d = squared_euclidean(x, centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *label = best;
        counts[best] += 1;
    }
}

/// Gives every empty cluster the point farthest from its own centroid.
fn repair_empty(data: &Matrix, centroids: &mut Matrix, labels: &mut [usize], counts: &mut [usize]) {
    for empty in 0..counts.len() {
        if counts[empty] != 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = squared_euclidean(data.row(i), centroids.row(l));
            if d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        let p = far.expect("k <= n leaves a cluster with two or more members");
        counts[labels[p]] -= 1;
        labels[p] = empty;
        counts[empty] = 1;
        centroids.row_mut(empty).copy_from_slice(data.row(p));
    }
}

fn update_means(data: &Matrix, labels: &[usize], counts: &[usize], k: usize) -> Matrix {
    let mut means = Matrix::zeros(k, data.ncols());
    for (i, &l) in labels.iter().enumerate() {
        for (m, x) in means.row_mut(l).iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        let count = count as f64;
        means.row_mut(c).iter_mut().for_each(|m| *m /= count);
    }
    means
}

struct Trace {
    model: KMeansModel,
    labels: Vec<usize>,
    /// Inertia after each assignment step.
    #[cfg_attr(not(test), allow(dead_code))]
    history: Vec<f64>,
}

fn lloyd(dataset: &EmbeddingDataset, config: &KMeansConfig) -> Result<Trace> {
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::InvalidDataset("k-means needs a non-empty dataset".into()));
    }
    config.validate(n)?;
    let data = dataset.matrix();
    let k = config.k;

    let mut centroids = kmeanspp_init(dataset, k, config.seed)?;
    let mut labels = vec![0; n];
    let mut counts = vec![0; k];
    let mut history = Vec::new();
    let mut n_iter = 0;
    loop {
        assign(data, &centroids, &mut labels, &mut counts);
        repair_empty(data, &mut centroids, &mut labels, &mut counts);
        history.push(inertia_unchecked(data, &centroids, &labels));
        n_iter += 1;

        let means = update_means(data, &labels, &counts, k);
        let shift = (0..k)
            .map(|c| squared_euclidean(means.row(c), centroids.row(c)))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = means;
        if shift < config.tol || n_iter >= config.max_iter {
            break;
        }
    }
    assign(data, &centroids, &mut labels, &mut counts);
    repair_empty(data, &mut centroids, &mut labels, &mut counts);
    let inertia = inertia_unchecked(data, &centroids, &labels);
    history.push(inertia);

    Ok(Trace {
        model: KMeansModel {
            centroids,
            inertia,
            n_iter,
        },
        labels,
        history,
    })
}

pub fn fit(dataset: &EmbeddingDataset, config: &KMeansConfig) -> Result<(KMeansModel, ClusteringResult)> {
    let trace = lloyd(dataset, config)?;
    let labels = trace.labels.iter().map(|&l| l as i64).collect();
    let result = ClusteringResult::new(labels, Algorithm::Kmeans)?
        .with_param("n_clusters", config.k as f64)
        .with_param("seed", config.seed as f64)
        .with_param("max_iter", config.max_iter as f64)
        .with_param("tol", config.tol);
    Ok((trace.model, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ds(rows: &[Vec<f64>]) -> EmbeddingDataset {
        EmbeddingDataset::from_rows(rows, vec![1; rows.len()]).unwrap()
    }

    fn line(xs: &[f64]) -> EmbeddingDataset {
        ds(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>())
    }

    #[test]
    fn k_equals_n_picks_every_row() {
        let data = ds(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![5.0, -1.0], vec![9.0, 9.0], vec![0.5, 0.5]]);
        for seed in 0..20 {
            let mut idx = kmeanspp_indices(data.matrix(), 5, seed).unwrap();
            idx.sort_unstable();
            assert_eq!(idx, [0, 1, 2, 3, 4]);
        }
        // duplicates still yield distinct rows
        let dup = line(&[1.0, 1.0, 1.0, 2.0]);
        let mut idx = kmeanspp_indices(dup.matrix(), 4, 9).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, [0, 1, 2, 3]);
    }

    #[test]
    fn k_one_picks_a_row() {
        let data = line(&[3.0, 4.0, 5.0]);
        let c = kmeanspp_init(&data, 1, 42).unwrap();
        assert!([3.0, 4.0, 5.0].contains(&c.get(0, 0)));
        assert!(kmeanspp_init(&data, 4, 42).is_err());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let data = line(&[0.0, 1.0, 2.0, 10.0, 11.0, 30.0]);
        for seed in 0..10 {
            assert_eq!(kmeanspp_init(&data, 3, seed).unwrap(), kmeanspp_init(&data, 3, seed).unwrap());
        }
    }

    #[test]
    fn second_centroid_prefers_opposite_pair() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![100.0, 0.0], vec![100.0, 1.0]];
        let data = ds(&pts);
        let group = |i: usize| i / 2;

        // Exact D² probability, averaged over the uniform first pick.
        let mut exact = 0.0;
        for first in 0..4 {
            let w: Vec<f64> = (0..4).map(|i| squared_euclidean(&pts[i], &pts[first])).collect();
            let total: f64 = w.iter().sum();
            let opposite: f64 = (0..4).filter(|&i| group(i) != group(first)).map(|i| w[i]).sum();
            exact += opposite / total / 4.0;
        }
        assert!(exact > 0.9999);

        let hits = (0..1000u64)
            .filter(|&seed| {
                let idx = kmeanspp_indices(data.matrix(), 2, seed).unwrap();
                group(idx[0]) != group(idx[1])
            })
            .count();
        assert!(hits as f64 / 1000.0 >= 0.99, "hits = {hits}");
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let data = line(&[0.0, 3.0, 7.0, 8.0]);
        let (model, result) = fit(&data, &KMeansConfig::new(4, 1)).unwrap();
        assert_eq!(model.inertia, 0.0);
        assert_eq!(result.n_clusters(), 4);
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let data = ds(&[vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]]);
        let (model, result) = fit(&data, &KMeansConfig::new(1, 5)).unwrap();
        assert_eq!(model.centroids.row(0), [2.0, 2.0]);
        // (4+4) + (0+4) + (4+0)
        assert!((model.inertia - 16.0).abs() < 1e-12);
        assert!(result.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn two_pairs_on_a_line() {
        // Brute force over all 2-partitions of {0, 1, 10, 11}: {0,1}|{10,11} costs 0.5 + 0.5.
        let xs = [0.0, 1.0, 10.0, 11.0];
        let mut best = f64::INFINITY;
        for mask in 1u32..15 {
            let cost: f64 = [true, false]
                .iter()
                .map(|&side| {
                    let members: Vec<f64> = (0..4).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| xs[i]).collect();
                    let m = members.iter().sum::<f64>() / members.len() as f64;
                    members.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                })
                .sum();
            best = best.min(cost);
        }
        assert_eq!(best, 1.0);

        for seed in 1..=10 {
            let (model, result) = fit(&line(&xs), &KMeansConfig::new(2, seed)).unwrap();
            assert_eq!(model.inertia, best);
            let l = result.labels();
            assert_eq!(l[0], l[1]);
            assert_eq!(l[2], l[3]);
            assert_ne!(l[0], l[2]);
        }
    }

    #[test]
    fn inertia_definition() {
        let data = line(&[1.0, 5.0]);
        let centroids = Matrix::new(vec![1.0, 3.0], 2, 1).unwrap();
        assert_eq!(inertia(&data, &centroids, &[0, 1]).unwrap(), 4.0);
        let exact = Matrix::new(vec![1.0, 5.0], 2, 1).unwrap();
        assert_eq!(inertia(&data, &exact, &[0, 1]).unwrap(), 0.0);
        assert!(inertia(&data, &exact, &[0, 2]).is_err());
    }

    #[test]
    fn inertia_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let data = ds(&rows);
        let cent: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..20).map(|_| rng.gen_range(0..3)).collect();
        let mut want = 0.0;
        for i in 0..20 {
            for j in 0..4 {
                want += (rows[i][j] - cent[labels[i]][j]).powi(2);
            }
        }
        let got = inertia(&data, &Matrix::from_rows(&cent).unwrap(), &labels).unwrap();
        assert!((got - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn rejects_invalid_config() {
        let data = line(&[1.0, 2.0]);
        assert!(fit(&data, &KMeansConfig::new(0, 1)).is_err());
        assert!(fit(&data, &KMeansConfig::new(3, 1)).is_err());
        let mut cfg = KMeansConfig::new(1, 1);
        cfg.max_iter = 0;
        assert!(fit(&data, &cfg).is_err());
    }

    #[test]
    fn duplicate_points_keep_every_cluster_non_empty() {
        let data = line(&[1.0, 1.0, 1.0, 1.0, 2.0]);
        for seed in 0..20 {
            let (model, result) = fit(&data, &KMeansConfig::new(3, seed)).unwrap();
            assert_eq!(result.n_clusters(), 3);
            assert!(result.clusters().iter().all(|c| !c.is_empty()));
            assert_eq!(model.inertia, 0.0);
        }
    }

    fn blobs() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, u64)> {
        (4usize..30, 1usize..4, any::<u64>()).prop_flat_map(|(n, d, seed)| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n),
                1usize..=n.min(6),
                Just(seed),
            )
        })
    }

    proptest! {
        #[test]
        fn lloyd_invariants((rows, k, seed) in blobs()) {
            let data = ds(&rows);
            let cfg = KMeansConfig::new(k, seed);
            let trace = lloyd(&data, &cfg).unwrap();
            for w in trace.history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", trace.history);
            }
            prop_assert!(trace.model.n_iter <= cfg.max_iter);
            let mut counts = vec![0; k];
            for &l in &trace.labels { counts[l] += 1; }
            prop_assert!(counts.iter().all(|&c| c > 0));
            let recomputed = inertia(&data, &trace.model.centroids, &trace.labels).unwrap();
            prop_assert_eq!(recomputed, trace.model.inertia);

            let (model2, result2) = fit(&data, &cfg).unwrap();
            prop_assert_eq!(&model2.centroids, &trace.model.centroids);
            prop_assert_eq!(result2.labels().iter().map(|&l| l as usize).collect::<Vec<_>>(), trace.labels);
        }

        #[test]
        fn labels_invariant_under_dimension_permutation((rows, k, seed) in blobs()) {
            let reversed: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().rev().copied().collect()).collect();
            let (ma, a) = fit(&ds(&rows), &KMeansConfig::new(k, seed)).unwrap();
            let (mb, b) = fit(&ds(&reversed), &KMeansConfig::new(k, seed)).unwrap();
            // Summation order changes with the permutation, so a D² draw can
            // flip on an ulp; compare partitions when both runs agree on cost.
            if (ma.inertia - mb.inertia).abs() <= 1e-9 * ma.inertia.max(1.0) {
                prop_assert_eq!(crate::metrics::adjusted_rand_index(a.labels(), b.labels()).unwrap(), 1.0);
            }
        }
    }
}
