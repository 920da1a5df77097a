//! Euclidean distances and condensed pairwise storage.

use rayon::prelude::*;

use crate::dataset::{EmbeddingDataset, Matrix};
use crate::error::{Error, Result};

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(squared_euclidean(a, b).sqrt())
}

/// Squared distance; callers guarantee equal lengths.
#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Symmetric distances with an implicit zero diagonal, stored as the
/// row-major upper triangle (`n(n-1)/2` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_condensed(n: usize, data: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "distance {bad} is negative or non-finite"
            )));
        }
        Ok(DistanceMatrix { n, data })
    }

    /// Fills entry `(i, j)`, `i < j`, with `f(i, j)`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| f(i, j)).collect())
            .collect();
        DistanceMatrix::from_condensed(n, rows.concat())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.data[self.index(i, j)],
            std::cmp::Ordering::Greater => self.data[self.index(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn condensed(&self) -> &[f64] {
        &self.data
    }

    /// Distances from `i` to every point, including the zero to itself.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(i, j)).collect()
    }

    /// Applies `f` to every stored entry.
    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> Result<Self> {
        DistanceMatrix::from_fn(self.n, |i, j| f(i, j, self.get(i, j)))
    }
}

/// All pairwise Euclidean distances between rows.
pub fn pairwise_distances(dataset: &EmbeddingDataset) -> Result<DistanceMatrix> {
    let n = dataset.n_samples();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "pairwise distances need at least 2 samples, found {n}"
        )));
    }
    matrix_distances(dataset.matrix())
}

pub(crate) fn matrix_distances(matrix: &Matrix) -> Result<DistanceMatrix> {
    DistanceMatrix::from_fn(matrix.nrows(), |i, j| {
        squared_euclidean(matrix.row(i), matrix.row(j)).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            acc += (a[i] - b[i]).powi(2);
        }
        acc.sqrt()
    }

    fn points(rows: &[Vec<f64>]) -> EmbeddingDataset {
        EmbeddingDataset::from_rows(rows, vec![1; rows.len()]).unwrap()
    }

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(euclidean_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn high_dimensional_pair_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..300).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let got = euclidean_distance(&a, &b).unwrap();
        let want = naive(&a, &b);
        assert!((got - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn collinear_points() {
        let d = pairwise_distances(&points(&[vec![0.0], vec![1.0], vec![3.0]])).unwrap();
        assert_eq!(d.condensed(), [1.0, 3.0, 2.0]);
        assert_eq!(d.get(2, 0), 3.0);
        assert_eq!(d.get(1, 1), 0.0);
    }

    #[test]
    fn two_points_single_entry() {
        let d = pairwise_distances(&points(&[vec![0.0, 0.0], vec![3.0, 4.0]])).unwrap();
        assert_eq!(d.condensed(), [5.0]);
        assert!(pairwise_distances(&points(&[vec![0.0]])).is_err());
    }

    #[test]
    fn random_matrix_matches_per_pair_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let d = pairwise_distances(&points(&rows)).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let want = if i == j { 0.0 } else { naive(&rows[i], &rows[j]) };
                assert!((d.get(i, j) - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn identical_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..16).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let ds = points(&rows);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| pairwise_distances(&ds).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #[test]
        fn triangle_inequality(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 3..12)) {
            let d = pairwise_distances(&points(&rows)).unwrap();
            let n = rows.len();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    for k in 0..n {
                        prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-9);
                    }
                }
            }
        }
    }
}
