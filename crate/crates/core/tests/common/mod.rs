//! Brute-force reference implementations and data generators shared by the
//! integration tests. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect()).collect()
}

/// Relabels so that clusters are numbered by first appearance; noise stays -1.
pub fn canonical(labels: &[i64]) -> Vec<i64> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                -1
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    canonical(a) == canonical(b)
}

/// `n` points in 3 isotropic Gaussian blobs in `d` dimensions with centers
/// at least `min_sep` apart. Ratings are 1, 3, 5 by blob.
pub fn gaussian_blobs(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    sigma: f64,
    min_sep: f64,
) -> (Vec<Vec<f64>>, Vec<u8>, Vec<i64>) {
    let centers = loop {
        let c = random_points(rng, 3, d, 12.0);
        let ok = (0..3).all(|i| (i + 1..3).all(|j| dist(&c[i], &c[j]) >= min_sep));
        if ok {
            break c;
        }
    };
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut ratings = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let b = i * 3 / n;
        rows.push(centers[b].iter().map(|&c| c + noise.sample(rng)).collect());
        ratings.push([1u8, 3, 5][b]);
        truth.push(b as i64);
    }
    (rows, ratings, truth)
}

/// Neighborhoods by direct distance evaluation, core flags, then breadth-first
/// expansion from unvisited core points in index order.
pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<i64> {
    let n = points.len();
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_samples).collect();
    let mut labels = vec![-1i64; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start] >= 0 {
            continue;
        }
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &nbrs[p] {
                if labels[q] < 0 {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

pub fn core_flags(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<bool> {
    (0..points.len())
        .map(|i| points.iter().filter(|q| dist(&points[i], q) <= eps).count() >= min_samples)
        .collect()
}

/// Naive agglomeration: repeatedly merges the two clusters with the smallest
/// minimum inter-point distance. Returns the partition at every cluster
/// count, indexed by count, and the merge heights in order.
pub struct NaiveLinkage {
    pub partitions: BTreeMap<usize, Vec<i64>>,
    pub heights: Vec<f64>,
    /// Member sets of the two sides of each merge, each sorted.
    pub merges: Vec<(Vec<usize>, Vec<usize>)>,
}

pub fn single_linkage_oracle(points: &[Vec<f64>]) -> NaiveLinkage {
    let n = points.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut partitions = BTreeMap::new();
    let mut heights = Vec::new();
    let mut merges = Vec::new();
    let snapshot = |clusters: &[Vec<usize>]| {
        let mut labels = vec![0i64; n];
        for (c, members) in clusters.iter().enumerate() {
            for &m in members {
                labels[m] = c as i64;
            }
        }
        labels
    };
    partitions.insert(n, snapshot(&clusters));
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut d = f64::INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        d = d.min(dist(&points[i], &points[j]));
                    }
                }
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (d, a, b) = best;
        let right = clusters.remove(b);
        let mut left = clusters[a].clone();
        let mut r = right.clone();
        left.sort_unstable();
        r.sort_unstable();
        merges.push((left, r));
        clusters[a].extend(right);
        heights.push(d);
        partitions.insert(clusters.len(), snapshot(&clusters));
    }
    NaiveLinkage { partitions, heights, merges }
}

/// Distance to the k-th nearest point, counting the point itself first.
pub fn core_distance_oracle(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Total weight of a minimum spanning tree by Kruskal's algorithm.
pub fn kruskal_weight(n: usize, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((weight(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total += w;
        }
    }
    total
}

fn sse_1d(xs: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for (&x, &l) in xs.iter().zip(labels) {
        sum[l] += x;
        cnt[l] += 1;
    }
    xs.iter()
        .zip(labels)
        .map(|(&x, &l)| {
            let m = sum[l] / cnt[l] as f64;
            (x - m) * (x - m)
        })
        .sum()
}

/// Minimum within-cluster sum of squares over all k^n assignments.
pub fn exhaustive_kmeans_1d(xs: &[f64], k: usize) -> f64 {
    let n = xs.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(sse_1d(xs, &labels, k));
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// ARI from the four pair counts over all unordered pairs. The degenerate
/// case with no disagreeing structure scores 1.
pub fn ari_oracle(a: &[i64], b: &[i64]) -> f64 {
    let n = a.len();
    let (mut ss, mut sd, mut ds, mut dd) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1,
                (true, false) => sd += 1,
                (false, true) => ds += 1,
                (false, false) => dd += 1,
            }
        }
    }
    let num = 2 * (ss * dd - sd * ds);
    let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Mean silhouette computed point by point from raw coordinates. Noise is
/// dropped when `noise_as_cluster` is false.
pub fn silhouette_oracle(points: &[Vec<f64>], labels: &[i64], noise_as_cluster: bool) -> Option<f64> {
    let keep: Vec<usize> = (0..points.len()).filter(|&i| noise_as_cluster || labels[i] >= 0).collect();
    let mut clusters: Vec<i64> = keep.iter().map(|&i| labels[i]).collect();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    for &i in &keep {
        let mean_to = |c: i64| {
            let others: Vec<usize> = keep.iter().copied().filter(|&j| labels[j] == c && j != i).collect();
            if others.is_empty() {
                None
            } else {
                Some(others.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / others.len() as f64)
            }
        };
        let Some(a) = mean_to(labels[i]) else {
            continue;
        };
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .filter_map(|&c| mean_to(c))
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / keep.len() as f64)
}

/// Sum over predicted clusters of the majority true-class count, over the
/// number of points kept.
pub fn purity_oracle(truth: &[i64], pred: &[i64], noise_as_cluster: bool) -> Option<f64> {
    let mut table: HashMap<i64, HashMap<i64, usize>> = HashMap::new();
    let mut kept = 0;
    for (&t, &p) in truth.iter().zip(pred) {
        if p < 0 && !noise_as_cluster {
            continue;
        }
        kept += 1;
        *table.entry(p).or_default().entry(t).or_default() += 1;
    }
    if kept == 0 {
        return None;
    }
    let hits: usize = table.values().map(|row| row.values().copied().max().unwrap()).sum();
    Some(hits as f64 / kept as f64)
}
