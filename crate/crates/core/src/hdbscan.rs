//! HDBSCAN with excess-of-mass cluster selection.
//!
//! Pipeline: core distances, mutual reachability, minimum spanning tree,
//! single-linkage hierarchy, condensed tree, stability-based selection.
//! Density is expressed as `λ = 1 / distance`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::distance::{pairwise_distances, DistanceMatrix};
use crate::error::{Error, Result};
use crate::linkage::{dendrogram_from_mst, Dendrogram};
use crate::mst::{prim, MstEdge};
use crate::result::{Algorithm, ClusteringResult, NOISE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// Neighbor count for core distances; `None` means `min_cluster_size`.
    pub min_samples: Option<usize>,
}

impl HdbscanConfig {
    pub fn new(min_cluster_size: usize) -> Self {
        HdbscanConfig {
            min_cluster_size,
            min_samples: None,
        }
    }

    pub fn effective_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "min_cluster_size = {} must be at least 2",
                self.min_cluster_size
            )));
        }
        if self.effective_min_samples() == 0 {
            return Err(Error::InvalidArgument("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Distance to the k-th nearest neighbor, the point itself being the first.
pub fn core_distances(dataset: &EmbeddingDataset, k: usize) -> Result<Vec<f64>> {
    let n = dataset.n_samples();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    core_distances_precomputed(&pairwise_distances(dataset)?, k)
}

pub fn core_distances_precomputed(distances: &DistanceMatrix, k: usize) -> Result<Vec<f64>> {
    let n = distances.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    Ok((0..n)
        .map(|i| {
            let mut row = distances.row(i);
            *row.select_nth_unstable_by(k - 1, f64::total_cmp).1
        })
        .collect())
}

/// `max(core(i), core(j), d(i, j))` for every pair.
pub fn mutual_reachability(distances: &DistanceMatrix, core: &[f64]) -> Result<DistanceMatrix> {
    if core.len() != distances.len() {
        return Err(Error::DimensionMismatch {
            expected: distances.len(),
            found: core.len(),
        });
    }
    distances.map(|i, j, d| d.max(core[i]).max(core[j]))
}

pub fn build_mst(mutual_reachability: &DistanceMatrix) -> Result<Vec<MstEdge>> {
    if mutual_reachability.len() < 2 {
        return Err(Error::InvalidArgument(
            "a spanning tree needs at least 2 points".into(),
        ));
    }
    Ok(prim(mutual_reachability))
}

/// A record of the condensed tree: `child` is a point (`< n_points`) or a
/// cluster id, leaving or splitting off `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    pub lambda_death: f64,
    pub size: usize,
    pub stability: f64,
}

/// Hierarchy after discarding splits that shed fewer than
/// `min_cluster_size` points. Cluster ids start at `n_points` (the root).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    n_points: usize,
    min_cluster_size: usize,
    edges: Vec<CondensedEdge>,
    clusters: Vec<ClusterNode>,
}

impl CondensedTree {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn min_cluster_size(&self) -> usize {
        self.min_cluster_size
    }

    pub fn root(&self) -> usize {
        self.n_points
    }

    pub fn edges(&self) -> &[CondensedEdge] {
        &self.edges
    }

    /// Cluster nodes ordered by id, root first.
    pub fn clusters(&self) -> &[ClusterNode] {
        &self.clusters
    }

    pub fn cluster(&self, id: usize) -> &ClusterNode {
        &self.clusters[id - self.n_points]
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.parent == id && e.child >= self.n_points)
            .map(|e| e.child)
    }

    /// `(parent cluster, λ)` at which each point leaves the hierarchy.
    pub fn point_exits(&self) -> Vec<(usize, f64)> {
        let mut out = vec![(self.root(), 0.0); self.n_points];
        for e in &self.edges {
            if e.child < self.n_points {
                out[e.child] = (e.parent, e.lambda);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.clusters).expect("finite values serialize")
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

pub fn condense_tree(dendrogram: &Dendrogram, min_cluster_size: usize) -> Result<CondensedTree> {
    if min_cluster_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "min_cluster_size = {min_cluster_size} must be at least 2"
        )));
    }
    let n = dendrogram.n_leaves();
    let root = dendrogram.root();
    let mut relabel = vec![0usize; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut edges = Vec::new();

    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let merge = dendrogram.merges()[node - n];
        let lambda = lambda_of(merge.distance);
        let parent = relabel[node];
        let (left, right) = (merge.left, merge.right);
        let (ls, rs) = (dendrogram.node_size(left), dendrogram.node_size(right));
        let big_enough = |s: usize| s >= min_cluster_size;

        let fall_out = |child: usize, edges: &mut Vec<CondensedEdge>| {
            for leaf in dendrogram.leaves(child) {
                edges.push(CondensedEdge {
                    parent,
                    child: leaf,
                    lambda,
                    child_size: 1,
                });
            }
        };

        match (big_enough(ls), big_enough(rs)) {
            (true, true) => {
                for (child, size) in [(left, ls), (right, rs)] {
                    relabel[child] = next_label;
                    next_label += 1;
                    edges.push(CondensedEdge {
                        parent,
                        child: relabel[child],
                        lambda,
                        child_size: size,
                    });
                    queue.push_back(child);
                }
            }
            (false, false) => {
                fall_out(left, &mut edges);
                fall_out(right, &mut edges);
            }
            (false, true) => {
                fall_out(left, &mut edges);
                relabel[right] = parent;
                queue.push_back(right);
            }
            (true, false) => {
                fall_out(right, &mut edges);
                relabel[left] = parent;
                queue.push_back(left);
            }
        }
    }

    // Coincident points sit at infinite density.
    let max_finite = edges
        .iter()
        .map(|e| e.lambda)
        .filter(|l| l.is_finite())
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))))
        .unwrap_or(1.0);
    for e in &mut edges {
        if !e.lambda.is_finite() {
            e.lambda = max_finite;
        }
    }

    let n_clusters = next_label - n;
    let mut clusters: Vec<ClusterNode> = (0..n_clusters)
        .map(|i| ClusterNode {
            id: n + i,
            parent: None,
            lambda_birth: 0.0,
            lambda_death: 0.0,
            size: if i == 0 { n } else { 0 },
            stability: 0.0,
        })
        .collect();
    for e in edges.iter().filter(|e| e.child >= n) {
        let c = &mut clusters[e.child - n];
        c.parent = Some(e.parent);
        c.lambda_birth = e.lambda;
        c.size = e.child_size;
    }
    for e in &edges {
        let birth = clusters[e.parent - n].lambda_birth;
        let c = &mut clusters[e.parent - n];
        c.stability += (e.lambda - birth) * e.child_size as f64;
        c.lambda_death = c.lambda_death.max(e.lambda);
    }

    Ok(CondensedTree {
        n_points: n,
        min_cluster_size,
        edges,
        clusters,
    })
}

/// Selected cluster ids, maximizing total stability; the root is never
/// selected.
pub fn select_clusters_eom(tree: &CondensedTree) -> Vec<usize> {
    let n = tree.n_points;
    let count = tree.clusters.len();
    let mut best: Vec<f64> = tree.clusters.iter().map(|c| c.stability).collect();
    let mut selected = vec![true; count];
    selected[0] = false;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for c in tree.clusters.iter().skip(1) {
        children[c.parent.expect("non-root has a parent") - n].push(c.id - n);
    }
    // Children always carry larger ids than their parent.
    for c in (1..count).rev() {
        let subtree: f64 = children[c].iter().map(|&ch| best[ch]).sum();
        if subtree > best[c] {
            selected[c] = false;
            best[c] = subtree;
        } else {
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend_from_slice(&children[d]);
            }
        }
    }
    (0..count).filter(|&c| selected[c]).map(|c| c + n).collect()
}

pub fn extract_clusters_eom(tree: &CondensedTree) -> Result<ClusteringResult> {
    let n = tree.n_points;
    let selected = select_clusters_eom(tree);
    let mut is_selected = vec![false; tree.clusters.len()];
    for &s in &selected {
        is_selected[s - n] = true;
    }
    let owner = |mut cluster: usize| -> Option<usize> {
        loop {
            if is_selected[cluster - n] {
                return Some(cluster);
            }
            cluster = tree.cluster(cluster).parent?;
        }
    };
    let raw: Vec<Option<usize>> = tree.point_exits().iter().map(|&(p, _)| owner(p)).collect();

    // Number clusters by decreasing size, then smallest member.
    let mut stats: Vec<(usize, usize, usize)> = selected
        .iter()
        .map(|&s| {
            let members = raw.iter().filter(|&&r| r == Some(s));
            let size = members.clone().count();
            let first = raw.iter().position(|&r| r == Some(s)).unwrap_or(usize::MAX);
            (s, size, first)
        })
        .collect();
    stats.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut label_of = vec![NOISE; tree.clusters.len()];
    for (label, &(s, _, _)) in stats.iter().enumerate() {
        label_of[s - n] = label as i64;
    }
    let labels = raw
        .iter()
        .map(|r| r.map_or(NOISE, |s| label_of[s - n]))
        .collect();
    Ok(ClusteringResult::new(labels, Algorithm::Hdbscan)?
        .with_param("min_cluster_size", tree.min_cluster_size as f64))
}

/// Intermediate products of a fit, kept for inspection.
#[derive(Debug, Clone)]
pub struct HdbscanFit {
    pub core_distances: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub dendrogram: Dendrogram,
    pub tree: CondensedTree,
    pub result: ClusteringResult,
}

pub fn fit_detailed(distances: &DistanceMatrix, config: &HdbscanConfig) -> Result<HdbscanFit> {
    config.validate()?;
    let n = distances.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "HDBSCAN needs at least 2 samples, found {n}"
        )));
    }
    let min_samples = config.effective_min_samples();
    let core = core_distances_precomputed(distances, min_samples)?;
    let mr = mutual_reachability(distances, &core)?;
    let mst = build_mst(&mr)?;
    let dendrogram = dendrogram_from_mst(n, &mst)?;
    let tree = condense_tree(&dendrogram, config.min_cluster_size)?;
    let result = extract_clusters_eom(&tree)?.with_param("min_samples", min_samples as f64);
    Ok(HdbscanFit {
        core_distances: core,
        mst,
        dendrogram,
        tree,
        result,
    })
}

pub fn fit_precomputed(distances: &DistanceMatrix, config: &HdbscanConfig) -> Result<ClusteringResult> {
    Ok(fit_detailed(distances, config)?.result)
}

pub fn fit(dataset: &EmbeddingDataset, config: &HdbscanConfig) -> Result<ClusteringResult> {
    config.validate()?;
    match dataset.n_samples() {
        0 => Err(Error::InvalidDataset("HDBSCAN needs a non-empty dataset".into())),
        1 => Ok(ClusteringResult::new(vec![NOISE], Algorithm::Hdbscan)?
            .with_param("min_cluster_size", config.min_cluster_size as f64)
            .with_param("min_samples", config.effective_min_samples() as f64)),
        _ => fit_precomputed(&pairwise_distances(dataset)?, config),
    }
}
