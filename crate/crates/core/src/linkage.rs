//! Single-linkage agglomerative clustering.
//!
//! The hierarchy is read off a minimum spanning tree of the distance graph:
//! merging MST edges in ascending order reproduces single linkage exactly.

use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::distance::{pairwise_distances, DistanceMatrix};
use crate::error::{Error, Result};
use crate::mst::{prim, MstEdge, UnionFind};
use crate::result::{relabel_by_first_member, Algorithm, ClusteringResult};

/// One agglomeration step. Node ids below `n` are leaves; merge `i` creates
/// node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Number of leaves under `node`.
    pub fn node_size(&self, node: usize) -> usize {
        if node < self.n_leaves {
            1
        } else {
            self.merges[node - self.n_leaves].size
        }
    }

    pub fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    /// Leaves under `node`, in ascending order.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.node_size(node));
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n_leaves {
                out.push(x);
            } else {
                let m = &self.merges[x - self.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// Flat partition with `n_clusters` components, numbered by smallest leaf.
    pub fn cut(&self, n_clusters: usize) -> Result<ClusteringResult> {
        let n = self.n_leaves;
        if n_clusters == 0 || n_clusters > n {
            return Err(Error::InvalidArgument(format!(
                "n_clusters = {n_clusters} must be in 1..={n}"
            )));
        }
        let mut uf = UnionFind::new(n);
        let mut rep: Vec<usize> = (0..2 * n - 1).collect();
        for (i, m) in self.merges.iter().take(n - n_clusters).enumerate() {
            let (a, b) = (rep[m.left], rep[m.right]);
            uf.union(a, b);
            rep[n + i] = a;
        }
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let labels = relabel_by_first_member(&roots);
        Ok(ClusteringResult::new(labels, Algorithm::SingleLinkage)?
            .with_param("n_clusters", n_clusters as f64))
    }
}

/// Turns spanning-tree edges into a single-linkage dendrogram.
///
/// Edges are merged by ascending weight; among equal weights, the pair of
/// clusters whose (smaller, larger) minimum leaf ids sort first goes first.
pub fn dendrogram_from_mst(n: usize, edges: &[MstEdge]) -> Result<Dendrogram> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a dendrogram needs at least 2 points, found {n}"
        )));
    }
    if edges.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} spanning edges, found {}",
            n - 1,
            edges.len()
        )));
    }
    let mut sorted = edges.to_vec();
    sorted.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });

    let mut uf = UnionFind::new(n);
    // Per union-find root: current dendrogram node and smallest leaf.
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut min_leaf: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    let mut start = 0;
    while start < sorted.len() {
        let w = sorted[start].weight;
        let end = start + sorted[start..].iter().take_while(|e| e.weight == w).count();
        let mut batch: Vec<MstEdge> = sorted[start..end].to_vec();
        while !batch.is_empty() {
            let key = |uf: &mut UnionFind, e: &MstEdge| {
                let (x, y) = (min_leaf[uf.find(e.a)], min_leaf[uf.find(e.b)]);
                (x.min(y), x.max(y))
            };
            let mut pick = 0;
            let mut pick_key = key(&mut uf, &batch[0]);
            for (i, e) in batch.iter().enumerate().skip(1) {
                let k = key(&mut uf, e);
                if k < pick_key {
                    pick = i;
                    pick_key = k;
                }
            }
            let e = batch.swap_remove(pick);
            let (ra, rb) = (uf.find(e.a), uf.find(e.b));
            if ra == rb {
                return Err(Error::InvalidArgument("edges contain a cycle".into()));
            }
            let (left_root, right_root) = if min_leaf[ra] < min_leaf[rb] { (ra, rb) } else { (rb, ra) };
            let size = uf.size_of(ra) + uf.size_of(rb);
            merges.push(Merge {
                left: node_of[left_root],
                right: node_of[right_root],
                distance: w,
                size,
            });
            let lo = min_leaf[left_root];
            let root = uf.union(ra, rb).expect("distinct roots");
            node_of[root] = n + merges.len() - 1;
            min_leaf[root] = lo;
        }
        start = end;
    }
    Ok(Dendrogram {
        n_leaves: n,
        merges,
    })
}

pub fn build_dendrogram(distances: &DistanceMatrix) -> Result<Dendrogram> {
    let n = distances.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a dendrogram needs at least 2 points, found {n}"
        )));
    }
    dendrogram_from_mst(n, &prim(distances))
}

pub fn fit(dataset: &EmbeddingDataset, n_clusters: usize) -> Result<ClusteringResult> {
    build_dendrogram(&pairwise_distances(dataset)?)?.cut(n_clusters)
}
