use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;

/// Undirected weighted edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    pub fn new(u: usize, v: usize, weight: f64) -> Self {
        MstEdge {
            a: u.min(v),
            b: u.max(v),
            weight,
        }
    }
}

/// Dense Prim: O(n²) time, O(n) extra memory. Edges come out in the order
/// they join the tree.
pub fn prim(distances: &DistanceMatrix) -> Vec<MstEdge> {
    let n = distances.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = distances.get(current, v);
            if d < best[v] {
                best[v] = d;
                parent[v] = current;
            }
            if next == usize::MAX || best[v] < next_d {
                next = v;
                next_d = best[v];
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge::new(parent[next], next, next_d));
        current = next;
    }
    edges
}

pub fn total_weight(edges: &[MstEdge]) -> f64 {
    edges.iter().map(|e| e.weight).sum()
}

/// Union-find over `0..n` with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns the new root, or `None` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        Some(big)
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let d = DistanceMatrix::from_condensed(3, vec![1.0, 3.0, 2.0]).unwrap();
        let mst = prim(&d);
        let mut w: Vec<f64> = mst.iter().map(|e| e.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, [1.0, 2.0]);
    }

    #[test]
    fn two_points() {
        let d = DistanceMatrix::from_condensed(2, vec![4.5]).unwrap();
        assert_eq!(prim(&d), [MstEdge::new(1, 0, 4.5)]);
    }

    #[test]
    fn union_find_tracks_sizes() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1).is_some());
        assert!(uf.union(3, 4).is_some());
        assert!(uf.union(1, 0).is_none());
        uf.union(1, 4);
        assert_eq!(uf.size_of(3), 4);
        assert_eq!(uf.size_of(2), 1);
    }
}
