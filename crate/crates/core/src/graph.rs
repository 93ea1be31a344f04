//! Algebraic graph helpers: oriented incidence matrices, Laplacians and
//! connected components.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Oriented node-edge incidence matrix: the column of edge `(i, j)` holds
/// `+1` at row `i` and `-1` at row `j`.
pub fn incidence<T: Real>(edges: &[(usize, usize)], n_nodes: usize) -> Result<Array2<T>> {
    let mut d = Array2::zeros((n_nodes, edges.len()));
    for (e, &(i, j)) in edges.iter().enumerate() {
        if i >= n_nodes || j >= n_nodes {
            return Err(Error::Parameter(format!(
                "edge {e} = ({i}, {j}) references a node outside 0..{n_nodes}"
            )));
        }
        d[[i, e]] += T::one();
        d[[j, e]] -= T::one();
    }
    Ok(d)
}

/// `D Dᵀ` for any (possibly weighted) incidence-like matrix.
pub fn laplacian_from_incidence<T: Real>(d: &Array2<T>) -> Array2<T> {
    let (n, m) = d.dim();
    let mut l = Array2::zeros((n, n));
    for e in 0..m {
        let nz: Vec<(usize, T)> = (0..n)
            .filter(|&r| d[[r, e]] != T::zero())
            .map(|r| (r, d[[r, e]]))
            .collect();
        for &(a, va) in &nz {
            for &(b, vb) in &nz {
                l[[a, b]] += va * vb;
            }
        }
    }
    l
}

/// Union-find over `n` elements.
#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Component label for every node; labels are dense and ordered by the
/// smallest node index in each component.
pub fn components(n_nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut ds = DisjointSets::new(n_nodes);
    for &(i, j) in edges {
        ds.union(i, j);
    }
    let mut label = vec![usize::MAX; n_nodes];
    let mut next = 0;
    let mut out = vec![0; n_nodes];
    for v in 0..n_nodes {
        let r = ds.find(v);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[v] = label[r];
    }
    out
}

pub fn component_count(n_nodes: usize, edges: &[(usize, usize)]) -> usize {
    components(n_nodes, edges)
        .into_iter()
        .max()
        .map_or(0, |m| m + 1)
}

/// Whether the subgraph induced by `subset` (using only edges with both
/// endpoints inside it) is connected. An empty subset counts as connected.
pub fn induced_connected(subset: &[usize], edges: &[(usize, usize)], n_nodes: usize) -> bool {
    if subset.len() <= 1 {
        return true;
    }
    let mut inside = vec![false; n_nodes];
    for &v in subset {
        inside[v] = true;
    }
    let mut ds = DisjointSets::new(n_nodes);
    for &(i, j) in edges {
        if inside[i] && inside[j] {
            ds.union(i, j);
        }
    }
    let root = ds.find(subset[0]);
    subset.iter().all(|&v| ds.find(v) == root)
}
