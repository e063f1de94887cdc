//! The Chow-Liu learner: pairwise empirical MI weights, deterministic
//! maximum spanning tree, and evaluation of the learned tree against the
//! ground-truth model.

use crate::error::{Error, Result};
use crate::estimators::empirical_mi;
use crate::linalg::SampleBatch;
use crate::model::{gaussian_mi, kl_via_decomposition, GaussianDistribution, Tree};

/// Weights for the complete graph on n vertices, indexed by canonical pair
/// order (0,1), (0,2), ..., (n-2, n-1).
#[derive(Debug, Clone)]
pub struct WeightedEdgeList {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedEdgeList {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        WeightedEdgeList { n, weights: vec![0.0; n * (n - 1) / 2] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.weights[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let idx = self.index(i, j);
        self.weights[idx] = w;
    }

    /// Pairs in canonical (lexicographic) order with their weights.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n).map(move |j| (i, j, self.weights[self.index(i, j)]))
        })
    }

    pub fn scale(&self, c: f64) -> WeightedEdgeList {
        WeightedEdgeList { n: self.n, weights: self.weights.iter().map(|w| c * w).collect() }
    }

    pub fn total_weight(&self, tree: &Tree) -> f64 {
        tree.edges().iter().map(|&(u, v)| self.get(u, v)).sum()
    }
}

/// weight(i,j) = empirical MI between columns i and j.
pub fn pairwise_empirical_mi(batch: &SampleBatch) -> Result<WeightedEdgeList> {
    if batch.k < 2 {
        return Err(Error::InvalidParameter("need at least 2 variables".into()));
    }
    let cols: Vec<Vec<f64>> = (0..batch.k).map(|j| batch.column(j)).collect();
    let mut w = WeightedEdgeList::new(batch.k);
    for i in 0..batch.k {
        for j in i + 1..batch.k {
            let est = empirical_mi(&cols[i], &cols[j]).map_err(|e| match e {
                Error::DegenerateSample(_) => {
                    Error::DegenerateSample(format!("degenerate column pair ({i},{j})"))
                }
                other => other,
            })?;
            w.set(i, j, est.i_hat);
        }
    }
    Ok(w)
}

/// Kruskal over edges sorted by (descending weight, ascending canonical
/// pair). Ties break lexicographically, so the output is deterministic; an
/// all-equal-weight input yields the star rooted at vertex 0.
pub fn maximum_spanning_tree(w: &WeightedEdgeList) -> Tree {
    let n = w.n();
    let mut edges: Vec<(usize, usize, f64)> = w.pairs().collect();
    edges.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("non-finite edge weight")
            .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });
    let mut parent: Vec<usize> = (0..n).collect();
    let mut rank = vec![0u32; n];
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let mut picked = Vec::with_capacity(n - 1);
    for (u, v, _) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            if rank[ru] < rank[rv] {
                parent[ru] = rv;
            } else if rank[ru] > rank[rv] {
                parent[rv] = ru;
            } else {
                parent[rv] = ru;
                rank[ru] += 1;
            }
            picked.push((u, v));
            if picked.len() == n - 1 {
                break;
            }
        }
    }
    Tree::new(n, picked).expect("Kruskal output is a spanning tree")
}

/// Algorithm end-to-end: pairwise empirical MI, then the maximum spanning tree.
pub fn chow_liu(batch: &SampleBatch) -> Result<Tree> {
    Ok(maximum_spanning_tree(&pairwise_empirical_mi(batch)?))
}

/// Oracle pairwise-MI weights of a distribution.
pub fn oracle_weights(dist: &GaussianDistribution) -> Result<WeightedEdgeList> {
    let n = dist.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 variables".into()));
    }
    let mut w = WeightedEdgeList::new(n);
    for i in 0..n {
        for j in i + 1..n {
            w.set(i, j, gaussian_mi(dist, &[i], &[j])?);
        }
    }
    Ok(w)
}

/// The KL-optimal spanning tree of `dist` (Chow-Liu optimality over oracle MIs).
pub fn oracle_mst(dist: &GaussianDistribution) -> Result<Tree> {
    Ok(maximum_spanning_tree(&oracle_weights(dist)?))
}

/// Excess reverse-KL of the learned tree over the optimal tree:
/// kl_via_decomposition(dist, learned) - min over trees of the same.
pub fn approximation_gap(dist: &GaussianDistribution, learned: &Tree) -> Result<f64> {
    let best = oracle_mst(dist)?;
    Ok(kl_via_decomposition(dist, learned)? - kl_via_decomposition(dist, &best)?)
}
