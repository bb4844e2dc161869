//! Graphs, node features, covers, their file formats, the synthetic
//! benchmark generator and per-community label sampling.

mod io;
mod sample;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::Matrix;

pub use io::{
    load_cover, load_edge_list, load_edge_list_labeled, load_features, write_cover,
    write_edge_list, write_features, IdMap,
};
pub use sample::sample_labels;
pub use synth::{synth_graph, SynthConfig};

/// Undirected, unweighted graph in compressed adjacency form.
///
/// Every edge is stored in both directions; neighbor lists are strictly
/// ascending and never contain the node itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Graph with `n_nodes` nodes and no edges.
    pub fn empty(n_nodes: usize) -> Self {
        Graph {
            offsets: vec![0; n_nodes + 1],
            targets: Vec::new(),
        }
    }

    /// Builds a graph from an arbitrary edge multiset: edges are symmetrized,
    /// duplicates collapsed and self-loops dropped.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n_nodes {
                    return Err(Error::NodeOutOfRange { id, n_nodes });
                }
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; n_nodes + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, v)| v).collect();
        Ok(Graph { offsets, targets })
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges, each counted once.
    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n_nodes() && v < self.n_nodes() && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn check_node(&self, id: usize) -> Result<()> {
        if id < self.n_nodes() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id,
                n_nodes: self.n_nodes(),
            })
        }
    }

    /// Full scan of the adjacency invariants: sorted, loop-free, symmetric.
    pub fn is_well_formed(&self) -> bool {
        let n = self.n_nodes();
        if self.offsets[0] != 0 || self.offsets[n] != self.targets.len() || !self.targets.len().is_multiple_of(2) {
            return false;
        }
        (0..n).all(|u| {
            let nb = self.neighbors(u);
            nb.windows(2).all(|w| w[0] < w[1])
                && nb.iter().all(|&v| v < n && v != u && self.has_edge(v, u))
        })
    }
}

/// Number of common elements of two strictly ascending slices.
pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Dense node-attribute matrix with one row per node. All entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix(values))
    }

    pub fn n_rows(&self) -> usize {
        self.0.rows()
    }

    pub fn dims(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Binary node-community affiliation, stored as a sorted community list per
/// node. Nodes may belong to zero, one or several communities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    n_communities: usize,
    memberships: Vec<Vec<usize>>,
}

impl Cover {
    /// Cover in which no node belongs to any community.
    pub fn empty(n_nodes: usize, n_communities: usize) -> Self {
        Cover {
            n_communities,
            memberships: vec![Vec::new(); n_nodes],
        }
    }

    /// Builds a cover from per-node community lists (any order, duplicates allowed).
    pub fn from_memberships(n_communities: usize, memberships: Vec<Vec<usize>>) -> Result<Self> {
        let mut cover = Cover {
            n_communities,
            memberships,
        };
        for row in &mut cover.memberships {
            row.sort_unstable();
            row.dedup();
            if let Some(&id) = row.last() {
                if id >= n_communities {
                    return Err(Error::CommunityOutOfRange { id, n_communities });
                }
            }
        }
        Ok(cover)
    }

    /// Cover from a dense row-major `n_nodes x n_communities` boolean grid.
    pub fn from_dense(n_nodes: usize, n_communities: usize, grid: &[bool]) -> Self {
        assert_eq!(grid.len(), n_nodes * n_communities);
        let memberships = if n_communities == 0 {
            vec![Vec::new(); n_nodes]
        } else {
            grid.chunks(n_communities)
                .map(|row| (0..n_communities).filter(|&k| row[k]).collect())
                .collect()
        };
        Cover {
            n_communities,
            memberships,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.memberships.len()
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn communities_of(&self, v: usize) -> &[usize] {
        &self.memberships[v]
    }

    pub fn contains(&self, v: usize, community: usize) -> bool {
        self.memberships[v].binary_search(&community).is_ok()
    }

    pub fn set_row(&mut self, v: usize, mut communities: Vec<usize>) -> Result<()> {
        if v >= self.n_nodes() {
            return Err(Error::NodeOutOfRange {
                id: v,
                n_nodes: self.n_nodes(),
            });
        }
        communities.sort_unstable();
        communities.dedup();
        if let Some(&id) = communities.last() {
            if id >= self.n_communities {
                return Err(Error::CommunityOutOfRange {
                    id,
                    n_communities: self.n_communities,
                });
            }
        }
        self.memberships[v] = communities;
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.memberships
    }

    /// Member list of each community, indexed by community id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities];
        for (v, row) in self.memberships.iter().enumerate() {
            for &k in row {
                out[k].push(v);
            }
        }
        out
    }

    /// Row-major dense 0/1 matrix.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_nodes(), self.n_communities);
        for (v, row) in self.memberships.iter().enumerate() {
            for &k in row {
                m[(v, k)] = 1.0;
            }
        }
        m
    }

    /// Number of nodes with at least one community.
    pub fn n_labeled(&self) -> usize {
        self.memberships.iter().filter(|r| !r.is_empty()).count()
    }
}

/// Ground-truth rows revealed for a sampled subset of nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledLabels {
    n_nodes: usize,
    n_communities: usize,
    node_ids: Vec<usize>,
    rows: Vec<Vec<usize>>,
}

impl SampledLabels {
    /// Reveals the full rows of `nodes` (any order, duplicates collapsed) from `cover`.
    pub fn from_cover(cover: &Cover, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut node_ids: Vec<usize> = nodes.into_iter().collect();
        node_ids.sort_unstable();
        node_ids.dedup();
        if let Some(&id) = node_ids.last() {
            if id >= cover.n_nodes() {
                return Err(Error::NodeOutOfRange {
                    id,
                    n_nodes: cover.n_nodes(),
                });
            }
        }
        let rows = node_ids
            .iter()
            .map(|&v| cover.communities_of(v).to_vec())
            .collect();
        Ok(SampledLabels {
            n_nodes: cover.n_nodes(),
            n_communities: cover.n_communities(),
            node_ids,
            rows,
        })
    }

    pub fn empty(n_nodes: usize, n_communities: usize) -> Self {
        SampledLabels {
            n_nodes,
            n_communities,
            node_ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.node_ids.binary_search(&v).is_ok()
    }

    /// True community row of `v`, if `v` was sampled.
    pub fn row_of(&self, v: usize) -> Option<&[usize]> {
        self.node_ids
            .binary_search(&v)
            .ok()
            .map(|i| self.rows[i].as_slice())
    }

    /// `(node, row)` pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.node_ids
            .iter()
            .copied()
            .zip(self.rows.iter().map(Vec::as_slice))
    }

    /// Per-node membership mask of length `n_nodes`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_nodes];
        for &v in &self.node_ids {
            m[v] = true;
        }
        m
    }
}
