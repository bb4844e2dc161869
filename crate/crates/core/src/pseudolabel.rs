//! Pseudo-labels: clique votes for the first round, thresholded model
//! confidence for the second.

use serde::{Deserialize, Serialize};

use crate::cliquefind::CliqueSet;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graphio::{Cover, SampledLabels};
use crate::neuralnet::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PseudoConfig {
    /// Communities retained per clique.
    pub retained: usize,
    /// Minimum predicted probability for a refreshed pseudo-label.
    pub threshold: f64,
    /// Union the refreshed cover with the clique cover instead of replacing it.
    pub union_on_refresh: bool,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        PseudoConfig {
            retained: 1,
            threshold: 0.9,
            union_on_refresh: false,
        }
    }
}

impl PseudoConfig {
    pub fn validate(&self, n_communities: usize) -> Result<()> {
        if self.retained == 0 || self.retained > n_communities.max(1) {
            return Err(Error::InvalidConfig(format!(
                "retained communities per clique must be in [1, {n_communities}], got {}",
                self.retained
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "pseudo-label threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Communities a single clique votes for: the `retained` highest positive
/// vote counts, smaller id first on ties.
fn clique_label(members: &[usize], sampled: &SampledLabels, retained: usize) -> Vec<usize> {
    let mut votes = vec![0u32; sampled.n_communities()];
    for &m in members {
        if let Some(row) = sampled.row_of(m) {
            for &c in row {
                votes[c] += 1;
            }
        }
    }
    let mut ranked: Vec<(usize, u32)> = votes
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(retained).map(|(c, _)| c).collect()
}

/// Builds the initial pseudo cover from clique votes: every clique sums the
/// true rows of its sampled members, keeps its top-`retained` voted
/// communities, and hands them to all of its members. The result is the
/// union over cliques, so clique order does not matter.
pub fn construct_pseudo_labels(
    cliques: &CliqueSet,
    sampled: &SampledLabels,
    n_communities: usize,
    retained: usize,
) -> Result<Cover> {
    construct_pseudo_labels_with(cliques, sampled, n_communities, retained, Exec::default())
}

pub fn construct_pseudo_labels_with(
    cliques: &CliqueSet,
    sampled: &SampledLabels,
    n_communities: usize,
    retained: usize,
    exec: Exec,
) -> Result<Cover> {
    let n = cliques.n_nodes();
    if sampled.n_nodes() != n {
        return Err(Error::ShapeMismatch(format!(
            "sampled labels cover {} nodes, cliques {n}",
            sampled.n_nodes()
        )));
    }
    if sampled.n_communities() != n_communities {
        return Err(Error::ShapeMismatch(format!(
            "sampled labels have {} communities, expected {n_communities}",
            sampled.n_communities()
        )));
    }
    if let Some((id, _)) = sampled.iter().find(|&(v, _)| v >= n) {
        return Err(Error::NodeOutOfRange { id, n_nodes: n });
    }
    if retained == 0 {
        return Err(Error::InvalidConfig("retained communities must be at least 1".into()));
    }

    let labels = exec.map_indices(cliques.len(), |i| {
        clique_label(&cliques.cliques()[i].members, sampled, retained)
    });
    let mut grid = vec![false; n * n_communities];
    for (clique, label) in cliques.cliques().iter().zip(&labels) {
        for &m in &clique.members {
            for &c in label {
                grid[m * n_communities + c] = true;
            }
        }
    }
    Ok(Cover::from_dense(n, n_communities, &grid))
}

/// Regenerates pseudo-labels from predictions: a non-sampled node gets
/// community `k` iff its probability is at least `threshold`. Sampled nodes
/// always get empty rows.
pub fn refresh_pseudo_labels(
    predictions: &Matrix,
    sampled: &SampledLabels,
    threshold: f64,
) -> Result<Cover> {
    let (n, k) = predictions.shape();
    if n != sampled.n_nodes() || k != sampled.n_communities() {
        return Err(Error::ShapeMismatch(format!(
            "predictions are {n}x{k}, labels {}x{}",
            sampled.n_nodes(),
            sampled.n_communities()
        )));
    }
    let mut grid = vec![false; n * k];
    for v in 0..n {
        for (c, &p) in predictions.row(v).iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange { row: v, col: c, value: p });
            }
            grid[v * k + c] = p >= threshold;
        }
    }
    for &v in sampled.node_ids() {
        grid[v * k..(v + 1) * k].fill(false);
    }
    Ok(Cover::from_dense(n, k, &grid))
}

/// Union of two covers of equal shape.
pub fn union_covers(a: &Cover, b: &Cover) -> Result<Cover> {
    if a.n_nodes() != b.n_nodes() || a.n_communities() != b.n_communities() {
        return Err(Error::ShapeMismatch("cover shapes differ".into()));
    }
    Cover::from_memberships(
        a.n_communities(),
        a.rows()
            .iter()
            .zip(b.rows())
            .map(|(x, y)| x.iter().chain(y).copied().collect())
            .collect(),
    )
}

/// Number of non-sampled nodes holding at least one pseudo community.
pub fn pseudo_coverage(cover: &Cover, sampled: &SampledLabels) -> usize {
    (0..cover.n_nodes())
        .filter(|&v| !cover.communities_of(v).is_empty() && !sampled.contains(v))
        .count()
}
