//! Planted overlapping partition with block-structured binary features.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cover, FeatureMatrix, Graph};
use crate::error::{Error, Result};
use crate::neuralnet::Matrix;

const MEMBERSHIP_STREAM: u64 = 1;
const EDGE_STREAM: u64 = 2;
const FEATURE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_communities: usize,
    /// Fraction of nodes that receive a second community.
    pub overlap_fraction: f64,
    /// Edge probability for pairs sharing at least one community.
    pub p_in: f64,
    /// Edge probability for all other pairs.
    pub p_out: f64,
    pub dims_per_community: usize,
    /// Activation probability of a member's own community dimensions.
    pub feature_signal: f64,
    /// Activation probability everywhere else.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 500,
            n_communities: 4,
            overlap_fraction: 0.15,
            p_in: 0.08,
            p_out: 0.002,
            dims_per_community: 8,
            feature_signal: 0.3,
            feature_noise: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_nodes == 0 || self.n_communities == 0 || self.dims_per_community == 0 {
            return bad("node, community and feature-dimension counts must be at least 1");
        }
        if self.n_communities > self.n_nodes {
            return bad("more communities than nodes");
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return bad("edge probabilities must satisfy 0 <= p_out < p_in <= 1");
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return bad("overlap_fraction must lie in [0, 1]");
        }
        if self.overlap_fraction > 0.0 && self.n_communities < 2 {
            return bad("overlap needs at least two communities");
        }
        for p in [self.feature_signal, self.feature_noise] {
            if !(0.0..=1.0).contains(&p) {
                return bad("feature probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn n_overlapping(&self) -> usize {
        (self.overlap_fraction * self.n_nodes as f64).round() as usize
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `(graph, features, ground truth)`, fully determined by the config.
///
/// Node `v` has primary community `v * K / N` (contiguous, near-equal
/// blocks); a uniform subset of `round(overlap_fraction * N)` nodes gets one
/// extra community drawn uniformly from the others.
pub fn synth_graph(config: &SynthConfig) -> Result<(Graph, FeatureMatrix, Cover)> {
    config.validate()?;
    let n = config.n_nodes;
    let k = config.n_communities;

    let mut memberships: Vec<Vec<usize>> = (0..n).map(|v| vec![v * k / n]).collect();
    let mut rng = rng_for(config.seed, MEMBERSHIP_STREAM);
    let mut chosen = index::sample(&mut rng, n, config.n_overlapping()).into_vec();
    chosen.sort_unstable();
    for v in chosen {
        let primary = memberships[v][0];
        let mut second = rng.gen_range(0..k - 1);
        if second >= primary {
            second += 1;
        }
        memberships[v].push(second);
        memberships[v].sort_unstable();
    }
    let cover = Cover::from_memberships(k, memberships)?;

    let mut rng = rng_for(config.seed, EDGE_STREAM);
    let mut edges = Vec::new();
    for u in 0..n {
        let cu = cover.communities_of(u);
        for v in u + 1..n {
            let shared = cover.communities_of(v).iter().any(|c| cu.contains(c));
            let p = if shared { config.p_in } else { config.p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let dpc = config.dims_per_community;
    let mut rng = rng_for(config.seed, FEATURE_STREAM);
    let mut x = Matrix::zeros(n, k * dpc);
    for v in 0..n {
        let row = x.row_mut(v);
        for (col, value) in row.iter_mut().enumerate() {
            let p = if cover.contains(v, col / dpc) {
                config.feature_signal
            } else {
                config.feature_noise
            };
            if rng.gen::<f64>() < p {
                *value = 1.0;
            }
        }
    }
    Ok((graph, FeatureMatrix::new(x)?, cover))
}
