use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Cover, SampledLabels};
use crate::error::{Error, Result};

/// Per-community quota `ceil(rho * N / K)`.
pub fn quota(n_nodes: usize, n_communities: usize, rho: f64) -> usize {
    if n_communities == 0 || rho <= 0.0 {
        return 0;
    }
    // Guard against products like 0.1 * 30 landing a hair above an integer.
    let raw = rho * n_nodes as f64 / n_communities as f64;
    (raw - 1e-9).ceil().max(0.0) as usize
}

/// Draws an equal number of members from every community, uniformly without
/// replacement, and reveals the full ground-truth row of each drawn node.
/// A node drawn through several communities is kept once; communities
/// smaller than the quota contribute all their members.
pub fn sample_labels(cover: &Cover, rho: f64, seed: u64) -> Result<SampledLabels> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("sampling ratio {rho} outside [0, 1]")));
    }
    let q = quota(cover.n_nodes(), cover.n_communities(), rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for members in cover.members() {
        let take = q.min(members.len());
        picked.extend(
            index::sample(&mut rng, members.len(), take)
                .into_iter()
                .map(|i| members[i]),
        );
    }
    SampledLabels::from_cover(cover, picked)
}
