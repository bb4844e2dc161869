//! Overlapping normalized mutual information between covers.
//!
//! Each community is a binary variable over the nodes. For every community
//! `X_i` the conditional entropy `H(X_i | Y)` is the smallest `H(X_i | Y_j)`
//! among the `Y_j` that pass the lack-of-information check
//! `h(a) + h(d) >= h(b) + h(c)` on the 2x2 contingency counts, falling back
//! to `H(X_i)`. The score is the symmetrized mutual information divided by
//! `max(H(X), H(Y))`. Entropies use natural logs with `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::Cover;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub onmi: f64,
    /// Non-empty communities in the predicted cover.
    pub n_pred_communities: usize,
    /// Predicted nodes with no community.
    pub n_unassigned: usize,
}

/// `-p ln p` with `p = count / n`.
fn h(count: f64, n: f64) -> f64 {
    if count <= 0.0 {
        0.0
    } else {
        let p = count / n;
        -p * p.ln()
    }
}

struct Side {
    sizes: Vec<f64>,
    /// Community id -> dense index among non-empty communities.
    dense: Vec<Option<usize>>,
}

impl Side {
    fn new(cover: &Cover) -> Self {
        let mut sizes = vec![0usize; cover.n_communities()];
        for row in cover.rows() {
            for &c in row {
                sizes[c] += 1;
            }
        }
        let mut dense = vec![None; sizes.len()];
        let mut kept = Vec::new();
        for (c, &s) in sizes.iter().enumerate() {
            if s > 0 {
                dense[c] = Some(kept.len());
                kept.push(s as f64);
            }
        }
        Side { sizes: kept, dense }
    }

    fn entropy(&self, i: usize, n: f64) -> f64 {
        h(self.sizes[i], n) + h(n - self.sizes[i], n)
    }
}

/// `Σ_i H(X_i | Y)` given the overlap counts `inter[i][j] = |X_i ∩ Y_j|`.
fn conditional_entropy(x: &Side, y: &Side, inter: &dyn Fn(usize, usize) -> f64, n: f64) -> f64 {
    (0..x.sizes.len())
        .map(|i| {
            let hx = x.entropy(i, n);
            let mut best = hx;
            for j in 0..y.sizes.len() {
                let d = inter(i, j);
                let c = x.sizes[i] - d;
                let b = y.sizes[j] - d;
                let a = n - x.sizes[i] - y.sizes[j] + d;
                if h(a, n) + h(d, n) >= h(b, n) + h(c, n) {
                    let joint = h(a, n) + h(b, n) + h(c, n) + h(d, n);
                    let hy = h(b + d, n) + h(a + c, n);
                    best = best.min(joint - hy);
                }
            }
            best
        })
        .sum()
}

/// Overlapping NMI in `[0, 1]`; symmetric in its arguments.
pub fn onmi(x: &Cover, y: &Cover) -> Result<f64> {
    if x.n_nodes() != y.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "covers have {} and {} nodes",
            x.n_nodes(),
            y.n_nodes()
        )));
    }
    let n = x.n_nodes() as f64;
    let sx = Side::new(x);
    let sy = Side::new(y);
    if sx.sizes.is_empty() || sy.sizes.is_empty() {
        return Ok(0.0);
    }

    let (kx, ky) = (sx.sizes.len(), sy.sizes.len());
    let mut inter = vec![0.0; kx * ky];
    for (rx, ry) in x.rows().iter().zip(y.rows()) {
        for &cx in rx {
            let i = sx.dense[cx].expect("member of an empty community");
            for &cy in ry {
                let j = sy.dense[cy].expect("member of an empty community");
                inter[i * ky + j] += 1.0;
            }
        }
    }

    let hx: f64 = (0..kx).map(|i| sx.entropy(i, n)).sum();
    let hy: f64 = (0..ky).map(|j| sy.entropy(j, n)).sum();
    let max = hx.max(hy);
    if max == 0.0 {
        // Only whole-graph communities on both sides.
        return Ok(1.0);
    }
    let hx_given_y = conditional_entropy(&sx, &sy, &|i, j| inter[i * ky + j], n);
    let hy_given_x = conditional_entropy(&sy, &sx, &|j, i| inter[i * ky + j], n);
    let mutual = 0.5 * ((hx - hx_given_y) + (hy - hy_given_x));
    Ok((mutual / max).clamp(0.0, 1.0))
}

/// ONMI plus summary counts for a predicted cover against the truth.
pub fn evaluate(predicted: &Cover, truth: &Cover) -> Result<MetricReport> {
    Ok(MetricReport {
        onmi: onmi(predicted, truth)?,
        n_pred_communities: predicted.members().iter().filter(|m| !m.is_empty()).count(),
        n_unassigned: predicted.rows().iter().filter(|r| r.is_empty()).count(),
    })
}
