//! Dual binary cross-entropy over true-labeled and pseudo-labeled rows.

use super::Matrix;
use crate::error::{Error, Result};
use crate::graphio::{Cover, SampledLabels};

/// Predictions are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

/// Which rows enter which loss term, with their targets and weights.
///
/// The true-label term covers exactly the sampled nodes; the pseudo term
/// covers exactly the non-sampled nodes with a non-empty pseudo row. Each
/// term is a mean over its own `rows x K` grid.
#[derive(Debug, Clone)]
pub struct LossMask {
    n_nodes: usize,
    n_communities: usize,
    sampled: Vec<(usize, Vec<usize>)>,
    pseudo: Vec<(usize, Vec<usize>)>,
    lambda_true: f64,
    lambda_pseudo: f64,
}

impl LossMask {
    pub fn new(
        sampled: &SampledLabels,
        pseudo: &Cover,
        lambda_true: f64,
        lambda_pseudo: f64,
    ) -> Result<Self> {
        if pseudo.n_nodes() != sampled.n_nodes() || pseudo.n_communities() != sampled.n_communities() {
            return Err(Error::ShapeMismatch(format!(
                "pseudo cover is {}x{}, sampled labels are {}x{}",
                pseudo.n_nodes(),
                pseudo.n_communities(),
                sampled.n_nodes(),
                sampled.n_communities()
            )));
        }
        if !(lambda_true >= 0.0 && lambda_pseudo >= 0.0) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        let sampled_rows = sampled.iter().map(|(v, r)| (v, r.to_vec())).collect();
        let pseudo_rows = (0..pseudo.n_nodes())
            .filter(|&v| !sampled.contains(v) && !pseudo.communities_of(v).is_empty())
            .map(|v| (v, pseudo.communities_of(v).to_vec()))
            .collect();
        Ok(LossMask {
            n_nodes: sampled.n_nodes(),
            n_communities: sampled.n_communities(),
            sampled: sampled_rows,
            pseudo: pseudo_rows,
            lambda_true,
            lambda_pseudo,
        })
    }

    pub fn sampled_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.sampled.iter().map(|(v, _)| *v)
    }

    pub fn pseudo_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.pseudo.iter().map(|(v, _)| *v)
    }

    pub fn n_pseudo(&self) -> usize {
        self.pseudo.len()
    }

    fn terms(&self) -> [(&[(usize, Vec<usize>)], f64); 2] {
        [
            (&self.sampled, self.lambda_true),
            (&self.pseudo, self.lambda_pseudo),
        ]
    }

    fn check(&self, probs: &Matrix) {
        assert_eq!(probs.shape(), (self.n_nodes, self.n_communities), "prediction shape");
    }

    pub fn loss(&self, probs: &Matrix) -> f64 {
        self.check(probs);
        let k = self.n_communities;
        let mut total = 0.0;
        for (rows, lambda) in self.terms() {
            if rows.is_empty() || k == 0 {
                continue;
            }
            let mut sum = 0.0;
            for (v, labels) in rows {
                for (c, &p) in probs.row(*v).iter().enumerate() {
                    let p = p.clamp(EPS, 1.0 - EPS);
                    sum -= if labels.binary_search(&c).is_ok() {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    };
                }
            }
            total += lambda * sum / (rows.len() * k) as f64;
        }
        total
    }

    /// Loss plus its gradient with respect to the pre-logistic logits. The
    /// clamp is flat outside `[EPS, 1 - EPS]`, so clamped entries get zero.
    pub fn loss_and_logit_grad(&self, probs: &Matrix) -> (f64, Matrix) {
        let loss = self.loss(probs);
        let k = self.n_communities;
        let mut grad = Matrix::zeros(self.n_nodes, k);
        for (rows, lambda) in self.terms() {
            if rows.is_empty() || k == 0 {
                continue;
            }
            let w = lambda / (rows.len() * k) as f64;
            for (v, labels) in rows {
                for (c, (g, &p)) in grad.row_mut(*v).iter_mut().zip(probs.row(*v)).enumerate() {
                    if (EPS..=1.0 - EPS).contains(&p) {
                        let y = if labels.binary_search(&c).is_ok() { 1.0 } else { 0.0 };
                        *g += w * (p - y);
                    }
                }
            }
        }
        (loss, grad)
    }
}

fn check_probabilities(probs: &Matrix) -> Result<()> {
    for i in 0..probs.rows() {
        for (j, &value) in probs.row(i).iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { row: i, col: j, value });
            }
        }
    }
    Ok(())
}

/// `λ1 · BCE(sampled rows) + λ2 · BCE(pseudo-labeled non-sampled rows)`.
pub fn loss(
    probs: &Matrix,
    sampled: &SampledLabels,
    pseudo: &Cover,
    lambda_true: f64,
    lambda_pseudo: f64,
) -> Result<f64> {
    check_probabilities(probs)?;
    let mask = LossMask::new(sampled, pseudo, lambda_true, lambda_pseudo)?;
    if probs.shape() != (sampled.n_nodes(), sampled.n_communities()) {
        return Err(Error::ShapeMismatch("prediction matrix shape".into()));
    }
    Ok(mask.loss(probs))
}
