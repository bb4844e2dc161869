//! Linear algebra, the GCN + linear-attention predictor, the dual BCE loss,
//! exact gradients and Adam.

mod adam;
mod checkpoint;
mod loss;
mod matrix;
mod model;
mod sparse;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use loss::{loss, LossMask, EPS};
pub use matrix::Matrix;
pub use model::{gcn_forward, gt_forward, predict, FusionParams, Forward, Linear, ModelParams, GCN_LAYERS};
pub use sparse::{gcn_norm, PropagationMatrix};

use crate::error::Result;
use crate::exec::Exec;
use crate::graphio::{Cover, FeatureMatrix, SampledLabels};

pub fn init_params(features: usize, hidden: usize, communities: usize, seed: u64) -> ModelParams {
    ModelParams::init(features, hidden, communities, seed)
}

/// Analytic gradients of the dual BCE loss with respect to every parameter,
/// together with the loss value.
#[allow(clippy::too_many_arguments)]
pub fn gradients(
    params: &ModelParams,
    fusion: &FusionParams,
    p: &PropagationMatrix,
    x: &FeatureMatrix,
    sampled: &SampledLabels,
    pseudo: &Cover,
    lambda_true: f64,
    lambda_pseudo: f64,
) -> Result<(ModelParams, f64)> {
    let mask = LossMask::new(sampled, pseudo, lambda_true, lambda_pseudo)?;
    let fwd = Forward::run(params, fusion, p, x.matrix(), Exec::default())?;
    Ok(fwd.backward(params, fusion, p, x.matrix(), &mask, Exec::default()))
}
