//! The predictor: a three-layer GCN fused with a single-layer, single-head
//! linear-attention graph transformer, followed by a linear head and a
//! logistic output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossMask;
use super::{Matrix, PropagationMatrix};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graphio::FeatureMatrix;

pub const GCN_LAYERS: usize = 3;

/// Affine map `x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Linear {
            weight: Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-bound..bound)),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn forward(&self, x: &Matrix, exec: Exec) -> Matrix {
        let mut y = x.matmul_with(&self.weight, exec);
        y.add_row_vector(&self.bias);
        y
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// All learnable weights plus the architecture switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `D x h` projection producing the transformer input `Z0`.
    pub input_proj: Linear,
    /// GCN layers with shapes `D x h`, `h x h`, `h x h`.
    pub gcn: Vec<Linear>,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    /// `h x K` output head.
    pub head: Linear,
    /// Apply the rectifier after the last GCN layer too.
    pub gcn_final_activation: bool,
}

/// Weights of the GCN/GT fusion and the attention residual. Fixed, not trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && (0.0..=1.0).contains(&self.gamma)) {
            return Err(Error::InvalidConfig(format!(
                "fusion needs alpha, beta >= 0 and gamma in [0, 1], got {self:?}"
            )));
        }
        Ok(())
    }
}

impl ModelParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases.
    pub fn init(features: usize, hidden: usize, communities: usize, seed: u64) -> Self {
        assert!(features > 0 && hidden > 0 && communities > 0, "dimensions must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_proj = Linear::uniform(features, hidden, &mut rng);
        let gcn = (0..GCN_LAYERS)
            .map(|l| Linear::uniform(if l == 0 { features } else { hidden }, hidden, &mut rng))
            .collect();
        ModelParams {
            input_proj,
            gcn,
            query: Linear::uniform(hidden, hidden, &mut rng),
            key: Linear::uniform(hidden, hidden, &mut rng),
            value: Linear::uniform(hidden, hidden, &mut rng),
            head: Linear::uniform(hidden, communities, &mut rng),
            gcn_final_activation: false,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let z = |l: &Linear| Linear::zeros(l.fan_in(), l.fan_out());
        ModelParams {
            input_proj: z(&self.input_proj),
            gcn: self.gcn.iter().map(z).collect(),
            query: z(&self.query),
            key: z(&self.key),
            value: z(&self.value),
            head: z(&self.head),
            gcn_final_activation: self.gcn_final_activation,
        }
    }

    pub fn features(&self) -> usize {
        self.input_proj.fan_in()
    }

    pub fn hidden(&self) -> usize {
        self.input_proj.fan_out()
    }

    pub fn communities(&self) -> usize {
        self.head.fan_out()
    }

    fn layers(&self) -> Vec<(String, &Linear)> {
        let mut v = vec![("input_proj".to_string(), &self.input_proj)];
        v.extend(self.gcn.iter().enumerate().map(|(i, l)| (format!("gcn{i}"), l)));
        v.push(("query".into(), &self.query));
        v.push(("key".into(), &self.key));
        v.push(("value".into(), &self.value));
        v.push(("head".into(), &self.head));
        v
    }

    /// Tensor names in the order of [`Self::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        self.layers()
            .into_iter()
            .flat_map(|(n, _)| [format!("{n}.weight"), format!("{n}.bias")])
            .collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .into_iter()
            .flat_map(|(_, l)| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in std::iter::once(&mut self.input_proj)
            .chain(self.gcn.iter_mut())
            .chain([&mut self.query, &mut self.key, &mut self.value, &mut self.head])
        {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_shapes(&self, x: &Matrix, p: Option<&PropagationMatrix>) -> Result<()> {
        let (d, h) = (self.features(), self.hidden());
        if x.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "features have {} columns, model expects {d}",
                x.cols()
            )));
        }
        if let Some(p) = p {
            if p.n() != x.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "propagation matrix is {0}x{0} but there are {1} feature rows",
                    p.n(),
                    x.rows()
                )));
            }
        }
        let ok = self.gcn.len() == GCN_LAYERS
            && self.gcn.iter().enumerate().all(|(l, g)| {
                g.fan_in() == if l == 0 { d } else { h } && g.fan_out() == h
            })
            && [&self.query, &self.key, &self.value]
                .iter()
                .all(|l| l.fan_in() == h && l.fan_out() == h)
            && self.head.fan_in() == h;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("inconsistent parameter shapes".into()))
        }
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cached activations of the GCN branch.
struct GcnCache {
    /// Layer inputs `Z^(l)`; `inputs[0]` is `X`.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    out: Matrix,
}

fn gcn_pass(params: &ModelParams, p: &PropagationMatrix, x: &Matrix, exec: Exec) -> Result<GcnCache> {
    let mut inputs = vec![x.clone()];
    let mut pre = Vec::with_capacity(GCN_LAYERS);
    for (l, layer) in params.gcn.iter().enumerate() {
        let t = inputs[l].matmul_with(&layer.weight, exec);
        let mut a = p.spmm_with(&t, exec);
        a.add_row_vector(&layer.bias);
        if !a.is_finite() {
            return Err(Error::NonFinite("GCN activations"));
        }
        let activate = l + 1 < GCN_LAYERS || params.gcn_final_activation;
        let z = if activate { a.map(relu) } else { a.clone() };
        pre.push(a);
        inputs.push(z);
    }
    let out = inputs.pop().expect("three layers");
    Ok(GcnCache { inputs, pre, out })
}

/// Cached intermediates of the linear-attention branch.
struct GtCache {
    z0: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    q_norm: f64,
    k_norm: f64,
    qt: Matrix,
    kt: Matrix,
    /// `K̃ᵀ 1`
    k_sum: Vec<f64>,
    /// `K̃ᵀ V`
    kv: Matrix,
    /// `V + Q̃ K̃ᵀV / N`
    num: Matrix,
    /// diagonal of `D`
    den: Vec<f64>,
    out: Matrix,
}

fn gt_pass(params: &ModelParams, x: &Matrix, gamma: f64, exec: Exec) -> Result<GtCache> {
    let n = x.rows();
    let z0 = params.input_proj.forward(x, exec);
    let q = params.query.forward(&z0, exec);
    let k = params.key.forward(&z0, exec);
    let v = params.value.forward(&z0, exec);
    let q_norm = q.frobenius_norm();
    let k_norm = k.frobenius_norm();
    if q_norm == 0.0 {
        return Err(Error::DegenerateProjection("query"));
    }
    if k_norm == 0.0 {
        return Err(Error::DegenerateProjection("key"));
    }
    let qt = q.scaled(1.0 / q_norm);
    let kt = k.scaled(1.0 / k_norm);
    let inv_n = 1.0 / n as f64;

    let k_sum = kt.col_sums();
    let kv = kt.t_matmul_with(&v, exec);
    let mut num = qt.matmul_with(&kv, exec);
    num.scale(inv_n);
    num.axpy(1.0, &v);
    let den: Vec<f64> = (0..n)
        .map(|i| 1.0 + inv_n * qt.row(i).iter().zip(&k_sum).map(|(a, b)| a * b).sum::<f64>())
        .collect();

    let mut out = Matrix::zeros(n, z0.cols());
    for i in 0..n {
        let scale = gamma / den[i];
        for ((o, &a), &r) in out.row_mut(i).iter_mut().zip(num.row(i)).zip(z0.row(i)) {
            *o = scale * a + (1.0 - gamma) * r;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("attention output"));
    }
    Ok(GtCache {
        z0,
        q,
        k,
        v,
        q_norm,
        k_norm,
        qt,
        kt,
        k_sum,
        kv,
        num,
        den,
        out,
    })
}

/// GCN branch embeddings `Z_GCN` (N x h).
pub fn gcn_forward(params: &ModelParams, p: &PropagationMatrix, x: &FeatureMatrix) -> Result<Matrix> {
    params.check_shapes(x.matrix(), Some(p))?;
    Ok(gcn_pass(params, p, x.matrix(), Exec::default())?.out)
}

/// Linear-attention branch embeddings `Z_GT` (N x h), computed in the
/// factored order `Q̃ (K̃ᵀ V)` without forming any N x N matrix.
pub fn gt_forward(params: &ModelParams, x: &FeatureMatrix, gamma: f64) -> Result<Matrix> {
    params.check_shapes(x.matrix(), None)?;
    Ok(gt_pass(params, x.matrix(), gamma, Exec::default())?.out)
}

/// Full forward pass with everything needed for backpropagation.
pub struct Forward {
    gcn: Option<GcnCache>,
    gt: Option<GtCache>,
    fused: Matrix,
    /// Community probabilities, N x K.
    pub probs: Matrix,
}

impl Forward {
    pub fn run(
        params: &ModelParams,
        fusion: &FusionParams,
        p: &PropagationMatrix,
        x: &Matrix,
        exec: Exec,
    ) -> Result<Self> {
        params.check_shapes(x, Some(p))?;
        fusion.validate()?;
        let n = x.rows();
        let h = params.hidden();
        // A zero-weighted branch is skipped outright.
        let gcn = (fusion.alpha != 0.0)
            .then(|| gcn_pass(params, p, x, exec))
            .transpose()?;
        let gt = (fusion.beta != 0.0)
            .then(|| gt_pass(params, x, fusion.gamma, exec))
            .transpose()?;
        let mut fused = Matrix::zeros(n, h);
        if let Some(c) = &gcn {
            fused.axpy(fusion.alpha, &c.out);
        }
        if let Some(c) = &gt {
            fused.axpy(fusion.beta, &c.out);
        }
        let probs = params.head.forward(&fused, exec).map(sigmoid);
        if !probs.is_finite() {
            return Err(Error::NonFinite("predictions"));
        }
        Ok(Forward { gcn, gt, fused, probs })
    }

    /// Gradients of the masked loss with respect to every parameter. The
    /// second value is the loss itself.
    pub fn backward(
        &self,
        params: &ModelParams,
        fusion: &FusionParams,
        p: &PropagationMatrix,
        x: &Matrix,
        mask: &LossMask,
        exec: Exec,
    ) -> (ModelParams, f64) {
        let (loss, g_logits) = mask.loss_and_logit_grad(&self.probs);
        let mut grads = params.zeros_like();

        grads.head.weight = self.fused.t_matmul_with(&g_logits, exec);
        grads.head.bias = g_logits.col_sums();
        let g_fused = g_logits.matmul_t_with(&params.head.weight, exec);

        if let Some(cache) = &self.gcn {
            let mut g = g_fused.scaled(fusion.alpha);
            for l in (0..GCN_LAYERS).rev() {
                let activated = l + 1 < GCN_LAYERS || params.gcn_final_activation;
                if activated {
                    for (gi, &a) in g.as_mut_slice().iter_mut().zip(cache.pre[l].as_slice()) {
                        if a <= 0.0 {
                            *gi = 0.0;
                        }
                    }
                }
                grads.gcn[l].bias = g.col_sums();
                let g_t = p.spmm_with(&g, exec);
                grads.gcn[l].weight = cache.inputs[l].t_matmul_with(&g_t, exec);
                if l > 0 {
                    g = g_t.matmul_t_with(&params.gcn[l].weight, exec);
                }
            }
        }

        if let Some(c) = &self.gt {
            gt_backward(params, fusion, c, &g_fused.scaled(fusion.beta), x, &mut grads, exec);
        }
        (grads, loss)
    }
}

fn gt_backward(
    params: &ModelParams,
    fusion: &FusionParams,
    c: &GtCache,
    g_out: &Matrix,
    x: &Matrix,
    grads: &mut ModelParams,
    exec: Exec,
) {
    let n = x.rows();
    let h = c.z0.cols();
    let inv_n = 1.0 / n as f64;
    let gamma = fusion.gamma;

    let mut g_z0 = g_out.scaled(1.0 - gamma);
    let mut g_num = Matrix::zeros(n, h);
    let mut g_den = vec![0.0; n];
    for i in 0..n {
        let d = c.den[i];
        let mut acc = 0.0;
        for ((gn, &go), &a) in g_num.row_mut(i).iter_mut().zip(g_out.row(i)).zip(c.num.row(i)) {
            *gn = gamma * go / d;
            acc += go * a;
        }
        g_den[i] = -gamma * acc / (d * d);
    }

    // num = V + Q̃ (K̃ᵀV) / N
    let mut g_v = g_num.clone();
    let mut g_qt = g_num.matmul_t_with(&c.kv, exec);
    g_qt.scale(inv_n);
    let mut g_kv = c.qt.t_matmul_with(&g_num, exec);
    g_kv.scale(inv_n);
    // K̃ᵀV
    let mut g_kt = c.v.matmul_t_with(&g_kv, exec);
    g_v.axpy(1.0, &c.kt.matmul_with(&g_kv, exec));
    // den_i = 1 + q̃_i · (K̃ᵀ1) / N
    let mut g_ksum = vec![0.0; h];
    for i in 0..n {
        let gd = g_den[i] * inv_n;
        for ((gq, &s), (gs, &q)) in g_qt
            .row_mut(i)
            .iter_mut()
            .zip(&c.k_sum)
            .zip(g_ksum.iter_mut().zip(c.qt.row(i)))
        {
            *gq += gd * s;
            *gs += gd * q;
        }
    }
    for i in 0..n {
        for (gk, &gs) in g_kt.row_mut(i).iter_mut().zip(&g_ksum) {
            *gk += gs;
        }
    }

    // Frobenius normalization: dL/dQ = (G̃ - Q̃ <G̃, Q̃>) / ‖Q‖.
    let unnormalize = |g_tilde: &Matrix, tilde: &Matrix, norm: f64| {
        let mut g = g_tilde.clone();
        g.axpy(-g_tilde.dot(tilde), tilde);
        g.scale(1.0 / norm);
        g
    };
    let g_q = unnormalize(&g_qt, &c.qt, c.q_norm);
    let g_k = unnormalize(&g_kt, &c.kt, c.k_norm);
    debug_assert_eq!(c.q.shape(), g_q.shape());
    debug_assert_eq!(c.k.shape(), g_k.shape());

    for (g, layer, grad) in [
        (&g_q, &params.query, &mut grads.query),
        (&g_k, &params.key, &mut grads.key),
        (&g_v, &params.value, &mut grads.value),
    ] {
        grad.weight = c.z0.t_matmul_with(g, exec);
        grad.bias = g.col_sums();
        g_z0.axpy(1.0, &g.matmul_t_with(&layer.weight, exec));
    }
    grads.input_proj.weight = x.t_matmul_with(&g_z0, exec);
    grads.input_proj.bias = g_z0.col_sums();
}

/// Community probabilities `logistic(head(α Z_GCN + β Z_GT))`, N x K.
pub fn predict(
    params: &ModelParams,
    fusion: &FusionParams,
    p: &PropagationMatrix,
    x: &FeatureMatrix,
) -> Result<Matrix> {
    Ok(Forward::run(params, fusion, p, x.matrix(), Exec::default())?.probs)
}
