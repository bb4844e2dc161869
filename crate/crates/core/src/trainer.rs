//! Two-round training: clique pseudo-labels, initial training, pseudo-label
//! refresh from the trained model, refined training.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cliquefind::identify_weak_cliques;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graphio::{sample_labels, write_cover, Cover, FeatureMatrix, Graph, SampledLabels};
use crate::metrics::evaluate;
use crate::neuralnet::{gcn_norm, Adam, Checkpoint, Forward, FusionParams, LossMask, Matrix, ModelParams, PropagationMatrix};
use crate::pseudolabel::{construct_pseudo_labels, pseudo_coverage, refresh_pseudo_labels, union_covers, PseudoConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the true-label loss term.
    pub lambda1: f64,
    /// Weight of the pseudo-label loss term.
    pub lambda2: f64,
    pub epochs_initial: usize,
    pub epochs_refined: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    pub fusion: FusionParams,
    pub pseudo: PseudoConfig,
    pub binarize_threshold: f64,
    /// Fraction of nodes whose true rows are revealed.
    pub rho: f64,
    pub gcn_final_activation: bool,
    /// Keep the lowest-training-loss parameters of the initial round instead
    /// of the last ones.
    pub select_best_by_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 1.0,
            epochs_initial: 150,
            epochs_refined: 150,
            lr: 1e-3,
            seed: 0,
            hidden: 256,
            fusion: FusionParams::default(),
            pseudo: PseudoConfig::default(),
            binarize_threshold: 0.5,
            rho: 0.1,
            gcn_final_activation: false,
            select_best_by_loss: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_communities: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative".into());
        }
        if self.epochs_initial == 0 {
            return bad("epochs_initial must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1".into());
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return bad("binarize_threshold must be in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must be in [0, 1]".into());
        }
        self.fusion.validate()?;
        self.pseudo.validate(n_communities)
    }

    /// Splits a total epoch budget evenly across the two rounds.
    pub fn with_total_epochs(mut self, total: usize) -> Self {
        self.epochs_initial = total.div_ceil(2);
        self.epochs_refined = total / 2;
        self
    }

    fn stream_seed(&self, stream: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.next_u64()
    }

    pub fn sampling_seed(&self) -> u64 {
        self.stream_seed(1)
    }

    pub fn init_seed(&self) -> u64 {
        self.stream_seed(2)
    }
}

/// Named ablation configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Full,
    /// Trained on true labels only, single round.
    NoPseudo,
    /// Transformer branch disabled.
    GcnOnly,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Full, Arm::NoPseudo, Arm::GcnOnly];

    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            Arm::Full => {}
            Arm::NoPseudo => {
                c.lambda2 = 0.0;
                c.epochs_refined = 0;
            }
            Arm::GcnOnly => c.fusion.beta = 0.0,
        }
        c
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::NoPseudo => "no-pseudo",
            Arm::GcnOnly => "gcn-only",
        }
    }

    pub fn parse(name: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.name() == name)
    }
}

/// Membership iff probability `>= threshold`.
pub fn binarize(probs: &Matrix, threshold: f64) -> Cover {
    let (n, k) = probs.shape();
    let grid: Vec<bool> = probs.as_slice().iter().map(|&p| p >= threshold).collect();
    Cover::from_dense(n, k, &grid)
}

/// Everything a training round needs besides the parameters.
struct Problem<'a> {
    prop: &'a PropagationMatrix,
    x: &'a Matrix,
    fusion: FusionParams,
    exec: Exec,
}

impl Problem<'_> {
    fn forward(&self, params: &ModelParams, phase: &'static str, epoch: usize) -> Result<Forward> {
        Forward::run(params, &self.fusion, self.prop, self.x, self.exec).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence {
                phase,
                epoch,
                loss: f64::NAN,
            },
            other => other,
        })
    }

    fn predict(&self, params: &ModelParams) -> Result<Matrix> {
        Ok(Forward::run(params, &self.fusion, self.prop, self.x, self.exec)?.probs)
    }

    /// Full-batch Adam for `epochs` epochs; returns the loss before each update.
    /// With `keep_best`, `params` ends at the lowest-loss iterate seen.
    fn train(
        &self,
        params: &mut ModelParams,
        mask: &LossMask,
        lr: f64,
        epochs: usize,
        keep_best: bool,
        phase: &'static str,
    ) -> Result<Vec<f64>> {
        let mut adam = Adam::new(params, lr);
        let mut trace = Vec::with_capacity(epochs);
        let mut best: Option<(f64, ModelParams)> = None;
        for epoch in 0..epochs {
            let fwd = self.forward(params, phase, epoch)?;
            let (grads, loss) = fwd.backward(params, &self.fusion, self.prop, self.x, mask, self.exec);
            if !loss.is_finite() {
                return Err(Error::Divergence { phase, epoch, loss });
            }
            trace.push(loss);
            if keep_best && best.as_ref().is_none_or(|(l, _)| loss < *l) {
                best = Some((loss, params.clone()));
            }
            adam.step(params, &grads);
            if !params.is_finite() {
                return Err(Error::Divergence { phase, epoch, loss });
            }
        }
        if let Some((_, p)) = best {
            *params = p;
        }
        Ok(trace)
    }
}

fn model_for(config: &TrainConfig, features: usize, communities: usize) -> ModelParams {
    let mut p = ModelParams::init(features, config.hidden, communities, config.init_seed());
    p.gcn_final_activation = config.gcn_final_activation;
    p
}

fn check_inputs(graph: &Graph, x: &FeatureMatrix, sampled: &SampledLabels) -> Result<()> {
    if x.n_rows() != graph.n_nodes() || sampled.n_nodes() != graph.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes, features {} rows, labels {} rows",
            graph.n_nodes(),
            x.n_rows(),
            sampled.n_nodes()
        )));
    }
    if x.dims() == 0 || sampled.n_communities() == 0 {
        return Err(Error::ShapeMismatch("need at least one feature and one community".into()));
    }
    Ok(())
}

/// First round: fresh parameters trained against true rows and the clique
/// pseudo cover. Returns the final-epoch parameters (or the lowest-loss ones
/// with `select_best_by_loss`) and the per-epoch loss.
pub fn initial_training(
    graph: &Graph,
    x: &FeatureMatrix,
    sampled: &SampledLabels,
    pseudo: &Cover,
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    check_inputs(graph, x, sampled)?;
    config.validate(sampled.n_communities())?;
    let prop = gcn_norm(graph);
    let problem = Problem {
        prop: &prop,
        x: x.matrix(),
        fusion: config.fusion,
        exec: Exec::default(),
    };
    let mask = LossMask::new(sampled, pseudo, config.lambda1, config.lambda2)?;
    let mut params = model_for(config, x.dims(), sampled.n_communities());
    let trace = problem.train(
        &mut params,
        &mask,
        config.lr,
        config.epochs_initial,
        config.select_best_by_loss,
        "initial",
    )?;
    Ok((params, trace))
}

#[derive(Debug, Clone)]
pub struct RefinedOutcome {
    pub params: ModelParams,
    /// Binarized predictions of the final parameters.
    pub final_cover: Cover,
    /// Pseudo cover used for the refined round.
    pub pseudo: Cover,
    pub n_pseudo_refined: usize,
    pub loss_trace: Vec<f64>,
}

/// Second round: pseudo-labels regenerated from the initial model at the
/// confidence threshold, then the same parameters trained further.
/// `clique_pseudo` is only consulted when `union_on_refresh` is set.
pub fn refined_training(
    graph: &Graph,
    x: &FeatureMatrix,
    sampled: &SampledLabels,
    initial: ModelParams,
    clique_pseudo: Option<&Cover>,
    config: &TrainConfig,
) -> Result<RefinedOutcome> {
    check_inputs(graph, x, sampled)?;
    config.validate(sampled.n_communities())?;
    let prop = gcn_norm(graph);
    let problem = Problem {
        prop: &prop,
        x: x.matrix(),
        fusion: config.fusion,
        exec: Exec::default(),
    };
    let mut params = initial;
    let probs = problem.predict(&params)?;
    let mut pseudo = refresh_pseudo_labels(&probs, sampled, config.pseudo.threshold)?;
    if config.pseudo.union_on_refresh {
        if let Some(prev) = clique_pseudo {
            pseudo = union_covers(&pseudo, prev)?;
        }
    }
    let n_pseudo_refined = pseudo_coverage(&pseudo, sampled);

    let mask = LossMask::new(sampled, &pseudo, config.lambda1, config.lambda2)?;
    let loss_trace = if config.epochs_refined > 0 {
        problem.train(&mut params, &mask, config.lr, config.epochs_refined, false, "refined")?
    } else {
        Vec::new()
    };
    let final_cover = binarize(&problem.predict(&params)?, config.binarize_threshold);
    Ok(RefinedOutcome {
        params,
        final_cover,
        pseudo,
        n_pseudo_refined,
        loss_trace,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub pseudo_init_secs: f64,
    pub initial_secs: f64,
    pub refined_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub rho: f64,
    /// ONMI of the final cover against the truth.
    pub onmi: f64,
    /// ONMI of the initial-round model's binarized predictions.
    pub onmi_initial: f64,
    pub n_sampled: usize,
    pub n_cliques: usize,
    pub n_pseudo_initial: usize,
    pub n_pseudo_refined: usize,
    pub n_pred_communities: usize,
    pub n_unassigned: usize,
    pub loss_trace_initial: Vec<f64>,
    pub loss_trace_refined: Vec<f64>,
    pub wall_time: PhaseTimes,
}

impl RunReport {
    /// The report with timings zeroed; everything else is deterministic.
    pub fn without_timings(&self) -> RunReport {
        RunReport {
            wall_time: PhaseTimes::default(),
            ..self.clone()
        }
    }

    pub const CSV_HEADER: &'static str =
        "seed,rho,onmi_pct,onmi_initial_pct,n_sampled,n_cliques,n_pseudo_initial,n_pseudo_refined";

    /// Flat CSV row with ONMI as a percentage to one decimal.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{:.1},{:.1},{},{},{},{}",
            self.seed,
            self.rho,
            self.onmi * 100.0,
            self.onmi_initial * 100.0,
            self.n_sampled,
            self.n_cliques,
            self.n_pseudo_initial,
            self.n_pseudo_refined
        );
        s
    }
}

pub struct PipelineOutput {
    pub report: RunReport,
    pub final_cover: Cover,
    pub params: ModelParams,
}

/// Runs sampling, weak cliques, clique pseudo-labels, both training rounds
/// and evaluation. With `persist`, every stage output is written there.
pub fn run_pipeline_with(
    graph: &Graph,
    x: &FeatureMatrix,
    truth: &Cover,
    config: &TrainConfig,
    persist: Option<&Path>,
) -> Result<PipelineOutput> {
    if truth.n_nodes() != graph.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "truth has {} nodes, graph {}",
            truth.n_nodes(),
            graph.n_nodes()
        )));
    }
    config
        .validate(truth.n_communities())
        .map_err(|e| e.in_stage("config"))?;
    let k = truth.n_communities();

    let t0 = Instant::now();
    let sampled = sample_labels(truth, config.rho, config.sampling_seed()).map_err(|e| e.in_stage("sampling"))?;
    let cliques = identify_weak_cliques(graph);
    let clique_pseudo = construct_pseudo_labels(&cliques, &sampled, k, config.pseudo.retained)
        .map_err(|e| e.in_stage("pseudo-label initialization"))?;
    let n_pseudo_initial = pseudo_coverage(&clique_pseudo, &sampled);
    let pseudo_init_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (initial, loss_trace_initial) = initial_training(graph, x, &sampled, &clique_pseudo, config)
        .map_err(|e| e.in_stage("initial training"))?;
    let prop = gcn_norm(graph);
    let initial_probs = Forward::run(&initial, &config.fusion, &prop, x.matrix(), Exec::default())
        .map_err(|e| e.in_stage("initial evaluation"))?
        .probs;
    let onmi_initial = evaluate(&binarize(&initial_probs, config.binarize_threshold), truth)?.onmi;
    let initial_secs = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let refined = refined_training(graph, x, &sampled, initial, Some(&clique_pseudo), config)
        .map_err(|e| e.in_stage("refined training"))?;
    let refined_secs = t2.elapsed().as_secs_f64();
    let metrics = evaluate(&refined.final_cover, truth)?;

    if let Some(dir) = persist {
        let stage = |e: Error| e.in_stage("persist");
        std::fs::create_dir_all(dir).map_err(|e| stage(Error::io(dir, e)))?;
        let sampled_cover = Cover::from_memberships(
            k,
            (0..graph.n_nodes())
                .map(|v| sampled.row_of(v).map(<[usize]>::to_vec).unwrap_or_default())
                .collect(),
        )?;
        write_cover(&sampled_cover, dir.join("sampled.cover")).map_err(stage)?;
        let cliques_path = dir.join("cliques.txt");
        std::fs::write(&cliques_path, cliques.to_text()).map_err(|e| stage(Error::io(&cliques_path, e)))?;
        write_cover(&clique_pseudo, dir.join("pseudo_initial.cover")).map_err(stage)?;
        write_cover(&refined.pseudo, dir.join("pseudo_refined.cover")).map_err(stage)?;
        write_cover(&refined.final_cover, dir.join("final.cover")).map_err(stage)?;
        Checkpoint::new(refined.params.clone(), config.seed)
            .save(dir.join("model.json"))
            .map_err(stage)?;
    }

    let report = RunReport {
        seed: config.seed,
        rho: config.rho,
        onmi: metrics.onmi,
        onmi_initial,
        n_sampled: sampled.len(),
        n_cliques: cliques.len(),
        n_pseudo_initial,
        n_pseudo_refined: refined.n_pseudo_refined,
        n_pred_communities: metrics.n_pred_communities,
        n_unassigned: metrics.n_unassigned,
        loss_trace_initial,
        loss_trace_refined: refined.loss_trace,
        wall_time: PhaseTimes {
            pseudo_init_secs,
            initial_secs,
            refined_secs,
        },
    };
    Ok(PipelineOutput {
        report,
        final_cover: refined.final_cover,
        params: refined.params,
    })
}

pub fn run_pipeline(graph: &Graph, x: &FeatureMatrix, truth: &Cover, config: &TrainConfig) -> Result<RunReport> {
    Ok(run_pipeline_with(graph, x, truth, config, None)?.report)
}

/// Runs independent pipeline configurations, possibly in parallel. Results
/// come back in input order.
pub fn run_sweep(
    graph: &Graph,
    x: &FeatureMatrix,
    truth: &Cover,
    cells: &[TrainConfig],
    exec: Exec,
) -> Vec<Result<RunReport>> {
    exec.map_indices(cells.len(), |i| run_pipeline(graph, x, truth, &cells[i]))
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
