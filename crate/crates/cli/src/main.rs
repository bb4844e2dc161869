//! `wocd`: synthetic benchmarks, weak cliques, pseudo-labels, training,
//! evaluation and ablation sweeps from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 parse, 5 configuration or
//! inconsistent inputs, 6 numerical failure during training.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wocd_core::cliquefind::identify_weak_cliques;
use wocd_core::graphio::{
    load_cover, load_edge_list, load_features, sample_labels, synth_graph, write_cover, write_edge_list,
    write_features, Cover, FeatureMatrix, Graph, SynthConfig,
};
use wocd_core::metrics::evaluate;
use wocd_core::pseudolabel::{construct_pseudo_labels, pseudo_coverage};
use wocd_core::trainer::{mean_std, run_pipeline_with, run_sweep, Arm, RunReport, TrainConfig};
use wocd_core::{Error, Exec};

const EXIT_IO: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_CONFIG: u8 = 5;
const EXIT_NUMERIC: u8 = 6;

#[derive(Parser)]
#[command(name = "wocd", version, about = "Semi-supervised overlapping community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted overlapping benchmark: edges.tsv, features.csv,
    /// cover.txt and manifest.json.
    Synth(SynthArgs),
    /// Print the weak cliques of a graph, one `u v: members` line each.
    Cliques(CliquesArgs),
    /// Build clique-vote pseudo-labels from a sample of the true cover.
    Pseudo(PseudoArgs),
    /// Run the full two-round pipeline and evaluate against the true cover.
    Train(TrainArgs),
    /// Score a predicted cover against a reference cover.
    Eval(EvalArgs),
    /// Run a grid of (arm, rho, seed) cells and write a CSV summary.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    communities: usize,
    /// Fraction of nodes given a second community.
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    dims_per_community: Option<usize>,
    #[arg(long)]
    feature_signal: Option<f64>,
    #[arg(long)]
    feature_noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CliquesArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PseudoArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Full true cover; a per-community sample of it is revealed.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Communities kept per clique.
    #[arg(long, default_value_t = 1)]
    retained: usize,
    /// Pseudo cover output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// The feature CSV starts with a header line.
    #[arg(long)]
    features_header: bool,
    #[arg(long)]
    truth: PathBuf,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args, Default)]
struct ConfigFlags {
    /// JSON file with any subset of the training configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Total epochs, split evenly between the two rounds.
    #[arg(long, conflicts_with_all = ["epochs_initial", "epochs_refined"])]
    epochs: Option<usize>,
    #[arg(long)]
    epochs_initial: Option<usize>,
    #[arg(long)]
    epochs_refined: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    retained: Option<usize>,
    /// Confidence needed for a prediction to become a refreshed pseudo-label.
    #[arg(long)]
    threshold: Option<f64>,
    /// Keep the clique pseudo-labels alongside the refreshed ones.
    #[arg(long)]
    union_on_refresh: bool,
    #[arg(long)]
    binarize_threshold: Option<f64>,
    #[arg(long)]
    gcn_final_activation: bool,
    #[arg(long)]
    select_best_by_loss: bool,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                serde_json::from_str::<TrainConfig>(&text)
                    .map_err(Error::from)
                    .with_context(|| format!("reading config {}", path.display()))?
            }
            None => TrainConfig::default(),
        };
        if let Some(total) = self.epochs {
            c = c.with_total_epochs(total);
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v; })*
            };
        }
        set!(
            lambda1 => lambda1,
            lambda2 => lambda2,
            epochs_initial => epochs_initial,
            epochs_refined => epochs_refined,
            lr => lr,
            hidden => hidden,
            alpha => fusion.alpha,
            beta => fusion.beta,
            gamma => fusion.gamma,
            retained => pseudo.retained,
            threshold => pseudo.threshold,
            binarize_threshold => binarize_threshold,
        );
        c.pseudo.union_on_refresh |= self.union_on_refresh;
        c.gcn_final_activation |= self.gcn_final_activation;
        c.select_best_by_loss |= self.select_best_by_loss;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Output directory for report.json, final.cover and intermediate files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Comma-separated arms: full, no-pseudo, gcn-only.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    arms: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Run cells one at a time.
    #[arg(long)]
    sequential: bool,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// The graph, widened to the truth's node count when trailing nodes are
/// isolated and the edge file has no `#nodes=` header.
fn load_graph(path: &Path, n_nodes: usize) -> Result<Graph> {
    let g = load_edge_list(path)?;
    if g.n_nodes() > n_nodes {
        return Err(Error::NodeOutOfRange {
            id: g.n_nodes() - 1,
            n_nodes,
        }
        .into());
    }
    if g.n_nodes() == n_nodes {
        return Ok(g);
    }
    Ok(Graph::from_edges(n_nodes, g.edges())?)
}

fn load_inputs(input: &InputArgs) -> Result<(Graph, FeatureMatrix, Cover)> {
    let truth = load_cover(&input.truth)?;
    let graph = load_graph(&input.edges, truth.n_nodes())?;
    let x = load_features(&input.features, input.features_header, Some(truth.n_nodes()))?;
    Ok((graph, x, truth))
}

fn synth(args: SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_nodes: args.nodes,
        n_communities: args.communities,
        overlap_fraction: args.overlap.unwrap_or(d.overlap_fraction),
        p_in: args.p_in.unwrap_or(d.p_in),
        p_out: args.p_out.unwrap_or(d.p_out),
        dims_per_community: args.dims_per_community.unwrap_or(d.dims_per_community),
        feature_signal: args.feature_signal.unwrap_or(d.feature_signal),
        feature_noise: args.feature_noise.unwrap_or(d.feature_noise),
        seed: args.seed,
    };
    let (graph, x, cover) = synth_graph(&config)?;
    create_dir(&args.out)?;
    write_edge_list(&graph, args.out.join("edges.tsv"))?;
    write_features(&x, args.out.join("features.csv"))?;
    write_cover(&cover, args.out.join("cover.txt"))?;
    write_json(&args.out.join("manifest.json"), &config)
}

fn cliques(args: CliquesArgs) -> Result<()> {
    let graph = load_edge_list(&args.edges)?;
    let text = identify_weak_cliques(&graph).to_text();
    match args.out {
        Some(path) => write_text(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PseudoStats {
    n_pseudo: usize,
    cliques_used: usize,
    n_cliques: usize,
    n_sampled: usize,
}

fn pseudo(args: PseudoArgs) -> Result<()> {
    let truth = load_cover(&args.truth)?;
    let graph = load_graph(&args.edges, truth.n_nodes())?;
    let config = TrainConfig {
        seed: args.seed,
        rho: args.rho,
        ..TrainConfig::default()
    };
    config.validate(truth.n_communities())?;
    let sampled = sample_labels(&truth, args.rho, config.sampling_seed())?;
    let cliques = identify_weak_cliques(&graph);
    let cover = construct_pseudo_labels(&cliques, &sampled, truth.n_communities(), args.retained)?;
    let cliques_used = cliques
        .cliques()
        .iter()
        .filter(|c| c.members.iter().any(|&m| sampled.row_of(m).is_some_and(|r| !r.is_empty())))
        .count();
    write_cover(&cover, &args.out)?;
    let stats = PseudoStats {
        n_pseudo: pseudo_coverage(&cover, &sampled),
        cliques_used,
        n_cliques: cliques.len(),
        n_sampled: sampled.len(),
    };
    println!("{}", serde_json::to_string(&stats).map_err(Error::from)?);
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = args.flags.resolve()?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(rho) = args.rho {
        config.rho = rho;
    }
    let (graph, x, truth) = load_inputs(&args.input)?;
    create_dir(&args.out)?;
    let out = run_pipeline_with(&graph, &x, &truth, &config, Some(&args.out))?;
    write_json(&args.out.join("report.json"), &out.report)?;
    eprintln!(
        "onmi {:.4} (initial round {:.4}), {} communities, {} unassigned",
        out.report.onmi, out.report.onmi_initial, out.report.n_pred_communities, out.report.n_unassigned
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let predicted = load_cover(&args.predicted)?;
    let truth = load_cover(&args.truth)?;
    let report = evaluate(&predicted, &truth)?;
    match args.out {
        Some(path) => write_json(&path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            Ok(())
        }
    }
}

fn ablate(args: AblateArgs) -> Result<()> {
    let base = args.flags.resolve()?;
    let mut arms = Vec::new();
    for name in &args.arms {
        match Arm::parse(name) {
            Some(arm) => arms.push(arm),
            None => return Err(Error::InvalidConfig(format!("unknown arm {name:?}")).into()),
        }
    }
    if args.seeds.is_empty() || args.rho.is_empty() {
        bail!(Error::InvalidConfig("empty sweep grid".into()));
    }
    let (graph, x, truth) = load_inputs(&args.input)?;

    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for &arm in &arms {
        for &rho in &args.rho {
            for &seed in &args.seeds {
                cells.push(arm.apply(&TrainConfig { seed, rho, ..base.clone() }));
                labels.push(arm);
            }
        }
    }
    let exec = if args.sequential { Exec::Sequential } else { Exec::default() };
    let reports = run_sweep(&graph, &x, &truth, &cells, exec)
        .into_iter()
        .collect::<wocd_core::Result<Vec<RunReport>>>()?;

    let mut csv = format!("kind,arm,{}\n", RunReport::CSV_HEADER);
    for (arm, report) in labels.iter().zip(&reports) {
        let _ = writeln!(csv, "run,{},{}", arm.name(), report.csv_row());
    }
    let per_cell = args.seeds.len();
    for (group, chunk) in reports.chunks(per_cell).enumerate() {
        let arm = labels[group * per_cell];
        let stat = |f: &dyn Fn(&RunReport) -> f64| mean_std(&chunk.iter().map(f).collect::<Vec<_>>());
        let (onmi, onmi_sd) = stat(&|r| r.onmi * 100.0);
        let (init, init_sd) = stat(&|r| r.onmi_initial * 100.0);
        let means: Vec<String> = [
            stat(&|r| r.n_sampled as f64).0,
            stat(&|r| r.n_cliques as f64).0,
            stat(&|r| r.n_pseudo_initial as f64).0,
            stat(&|r| r.n_pseudo_refined as f64).0,
        ]
        .iter()
        .map(|m| format!("{m:.1}"))
        .collect();
        let _ = writeln!(
            csv,
            "aggregate,{},n={},{},{onmi:.1}±{onmi_sd:.1},{init:.1}±{init_sd:.1},{}",
            arm.name(),
            chunk.len(),
            chunk[0].rho,
            means.join(",")
        );
    }
    write_text(&args.out, &csv)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.root() {
                Error::Io { .. } => EXIT_IO,
                Error::Parse { .. } | Error::Json(_) => EXIT_PARSE,
                Error::Divergence { .. } | Error::NonFinite(_) | Error::DegenerateProjection(_) => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Cliques(a) => cliques(a),
        Command::Pseudo(a) => pseudo(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
