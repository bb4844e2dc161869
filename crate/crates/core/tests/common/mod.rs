//! Reference implementations and generators shared by the integration tests.
//!
//! The references are deliberately naive: hash sets, dense matrices, plain
//! floating point and no shared code with the library beyond its data types.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wocd_core::graphio::{Cover, Graph, SampledLabels};
use wocd_core::neuralnet::{FusionParams, Linear, Matrix, ModelParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph as an edge list.
pub fn gnp_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn gnp(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    Graph::from_edges(n, gnp_edges(n, p, rng)).unwrap()
}

/// `m` distinct uniform edges on `n` nodes.
pub fn gnm(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut seen = HashSet::with_capacity(m);
    while seen.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            seen.insert((u.min(v), u.max(v)));
        }
    }
    Graph::from_edges(n, seen).unwrap()
}

pub fn adjacency_sets(g: &Graph) -> Vec<HashSet<usize>> {
    (0..g.n_nodes())
        .map(|u| g.neighbors(u).iter().copied().collect())
        .collect()
}

/// Every node gets each community independently with probability `p`.
pub fn random_cover(n: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> Cover {
    let rows = (0..n)
        .map(|_| (0..k).filter(|_| rng.gen_bool(p)).collect())
        .collect();
    Cover::from_memberships(k, rows).unwrap()
}

pub fn random_sample(cover: &Cover, fraction: f64, rng: &mut ChaCha8Rng) -> SampledLabels {
    let nodes: Vec<usize> = (0..cover.n_nodes()).filter(|_| rng.gen_bool(fraction)).collect();
    SampledLabels::from_cover(cover, nodes).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

fn random_linear(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Linear {
    let scale = 1.5 / (fan_in as f64).sqrt();
    Linear {
        weight: random_matrix(fan_in, fan_out, scale, rng),
        bias: (0..fan_out).map(|_| rng.gen_range(-0.3..0.3)).collect(),
    }
}

/// Parameters with non-zero biases, unlike the library initializer.
pub fn random_params(d: usize, h: usize, k: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        input_proj: random_linear(d, h, rng),
        gcn: vec![random_linear(d, h, rng), random_linear(h, h, rng), random_linear(h, h, rng)],
        query: random_linear(h, h, rng),
        key: random_linear(h, h, rng),
        value: random_linear(h, h, rng),
        head: random_linear(h, k, rng),
        gcn_final_activation: rng.gen_bool(0.5),
    }
}

// ---------------------------------------------------------------------------
// Weak cliques

pub struct RefClique {
    pub u: usize,
    pub v: usize,
    pub members: BTreeSet<usize>,
}

fn ref_priority(adj: &[HashSet<usize>], u: usize) -> f64 {
    let d = adj[u].len();
    if d == 0 {
        return 0.0;
    }
    let mut m = 0;
    for &a in &adj[u] {
        for &b in &adj[u] {
            if a < b && adj[a].contains(&b) {
                m += 1;
            }
        }
    }
    (m + d) as f64 / (d + 1) as f64
}

fn ref_salton(adj: &[HashSet<usize>], u: usize, v: usize) -> f64 {
    let common = adj[u].intersection(&adj[v]).count() as f64;
    common / ((adj[u].len() * adj[v].len()) as f64).sqrt()
}

const TIE: f64 = 1e-12;

/// Literal transcription of the weak-clique procedure: repeatedly take the
/// highest-priority remaining node, pair it with its most similar neighbor,
/// remove both from the pool and emit `{u, v} ∪ (n_u ∩ n_v)`.
pub fn ref_weak_cliques(g: &Graph) -> Vec<RefClique> {
    let adj = adjacency_sets(g);
    let n = adj.len();
    let pri: Vec<f64> = (0..n).map(|u| ref_priority(&adj, u)).collect();
    let mut pool: BTreeSet<usize> = (0..n).collect();
    let mut out = Vec::new();
    while !pool.is_empty() {
        let mut u = *pool.iter().next().unwrap();
        for &c in &pool {
            if pri[c] > pri[u] + TIE {
                u = c;
            }
        }
        pool.remove(&u);
        if adj[u].is_empty() {
            continue;
        }
        let mut nbrs: Vec<usize> = adj[u].iter().copied().collect();
        nbrs.sort();
        let mut v = nbrs[0];
        for &c in &nbrs {
            if ref_salton(&adj, u, c) > ref_salton(&adj, u, v) + TIE {
                v = c;
            }
        }
        pool.remove(&v);
        let mut members: BTreeSet<usize> = adj[u].intersection(&adj[v]).copied().collect();
        members.insert(u);
        members.insert(v);
        out.push(RefClique { u, v, members });
    }
    out
}

// ---------------------------------------------------------------------------
// Clique-vote pseudo-labels

/// Literal transcription of the vote procedure over dense count vectors.
pub fn ref_pseudo_labels(
    cliques: &[Vec<usize>],
    n: usize,
    k: usize,
    sampled: &SampledLabels,
    retained: usize,
) -> Vec<BTreeSet<usize>> {
    let mut labels = vec![BTreeSet::new(); n];
    for clique in cliques {
        let mut votes = vec![0usize; k];
        for &m in clique {
            if let Some(row) = sampled.row_of(m) {
                for &c in row {
                    votes[c] += 1;
                }
            }
        }
        let mut ranked: Vec<usize> = (0..k).collect();
        ranked.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
        let chosen: Vec<usize> = ranked
            .into_iter()
            .take(retained)
            .filter(|&c| votes[c] > 0)
            .collect();
        for &m in clique {
            labels[m].extend(chosen.iter().copied());
        }
    }
    labels
}

// ---------------------------------------------------------------------------
// Overlapping NMI

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

fn indicator_vectors(cover: &Cover) -> Vec<Vec<bool>> {
    let n = cover.n_nodes();
    (0..cover.n_communities())
        .map(|c| (0..n).map(|v| cover.communities_of(v).contains(&c)).collect::<Vec<bool>>())
        .filter(|x| x.iter().any(|&b| b))
        .collect()
}

fn entropy_of(x: &[bool]) -> f64 {
    let n = x.len() as f64;
    let p1 = x.iter().filter(|&&b| b).count() as f64 / n;
    plogp(p1) + plogp(1.0 - p1)
}

/// Sum of `H(X_i | Y)` over the communities `X_i` in `xs`.
fn cond_entropy(xs: &[Vec<bool>], ys: &[Vec<bool>]) -> f64 {
    let mut total = 0.0;
    for x in xs {
        let hx = entropy_of(x);
        let mut best = hx;
        for y in ys {
            let n = x.len() as f64;
            let mut table = [[0.0f64; 2]; 2];
            for (&a, &b) in x.iter().zip(y) {
                table[a as usize][b as usize] += 1.0 / n;
            }
            let (p00, p01, p10, p11) = (table[0][0], table[0][1], table[1][0], table[1][1]);
            if plogp(p11) + plogp(p00) >= plogp(p01) + plogp(p10) {
                let joint = plogp(p00) + plogp(p01) + plogp(p10) + plogp(p11);
                let hy = plogp(p01 + p11) + plogp(p00 + p10);
                best = best.min(joint - hy);
            }
        }
        total += best;
    }
    total
}

/// Overlapping NMI by brute force over explicit indicator vectors.
pub fn ref_onmi(a: &Cover, b: &Cover) -> f64 {
    let xs = indicator_vectors(a);
    let ys = indicator_vectors(b);
    if xs.is_empty() || ys.is_empty() {
        return 0.0;
    }
    let hx: f64 = xs.iter().map(|x| entropy_of(x)).sum();
    let hy: f64 = ys.iter().map(|y| entropy_of(y)).sum();
    let norm = hx.max(hy);
    if norm == 0.0 {
        return 1.0;
    }
    let i = 0.5 * ((hx - cond_entropy(&xs, &ys)) + (hy - cond_entropy(&ys, &xs)));
    (i / norm).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Dense network references

fn dense_linear(x: &[Vec<f64>], layer: &Linear) -> Vec<Vec<f64>> {
    let w = &layer.weight;
    x.iter()
        .map(|row| {
            (0..w.cols())
                .map(|j| layer.bias[j] + (0..w.rows()).map(|k| row[k] * w[(k, j)]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// `D^-1/2 (A + I) D^-1/2` as a dense matrix.
pub fn ref_propagation(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for (u, row) in a.iter_mut().enumerate() {
        row[u] = 1.0;
        for &v in g.neighbors(u) {
            row[v] = 1.0;
        }
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for u in 0..n {
        for v in 0..n {
            a[u][v] /= (deg[u] * deg[v]).sqrt();
        }
    }
    a
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(&x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// GCN stack: each layer is `P X W + b`, rectified except possibly the last.
pub fn ref_gcn(params: &ModelParams, g: &Graph, x: &Matrix) -> Vec<Vec<f64>> {
    ref_gcn_layers(params, g, x).1
}

/// Smallest magnitude among the pre-activations that pass through a rectifier.
pub fn min_rectified_preactivation(params: &ModelParams, g: &Graph, x: &Matrix) -> f64 {
    ref_gcn_layers(params, g, x).0
}

fn ref_gcn_layers(params: &ModelParams, g: &Graph, x: &Matrix) -> (f64, Vec<Vec<f64>>) {
    let p = ref_propagation(g);
    let mut closest = f64::INFINITY;
    let mut h = to_rows(x);
    let layers = params.gcn.len();
    for (l, layer) in params.gcn.iter().enumerate() {
        let mut xw = dense_linear(&h, &Linear { weight: layer.weight.clone(), bias: vec![0.0; layer.fan_out()] });
        xw = dense_mul(&p, &xw);
        for row in &mut xw {
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        if l + 1 < layers || params.gcn_final_activation {
            for row in &mut xw {
                for v in row.iter_mut() {
                    closest = closest.min(v.abs());
                    *v = v.max(0.0);
                }
            }
        }
        h = xw;
    }
    (closest, h)
}

fn frobenius_normalized(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let norm = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    m.iter().map(|r| r.iter().map(|v| v / norm).collect()).collect()
}

/// Linear attention written as explicit pairwise sums over all node pairs.
pub fn ref_gt(params: &ModelParams, x: &Matrix, gamma: f64) -> Vec<Vec<f64>> {
    let z0 = dense_linear(&to_rows(x), &params.input_proj);
    let q = frobenius_normalized(&dense_linear(&z0, &params.query));
    let k = frobenius_normalized(&dense_linear(&z0, &params.key));
    let v = dense_linear(&z0, &params.value);
    let n = z0.len();
    let h = z0[0].len();
    let nf = n as f64;
    let mut out = vec![vec![0.0; h]; n];
    for i in 0..n {
        let mut num = v[i].clone();
        let mut den = 1.0;
        for j in 0..n {
            let s: f64 = q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() / nf;
            den += s;
            for (acc, vj) in num.iter_mut().zip(&v[j]) {
                *acc += s * vj;
            }
        }
        for c in 0..h {
            out[i][c] = gamma * num[c] / den + (1.0 - gamma) * z0[i][c];
        }
    }
    out
}

/// Full prediction through the dense references.
pub fn ref_predict(params: &ModelParams, fusion: &FusionParams, g: &Graph, x: &Matrix) -> Vec<Vec<f64>> {
    let n = x.rows();
    let h = params.head.fan_in();
    let mut fused = vec![vec![0.0; h]; n];
    if fusion.alpha != 0.0 {
        for (f, r) in fused.iter_mut().zip(ref_gcn(params, g, x)) {
            for (a, b) in f.iter_mut().zip(r) {
                *a += fusion.alpha * b;
            }
        }
    }
    if fusion.beta != 0.0 {
        for (f, r) in fused.iter_mut().zip(ref_gt(params, x, fusion.gamma)) {
            for (a, b) in f.iter_mut().zip(r) {
                *a += fusion.beta * b;
            }
        }
    }
    dense_linear(&fused, &params.head)
        .into_iter()
        .map(|r| r.into_iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect())
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((v - b[(i, j)]).abs());
        }
    }
    worst
}

pub fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}
