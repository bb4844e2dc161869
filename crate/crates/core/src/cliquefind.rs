//! Weak-clique identification.
//!
//! A weak clique of an edge `(u, v)` is `{u, v} ∪ (n_u ∩ n_v)`. Starting
//! nodes are taken in descending priority `(m_u + d_u) / (d_u + 1)`, where
//! `m_u` counts edges among the neighbors of `u`; each start is paired with
//! its neighbor of highest Salton index `|n_u ∩ n_v| / sqrt(d_u d_v)`. Both
//! nodes of a pair stop being eligible as starts, but either may still be
//! chosen as a partner or swept into later cliques.
//!
//! Ties break toward the smallest node id. Priorities and Salton indices are
//! compared exactly in integer arithmetic.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graphio::{sorted_intersection_len, Graph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueRecord {
    pub seed_u: usize,
    pub seed_v: usize,
    /// Sorted member set.
    pub members: Vec<usize>,
}

/// Weak cliques in discovery order, with a node -> clique inverse index.
/// Records with identical member sets are kept as separate entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueSet {
    cliques: Vec<CliqueRecord>,
    member_index: Vec<Vec<usize>>,
}

impl CliqueSet {
    pub fn new(n_nodes: usize, cliques: Vec<CliqueRecord>) -> Self {
        let mut member_index = vec![Vec::new(); n_nodes];
        for (i, c) in cliques.iter().enumerate() {
            for &m in &c.members {
                member_index[m].push(i);
            }
        }
        CliqueSet {
            cliques,
            member_index,
        }
    }

    pub fn cliques(&self) -> &[CliqueRecord] {
        &self.cliques
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.member_index.len()
    }

    /// Indices of the cliques containing `v`, ascending.
    pub fn cliques_of(&self, v: usize) -> &[usize] {
        &self.member_index[v]
    }

    /// One line per record: `u v: m1 m2 ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cliques {
            let _ = write!(out, "{} {}:", c.seed_u, c.seed_v);
            for m in &c.members {
                let _ = write!(out, " {m}");
            }
            out.push('\n');
        }
        out
    }
}

/// Exact priority as the pair `(m_u, d_u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Priority {
    links: u64,
    degree: u64,
}

impl Priority {
    fn value(self) -> f64 {
        if self.degree == 0 {
            0.0
        } else {
            (self.links + self.degree) as f64 / (self.degree + 1) as f64
        }
    }

    /// Compares `(m_a + d_a)/(d_a + 1)` against `(m_b + d_b)/(d_b + 1)` exactly.
    fn cmp_value(self, other: Priority) -> Ordering {
        if self.degree == 0 || other.degree == 0 {
            return (self.degree != 0).cmp(&(other.degree != 0));
        }
        let lhs = (self.links + self.degree) as u128 * (other.degree + 1) as u128;
        let rhs = (other.links + other.degree) as u128 * (self.degree + 1) as u128;
        lhs.cmp(&rhs)
    }
}

fn links_among_neighbors(graph: &Graph, u: usize) -> u64 {
    let nu = graph.neighbors(u);
    let twice: usize = nu
        .iter()
        .map(|&v| sorted_intersection_len(nu, graph.neighbors(v)))
        .sum();
    (twice / 2) as u64
}

fn priority(graph: &Graph, u: usize) -> Priority {
    Priority {
        links: links_among_neighbors(graph, u),
        degree: graph.degree(u) as u64,
    }
}

/// `(m_u + d_u) / (d_u + 1)`; 0 for isolated nodes.
pub fn node_priority(graph: &Graph, u: usize) -> Result<f64> {
    graph.check_node(u)?;
    Ok(priority(graph, u).value())
}

/// Priorities of all nodes, computed independently per node.
pub fn node_priorities_with(graph: &Graph, exec: Exec) -> Vec<f64> {
    exec.map_indices(graph.n_nodes(), |u| priority(graph, u).value())
}

pub fn node_priorities(graph: &Graph) -> Vec<f64> {
    node_priorities_with(graph, Exec::default())
}

/// `|n_u ∩ n_v| / sqrt(|n_u| |n_v|)`; 0 when either node is isolated.
pub fn salton_index(graph: &Graph, u: usize, v: usize) -> Result<f64> {
    graph.check_node(u)?;
    graph.check_node(v)?;
    let (du, dv) = (graph.degree(u), graph.degree(v));
    if du == 0 || dv == 0 {
        return Ok(0.0);
    }
    let common = sorted_intersection_len(graph.neighbors(u), graph.neighbors(v));
    Ok(common as f64 / ((du * dv) as f64).sqrt())
}

fn clique_members(graph: &Graph, u: usize, v: usize) -> Vec<usize> {
    let (a, b) = (graph.neighbors(u), graph.neighbors(v));
    let mut members = Vec::with_capacity(a.len().min(b.len()) + 2);
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                members.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    members.push(u);
    members.push(v);
    members.sort_unstable();
    members
}

/// The weak clique `{u, v} ∪ (n_u ∩ n_v)` of the edge `(u, v)`.
pub fn weak_clique(graph: &Graph, u: usize, v: usize) -> Result<CliqueRecord> {
    graph.check_node(u)?;
    graph.check_node(v)?;
    if !graph.has_edge(u, v) {
        return Err(Error::NotAnEdge { u, v });
    }
    Ok(CliqueRecord {
        seed_u: u,
        seed_v: v,
        members: clique_members(graph, u, v),
    })
}

/// Neighbor of `u` with the largest Salton index, smallest id on ties.
/// `d_u` is common to every candidate, so `c / sqrt(d_u d_v)` is ranked by
/// comparing `c_a^2 d_b` with `c_b^2 d_a`.
fn most_similar_neighbor(graph: &Graph, u: usize) -> Option<usize> {
    let nu = graph.neighbors(u);
    let mut best: Option<(usize, u128, u128)> = None;
    for &v in nu {
        let c = sorted_intersection_len(nu, graph.neighbors(v)) as u128;
        let d = graph.degree(v) as u128;
        let better = match best {
            None => true,
            Some((_, bc, bd)) => c * c * bd > bc * bc * d,
        };
        if better {
            best = Some((v, c, d));
        }
    }
    best.map(|(v, _, _)| v)
}

pub fn identify_weak_cliques_with(graph: &Graph, exec: Exec) -> CliqueSet {
    let n = graph.n_nodes();
    let priorities = exec.map_indices(n, |u| priority(graph, u));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| priorities[b].cmp_value(priorities[a]).then(a.cmp(&b)));

    let mut consumed = vec![false; n];
    let mut cliques = Vec::new();
    for u in order {
        if consumed[u] {
            continue;
        }
        consumed[u] = true;
        let Some(v) = most_similar_neighbor(graph, u) else {
            continue;
        };
        consumed[v] = true;
        cliques.push(CliqueRecord {
            seed_u: u,
            seed_v: v,
            members: clique_members(graph, u, v),
        });
    }
    CliqueSet::new(n, cliques)
}

/// Runs the full weak-clique identification. Deterministic.
pub fn identify_weak_cliques(graph: &Graph) -> CliqueSet {
    identify_weak_cliques_with(graph, Exec::default())
}
