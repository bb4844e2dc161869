//! Text formats: TSV edge lists, `node: communities` cover lines, CSV features.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Cover, FeatureMatrix, Graph};
use crate::error::{Error, Result};
use crate::neuralnet::Matrix;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Lines as `(1-based line number, trimmed text)`.
fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    open(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.map(|s| (i + 1, s.trim().to_string()))
                .map_err(|e| Error::io(path, e))
        })
        .collect()
}

/// Parses `#key=value` headers; returns `None` for plain comments.
fn header_value(path: &Path, line_no: usize, line: &str, key: &str) -> Result<Option<usize>> {
    let Some(rest) = line.strip_prefix('#') else {
        return Ok(None);
    };
    let Some(value) = rest.trim().strip_prefix(key).and_then(|r| r.strip_prefix('=')) else {
        return Ok(None);
    };
    value
        .trim()
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(path, line_no, format!("bad #{key} header")))
}

fn parse_id(path: &Path, line_no: usize, token: &str) -> Result<usize> {
    if token.starts_with('-') {
        return Err(Error::parse(path, line_no, format!("negative id {token}")));
    }
    token
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("not a node id: {token:?}")))
}

/// Loads an undirected edge list (`u<TAB>v` per line, `#` comments, optional
/// `#nodes=N` header). Self-loops are dropped and duplicates collapsed.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let mut declared = None;
    let mut edges = Vec::new();
    for (line_no, line) in lines(path)? {
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(n) = header_value(path, line_no, &line, "nodes")? {
                declared = Some(n);
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(path, line_no, "expected two node ids"));
        }
        let u = parse_id(path, line_no, tokens[0])?;
        let v = parse_id(path, line_no, tokens[1])?;
        edges.push((line_no, u, v));
    }
    let n_nodes = match declared {
        Some(n) => {
            if let Some(&(line_no, u, v)) = edges.iter().find(|&&(_, u, v)| u.max(v) >= n) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("id {} exceeds declared #nodes={n}", u.max(v)),
                ));
            }
            n
        }
        None => edges.iter().map(|&(_, u, v)| u.max(v) + 1).max().unwrap_or(0),
    };
    Graph::from_edges(n_nodes, edges.into_iter().map(|(_, u, v)| (u, v)))
}

/// Writes `#nodes=N` followed by each edge once as `u<TAB>v` with `u < v`.
pub fn write_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = format!("#nodes={}\n", graph.n_nodes());
    for (u, v) in graph.edges() {
        body.push_str(&format!("{u}\t{v}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Dense relabeling of arbitrary node labels, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dense_id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    /// One `dense_id<TAB>label` line per node.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i}\t{l}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut map = IdMap::default();
        for (line_no, line) in lines(path)? {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, line_no, "expected id<TAB>label"))?;
            let id = parse_id(path, line_no, id)?;
            if id != map.len() || map.index.contains_key(label) {
                return Err(Error::parse(path, line_no, "ids must be dense and labels unique"));
            }
            map.intern(label);
        }
        Ok(map)
    }
}

/// Loads an edge list whose node tokens are arbitrary labels, assigning dense
/// ids in order of first appearance.
pub fn load_edge_list_labeled(path: impl AsRef<Path>) -> Result<(Graph, IdMap)> {
    let path = path.as_ref();
    let mut map = IdMap::default();
    let mut edges = Vec::new();
    for (line_no, line) in lines(path)? {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(path, line_no, "expected two node labels"));
        }
        let u = map.intern(tokens[0]);
        let v = map.intern(tokens[1]);
        edges.push((u, v));
    }
    Ok((Graph::from_edges(map.len(), edges)?, map))
}

/// Loads a cover: `node_id: c1 c2 ...` lines with optional `#nodes=N` and
/// `#communities=K` headers. Nodes without a line belong to no community.
pub fn load_cover(path: impl AsRef<Path>) -> Result<Cover> {
    let path = path.as_ref();
    let mut declared_n = None;
    let mut declared_k = None;
    let mut rows: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (line_no, line) in lines(path)? {
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(n) = header_value(path, line_no, &line, "nodes")? {
                declared_n = Some(n);
            } else if let Some(k) = header_value(path, line_no, &line, "communities")? {
                declared_k = Some(k);
            }
            continue;
        }
        let (node, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(path, line_no, "expected `node: communities`"))?;
        let node = parse_id(path, line_no, node.trim())?;
        let communities = rest
            .split_whitespace()
            .map(|t| parse_id(path, line_no, t))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, node, communities));
    }

    let n_communities = declared_k.unwrap_or_else(|| {
        rows.iter()
            .flat_map(|(_, _, cs)| cs.iter().map(|&c| c + 1))
            .max()
            .unwrap_or(0)
    });
    let n_nodes = declared_n.unwrap_or_else(|| rows.iter().map(|r| r.1 + 1).max().unwrap_or(0));

    let mut memberships: Vec<Option<Vec<usize>>> = vec![None; n_nodes];
    for (line_no, node, communities) in rows {
        if node >= n_nodes {
            return Err(Error::parse(
                path,
                line_no,
                format!("node {node} exceeds declared #nodes={n_nodes}"),
            ));
        }
        if let Some(&c) = communities.iter().find(|&&c| c >= n_communities) {
            return Err(Error::parse(
                path,
                line_no,
                format!("community {c} exceeds declared #communities={n_communities}"),
            ));
        }
        if memberships[node].is_some() {
            return Err(Error::parse(path, line_no, format!("duplicate line for node {node}")));
        }
        memberships[node] = Some(communities);
    }
    Cover::from_memberships(
        n_communities,
        memberships.into_iter().map(Option::unwrap_or_default).collect(),
    )
}

/// Writes both headers and one line per node, including empty memberships.
pub fn write_cover(cover: &Cover, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = format!(
        "#nodes={}\n#communities={}\n",
        cover.n_nodes(),
        cover.n_communities()
    );
    for (v, row) in cover.rows().iter().enumerate() {
        body.push_str(&v.to_string());
        body.push(':');
        for c in row {
            body.push(' ');
            body.push_str(&c.to_string());
        }
        body.push('\n');
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads dense CSV features, one row per node. With `has_header` the first
/// non-empty line is skipped. `expected_rows` enforces the node count.
pub fn load_features(
    path: impl AsRef<Path>,
    has_header: bool,
    expected_rows: Option<usize>,
) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut values = Vec::new();
    let mut dims = None;
    let mut n_rows = 0;
    let mut skipped_header = !has_header;
    for (line_no, line) in lines(path)? {
        if line.is_empty() {
            continue;
        }
        if !skipped_header {
            skipped_header = true;
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, line_no, format!("bad feature value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match dims {
            None => dims = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {d} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        n_rows += 1;
    }
    if let Some(n) = expected_rows {
        if n != n_rows {
            return Err(Error::ShapeMismatch(format!(
                "{} has {n_rows} feature rows but the graph has {n} nodes",
                path.display()
            )));
        }
    }
    FeatureMatrix::new(Matrix::from_vec(n_rows, dims.unwrap_or(0), values))
}

/// Writes features as headerless CSV using shortest round-trip formatting.
pub fn write_features(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let m = features.matrix();
    let mut body = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        body.push_str(&row.join(","));
        body.push('\n');
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
