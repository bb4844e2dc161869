use crate::exec::Exec;
use crate::graphio::Graph;

use super::Matrix;

/// Symmetrically normalized self-looped adjacency `D̃^-1/2 (A + I) D̃^-1/2`
/// in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Builds the GCN propagation matrix; entry `(u, v)` is `1 / sqrt(d̃_u d̃_v)`
/// with `d̃ = degree + 1`, for every edge and every diagonal position.
pub fn gcn_norm(graph: &Graph) -> PropagationMatrix {
    let n = graph.n_nodes();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * graph.n_edges() + n);
    let mut vals = Vec::with_capacity(cols.capacity());
    offsets.push(0);
    for u in 0..n {
        let nb = graph.neighbors(u);
        let split = nb.partition_point(|&v| v < u);
        let row = nb[..split].iter().chain(std::iter::once(&u)).chain(&nb[split..]);
        for &v in row {
            cols.push(v);
            // d̃_u * d̃_v is exact in f64 and commutative, so (u,v) == (v,u) bitwise.
            let dd = ((graph.degree(u) + 1) * (graph.degree(v) + 1)) as f64;
            vals.push(1.0 / dd.sqrt());
        }
        offsets.push(cols.len());
    }
    PropagationMatrix { offsets, cols, vals }
}

impl PropagationMatrix {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `u`, columns ascending.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        let r = self.offsets[u]..self.offsets[u + 1];
        match self.cols[r.clone()].binary_search(&v) {
            Ok(i) => self.vals[r.start + i],
            Err(_) => 0.0,
        }
    }

    /// `self * dense`, row-parallel under `exec`.
    pub fn spmm_with(&self, dense: &Matrix, exec: Exec) -> Matrix {
        assert_eq!(self.n(), dense.rows(), "spmm shape mismatch");
        let mut out = Matrix::zeros(dense.rows(), dense.cols());
        exec.for_each_row(out.as_mut_slice(), dense.cols(), |u, out_row| {
            for (v, w) in self.row(u) {
                for (o, &x) in out_row.iter_mut().zip(dense.row(v)) {
                    *o += w * x;
                }
            }
        });
        out
    }

    pub fn spmm(&self, dense: &Matrix) -> Matrix {
        self.spmm_with(dense, Exec::default())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.n());
        for u in 0..self.n() {
            for (v, w) in self.row(u) {
                m[(u, v)] = w;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node() {
        let p = gcn_norm(&Graph::empty(1));
        assert_eq!(p.to_dense().as_slice(), &[1.0]);
    }

    #[test]
    fn single_edge() {
        let p = gcn_norm(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert_eq!(p.to_dense().as_slice(), &[0.5; 4]);
    }

    #[test]
    fn path_entries() {
        let p = gcn_norm(&Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap());
        assert!((p.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.40825).abs() < 1e-5);
        assert_eq!(p.get(0, 2), 0.0);
        assert!((p.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exactly_symmetric() {
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (2, 3), (3, 4), (4, 0), (5, 1)]).unwrap();
        let d = gcn_norm(&g).to_dense();
        assert_eq!(d.max_abs_diff(&d.transpose()), 0.0);
    }

    #[test]
    fn spmm_matches_dense() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (1, 4)]).unwrap();
        let p = gcn_norm(&g);
        let x = Matrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        let dense = p.to_dense().matmul_with(&x, Exec::Sequential);
        assert!(p.spmm_with(&x, Exec::Sequential).max_abs_diff(&dense) < 1e-15);
        assert_eq!(p.spmm_with(&x, Exec::Sequential), p.spmm(&x));
    }
}
