//! Directed weighted graphs, their Laplacians, and the spectral quantities
//! that enter the generator gain bounds.
//!
//! Conventions: `weights[(i, j)] = a_ij > 0` means node `i` receives
//! information from node `j`. The Laplacian is `L = D_in - A` with
//! `D_in = diag(row sums)`, so `L * 1 = 0` for every digraph. For a
//! weight-balanced digraph `1^T L = 0` as well and `Sym(L) = (L + L^T)/2`
//! is positive semidefinite; its sorted eigenvalues
//! `0 = lambda_1 < lambda_2 <= ... <= lambda_N` bound the projected matrix
//! `M2^T Sym(L) M2` from both sides.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the in-degree vs. out-degree balance check.
pub const BALANCE_TOL: f64 = 1e-12;

/// Directed weighted graph over `N` nodes.
#[derive(Debug, Clone)]
pub struct Digraph {
    weights: DMatrix<f64>,
}

impl Digraph {
    /// Build from an adjacency matrix; rejects negative weights and a
    /// nonzero diagonal.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::InvalidGraph(format!(
                "weight matrix is {}x{}, expected square",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.nrows() == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        for i in 0..weights.nrows() {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "nonzero self-weight at node {i}"
                )));
            }
            for j in 0..weights.ncols() {
                let a = weights[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight a[{i}][{j}] = {a} is not a finite nonnegative number"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Build from an edge list `(src, dst, weight)`: the edge src -> dst
    /// sets `a[dst][src] = weight` (dst receives from src).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(src, dst, a) in edges {
            if src >= n || dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({src}, {dst}) out of range for {n} nodes"
                )));
            }
            if src == dst {
                return Err(Error::InvalidGraph(format!("self-loop at node {src}")));
            }
            w[(dst, src)] = a;
        }
        Self::new(w)
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// In-neighbors of node `i` as `(j, a_ij)` pairs with `a_ij > 0`.
    pub fn in_neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n_nodes())
            .filter(|&j| self.weights[(i, j)] > 0.0)
            .map(|j| (j, self.weights[(i, j)]))
            .collect()
    }

    pub fn in_degree(&self, i: usize) -> f64 {
        self.weights.row(i).sum()
    }

    pub fn out_degree(&self, j: usize) -> f64 {
        self.weights.column(j).sum()
    }
}

/// Laplacian plus the structural and spectral facts the design consumes.
#[derive(Debug, Clone)]
pub struct LaplacianReport {
    pub laplacian: DMatrix<f64>,
    /// Eigenvalues of `(L + L^T)/2`, sorted ascending.
    pub sym_eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub weight_balanced: bool,
    pub strongly_connected: bool,
}

impl LaplacianReport {
    /// True when the standing connectivity/balance assumption holds.
    pub fn assumption_holds(&self) -> bool {
        self.weight_balanced && self.strongly_connected
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.laplacian.nrows();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| self.laplacian.row(i).iter().copied().collect())
            .collect();
        serde_json::json!({
            "laplacian": rows,
            "sym_eigenvalues": self.sym_eigenvalues,
            "lambda2": self.lambda2,
            "lambda_n": self.lambda_n,
            "weight_balanced": self.weight_balanced,
            "strongly_connected": self.strongly_connected,
        })
    }
}

/// Laplacian, balance and connectivity flags, and the Sym(L) spectrum.
pub fn build_laplacian(g: &Digraph) -> Result<LaplacianReport> {
    let n = g.n_nodes();
    let a = g.weights();
    let mut laplacian = -a.clone();
    for i in 0..n {
        laplacian[(i, i)] = g.in_degree(i);
    }

    let max_degree = (0..n)
        .map(|i| g.in_degree(i).max(g.out_degree(i)))
        .fold(0.0f64, f64::max);
    let tol = BALANCE_TOL * max_degree.max(1.0);
    let weight_balanced = (0..n).all(|i| (g.in_degree(i) - g.out_degree(i)).abs() <= tol);

    let strongly_connected = is_strongly_connected(g);

    let sym = (&laplacian + laplacian.transpose()) * 0.5;
    let mut sym_eigenvalues: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    sym_eigenvalues.sort_by(f64::total_cmp);

    let lambda2 = if n >= 2 { sym_eigenvalues[1] } else { 0.0 };
    let lambda_n = sym_eigenvalues[n - 1];

    Ok(LaplacianReport {
        laplacian,
        sym_eigenvalues,
        lambda2,
        lambda_n,
        weight_balanced,
        strongly_connected,
    })
}

/// Reachability check on the directed edge set: every node must reach node 0
/// and be reachable from it, in the information-flow orientation.
fn is_strongly_connected(g: &Digraph) -> bool {
    let n = g.n_nodes();
    if n == 1 {
        return true;
    }
    // a_ij > 0 is the edge j -> i; forward = follow information flow.
    let forward = reach(n, |to, from| g.weight(to, from) > 0.0);
    let backward = reach(n, |to, from| g.weight(from, to) > 0.0);
    forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
}

fn reach(n: usize, has_edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && has_edge(v, u) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Orthonormal completion of the consensus direction.
#[derive(Debug, Clone)]
pub struct ComplementBasis {
    /// `1/sqrt(N) * 1_N`.
    pub m1: DVector<f64>,
    /// `N x (N-1)` with orthonormal columns spanning the complement of `m1`.
    pub m2: DMatrix<f64>,
}

/// Deterministic construction via the Householder reflection mapping `e_1`
/// to `m1`: columns 2..N of the reflector are the complement basis.
pub fn complement_basis(n: usize) -> Result<ComplementBasis> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "complement basis needs n >= 2, got {n}"
        )));
    }
    let m1 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    // u = m1 - e1; H = I - 2 u u^T / (u^T u)  maps e1 to m1.
    let mut u = m1.clone();
    u[0] -= 1.0;
    let uu = u.dot(&u);
    let h = DMatrix::identity(n, n) - &u * u.transpose() * (2.0 / uu);
    let m2 = h.columns(1, n - 1).into_owned();
    Ok(ComplementBasis { m1, m2 })
}

impl ComplementBasis {
    pub fn n(&self) -> usize {
        self.m1.len()
    }

    /// `M2^T Sym(L) M2`, whose eigenvalues lie in `[lambda2, lambdaN]` for
    /// weight-balanced strongly connected digraphs.
    pub fn project_sym(&self, laplacian: &DMatrix<f64>) -> DMatrix<f64> {
        let sym = (laplacian + laplacian.transpose()) * 0.5;
        self.m2.transpose() * sym * &self.m2
    }
}

/// Reference four-node digraph: unit weights, a directed cycle
/// 1 -> 2 -> 3 -> 4 -> 1 plus bidirectional edges 1 <-> 3 and 2 <-> 4.
pub fn ring_of_four() -> Digraph {
    Digraph::from_edges(
        4,
        &[
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 0, 1.0),
            (0, 2, 1.0),
            (2, 0, 1.0),
            (1, 3, 1.0),
            (3, 1, 1.0),
        ],
    )
    .expect("static edge list is valid")
}
