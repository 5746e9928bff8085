//! The distributed optimal signal generator: a saddle-point flow
//!
//! ```text
//! r_dot_i = -alpha * grad f_i(r_i) - beta * sum_j a_ij (r_i - r_j) - sum_j a_ij (v_i - v_j)
//! v_dot_i =  alpha * beta * sum_j a_ij (r_i - r_j)
//! ```
//!
//! whose `r` components converge exponentially to the minimizer of the
//! summed cost on weight-balanced strongly connected digraphs once
//! `alpha`, `beta` clear their lower bounds.

use nalgebra::{DMatrix, DVector};

use crate::costs::{global_optimum, CostEnsemble, DEFAULT_GRAD_TOL};
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, complement_basis, ComplementBasis, Digraph};

/// Generator gain pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GeneratorGains {
    pub alpha: f64,
    pub beta: f64,
}

impl GeneratorGains {
    /// Whether this pair clears the convergence-proof lower bounds for the
    /// given curvature range and spectrum, up to relative rounding slack
    /// (the spectrum itself carries eigensolver error).
    pub fn meets_bounds(&self, l_lower: f64, l_upper: f64, lambda2: f64, lambda_n: f64) -> bool {
        let alpha_min = alpha_bound(l_lower, l_upper, lambda2);
        let beta_min = beta_bound(self.alpha, lambda2, lambda_n);
        self.alpha >= alpha_min * (1.0 - 1e-9) && self.beta >= beta_min * (1.0 - 1e-9)
    }
}

fn alpha_bound(l_lower: f64, l_upper: f64, lambda2: f64) -> f64 {
    1.0f64
        .max(1.0 / l_lower)
        .max(2.0 * l_upper * l_upper / (l_lower * lambda2))
}

fn beta_bound(alpha: f64, lambda2: f64, lambda_n: f64) -> f64 {
    1.0f64
        .max(1.0 / lambda2)
        .max(6.0 * alpha * alpha * lambda_n * lambda_n / (lambda2 * lambda2))
}

/// Tight-by-default gain selection: alpha at its lower bound, then beta at
/// the lower bound evaluated at that alpha.
pub fn select_gains(
    l_lower: f64,
    l_upper: f64,
    lambda2: f64,
    lambda_n: f64,
) -> Result<GeneratorGains> {
    if lambda2 <= 0.0 {
        return Err(Error::SpectralGap(format!(
            "lambda2 = {lambda2}; the digraph must be strongly connected"
        )));
    }
    if !(l_lower > 0.0 && l_lower <= l_upper && lambda_n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gain selection needs 0 < l_lower <= l_upper and lambda_n > 0, \
             got l=({l_lower}, {l_upper}), lambda_n={lambda_n}"
        )));
    }
    let alpha = alpha_bound(l_lower, l_upper, lambda2);
    let beta = beta_bound(alpha, lambda2, lambda_n);
    Ok(GeneratorGains { alpha, beta })
}

/// Estimate and dual states of the generator.
#[derive(Debug, Clone)]
pub struct GeneratorState {
    pub r: DVector<f64>,
    pub v: DVector<f64>,
}

impl GeneratorState {
    pub fn new(r: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if r.len() != v.len() {
            return Err(Error::ShapeMismatch {
                context: "generator state",
                expected: r.len(),
                got: v.len(),
            });
        }
        Ok(Self { r, v })
    }
}

/// Agent-local evaluation of the generator field over in-neighbor sums.
pub fn generator_field(
    s: &GeneratorState,
    e: &CostEnsemble,
    g: &Digraph,
    gains: GeneratorGains,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = g.n_nodes();
    if s.r.len() != n {
        return Err(Error::ShapeMismatch {
            context: "generator field",
            expected: n,
            got: s.r.len(),
        });
    }
    if e.len() != n {
        return Err(Error::ShapeMismatch {
            context: "generator field costs",
            expected: n,
            got: e.len(),
        });
    }
    let mut r_dot = DVector::zeros(n);
    let mut v_dot = DVector::zeros(n);
    for i in 0..n {
        let mut consensus_r = 0.0;
        let mut consensus_v = 0.0;
        for (j, a) in g.in_neighbors(i) {
            consensus_r += a * (s.r[i] - s.r[j]);
            consensus_v += a * (s.v[i] - s.v[j]);
        }
        r_dot[i] =
            -gains.alpha * e.cost(i).gradient(s.r[i]) - gains.beta * consensus_r - consensus_v;
        v_dot[i] = gains.alpha * gains.beta * consensus_r;
    }
    Ok((r_dot, v_dot))
}

/// Steady state of the generator: consensus on the global optimum plus the
/// dual offset balancing the remaining gradient disagreement.
#[derive(Debug, Clone)]
pub struct GeneratorEquilibrium {
    pub y_star: f64,
    pub r_star: DVector<f64>,
    pub v_star: DVector<f64>,
}

/// Computes `(r*, v*)` with `r* = 1 y*` and
/// `v* = -alpha M2 (M2^T L M2)^{-1} M2^T grad(r*)`.
pub fn generator_equilibrium(
    e: &CostEnsemble,
    g: &Digraph,
    alpha: f64,
) -> Result<GeneratorEquilibrium> {
    let report = build_laplacian(g)?;
    if !report.assumption_holds() {
        return Err(Error::AssumptionViolated(
            "equilibrium needs a weight-balanced strongly connected digraph".into(),
        ));
    }
    if report.lambda2 <= 1e-12 {
        return Err(Error::SpectralGap(format!(
            "lambda2 = {} too small to invert the projected Laplacian",
            report.lambda2
        )));
    }
    let n = g.n_nodes();
    let basis = complement_basis(n)?;
    let y_star = global_optimum(e, DEFAULT_GRAD_TOL)?;
    let r_star = DVector::from_element(n, y_star);
    let grad = DVector::from_fn(n, |i, _| e.cost(i).gradient(y_star));

    let m_l = basis.m2.transpose() * &report.laplacian * &basis.m2;
    let rhs = basis.m2.transpose() * &grad;
    let sol = m_l
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SpectralGap("projected Laplacian is numerically singular".into()))?;
    let v_star = -(&basis.m2 * sol) * alpha;
    Ok(GeneratorEquilibrium {
        y_star,
        r_star,
        v_star,
    })
}

/// Quadratic monitor of the distance to equilibrium in the rotated
/// coordinates; nonincreasing along trajectories when the gains clear their
/// bounds.
pub fn lyapunov_vo(
    s: &GeneratorState,
    eq: &GeneratorEquilibrium,
    basis: &ComplementBasis,
    alpha: f64,
) -> f64 {
    assert!(alpha > 0.0, "alpha must be positive");
    let dr = &s.r - &eq.r_star;
    let dv = &s.v - &eq.v_star;
    let r_bar1 = basis.m1.dot(&dr);
    let r_bar2 = basis.m2.transpose() * &dr;
    let v_bar1 = basis.m1.dot(&dv);
    let shifted = &dv + &dr * alpha;
    let v_bar2 = basis.m2.transpose() * shifted;
    let a3 = alpha * alpha * alpha;
    r_bar1 * r_bar1 + r_bar2.norm_squared() + (v_bar1 * v_bar1 + v_bar2.norm_squared()) / a3
}

/// Matrix form of the generator field, used to cross-check the agent-local
/// implementation.
pub fn generator_field_matrix(
    s: &GeneratorState,
    e: &CostEnsemble,
    laplacian: &DMatrix<f64>,
    gains: GeneratorGains,
) -> (DVector<f64>, DVector<f64>) {
    let grad = DVector::from_fn(s.r.len(), |i, _| e.cost(i).gradient(s.r[i]));
    let lr = laplacian * &s.r;
    let lv = laplacian * &s.v;
    let r_dot = -grad * gains.alpha - &lr * gains.beta - lv;
    let v_dot = lr * (gains.alpha * gains.beta);
    (r_dot, v_dot)
}
