//! Strongly convex scalar cost functions, their analytic gradients, sampled
//! Hessian bounds, and a centralized oracle for the global optimum of the
//! summed cost.

use crate::error::{Error, Result};

/// Default tolerance on the summed-gradient residual of [`global_optimum`].
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;

/// Bracket expansion beyond this magnitude means the ensemble is not coercive.
const BRACKET_LIMIT: f64 = 1e9;

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which built-in cost this is; carried for reporting and serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    Quadratic { center: f64, weight: f64 },
    Example2F1,
    Example2F2,
    Example2F3,
    Example2F4,
    Custom(&'static str),
}

/// A scalar cost with its analytic gradient and optional declared Hessian
/// bounds. All built-ins are smooth and strongly convex on the whole line.
pub struct CostFunction {
    pub kind: CostKind,
    value: ScalarFn,
    gradient: ScalarFn,
    /// Declared `(l_lower, l_upper)` curvature bounds, if any.
    pub declared_bounds: Option<(f64, f64)>,
}

impl std::fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostFunction")
            .field("kind", &self.kind)
            .field("declared_bounds", &self.declared_bounds)
            .finish()
    }
}

impl CostFunction {
    /// `f(y) = (q/2)(y - c)^2`. Curvature is exactly `q`.
    pub fn quadratic(center: f64, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic cost weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            kind: CostKind::Quadratic { center, weight },
            value: Box::new(move |y| 0.5 * weight * (y - center) * (y - center)),
            gradient: Box::new(move |y| weight * (y - center)),
            declared_bounds: Some((weight, weight)),
        })
    }

    /// `f(y) = (y - 8)^2`.
    pub fn example2_f1() -> Self {
        Self {
            kind: CostKind::Example2F1,
            value: Box::new(|y| (y - 8.0) * (y - 8.0)),
            gradient: Box::new(|y| 2.0 * (y - 8.0)),
            declared_bounds: None,
        }
    }

    /// `f(y) = y^2 / (80 ln(y^2 + 2)) + (y - 5)^2`.
    pub fn example2_f2() -> Self {
        Self {
            kind: CostKind::Example2F2,
            value: Box::new(|y| y * y / (80.0 * (y * y + 2.0).ln()) + (y - 5.0) * (y - 5.0)),
            gradient: Box::new(|y| {
                let s = y * y + 2.0;
                let l = s.ln();
                (y * l - y * y * y / s) / (40.0 * l * l) + 2.0 * (y - 5.0)
            }),
            declared_bounds: None,
        }
    }

    /// `f(y) = y^2 / (20 sqrt(y^2 + 1)) + y^2`.
    pub fn example2_f3() -> Self {
        Self {
            kind: CostKind::Example2F3,
            value: Box::new(|y| y * y / (20.0 * (y * y + 1.0).sqrt()) + y * y),
            gradient: Box::new(|y| {
                let s = y * y + 1.0;
                y * (y * y + 2.0) / (20.0 * s * s.sqrt()) + 2.0 * y
            }),
            declared_bounds: None,
        }
    }

    /// `f(y) = ln(e^{-0.05 y} + e^{0.05 y}) + y^2`.
    pub fn example2_f4() -> Self {
        Self {
            kind: CostKind::Example2F4,
            // log-sum-exp form that cannot overflow for large |y|
            value: Box::new(|y| {
                let a = (0.05 * y).abs();
                a + (-2.0 * a).exp().ln_1p() + y * y
            }),
            gradient: Box::new(|y| 0.05 * (0.05 * y).tanh() + 2.0 * y),
            declared_bounds: None,
        }
    }

    /// Arbitrary cost for tests and experiments.
    pub fn custom(
        name: &'static str,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64) -> f64 + Send + Sync + 'static,
        declared_bounds: Option<(f64, f64)>,
    ) -> Self {
        Self {
            kind: CostKind::Custom(name),
            value: Box::new(value),
            gradient: Box::new(gradient),
            declared_bounds,
        }
    }

    pub fn with_declared_bounds(mut self, bounds: (f64, f64)) -> Self {
        self.declared_bounds = Some(bounds);
        self
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    pub fn gradient(&self, y: f64) -> f64 {
        (self.gradient)(y)
    }
}

/// Analytic gradient of a cost at `y`.
pub fn eval_gradient(c: &CostFunction, y: f64) -> f64 {
    c.gradient(y)
}

/// Sampled curvature range: min/max second central difference of the
/// evaluator on a uniform grid over `[lo, hi]`. An estimate, not a
/// certificate.
pub fn hessian_bounds(c: &CostFunction, lo: f64, hi: f64, n_samples: usize) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::InvalidRange(format!(
            "degenerate interval [{lo}, {hi}]"
        )));
    }
    if n_samples < 3 {
        return Err(Error::InvalidRange(format!(
            "need at least 3 samples, got {n_samples}"
        )));
    }
    let h = (hi - lo) / (n_samples - 1) as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..n_samples {
        let y = lo + h * k as f64;
        let second = (c.eval(y + h) - 2.0 * c.eval(y) + c.eval(y - h)) / (h * h);
        min = min.min(second);
        max = max.max(second);
    }
    Ok((min, max))
}

/// The per-agent costs plus the ensemble curvature bounds
/// `l_lower = min_i l_i`, `l_upper = max_i l_i`.
#[derive(Debug)]
pub struct CostEnsemble {
    costs: Vec<CostFunction>,
    pub l_lower: f64,
    pub l_upper: f64,
}

impl CostEnsemble {
    /// Bundle costs, taking curvature bounds from declarations where present
    /// and from sampling on `[-10, 10]` (2001 points) otherwise.
    pub fn new(costs: Vec<CostFunction>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::Config("cost ensemble is empty".into()));
        }
        let mut l_lower = f64::INFINITY;
        let mut l_upper = f64::NEG_INFINITY;
        for c in &costs {
            let (lo, hi) = match c.declared_bounds {
                Some(b) => b,
                None => hessian_bounds(c, -10.0, 10.0, 2001)?,
            };
            l_lower = l_lower.min(lo);
            l_upper = l_upper.max(hi);
        }
        if !(l_lower > 0.0 && l_lower <= l_upper && l_upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "curvature bounds ({l_lower}, {l_upper}) violate 0 < l_lower <= l_upper < inf"
            )));
        }
        Ok(Self {
            costs,
            l_lower,
            l_upper,
        })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn cost(&self, i: usize) -> &CostFunction {
        &self.costs[i]
    }

    /// Gradient of the summed cost. Addends are combined in a canonical
    /// order so the result is independent of the ensemble's ordering.
    pub fn total_gradient(&self, y: f64) -> f64 {
        let mut grads: Vec<f64> = self.costs.iter().map(|c| c.gradient(y)).collect();
        grads.sort_by(f64::total_cmp);
        grads.iter().sum()
    }

    pub fn total_value(&self, y: f64) -> f64 {
        self.costs.iter().map(|c| c.eval(y)).sum()
    }
}

/// Minimizer of the summed cost: expand a bracket until the summed gradient
/// changes sign, then bisect until the residual drops below `tol`.
pub fn global_optimum(e: &CostEnsemble, tol: f64) -> Result<f64> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    let mut step = 1.0f64;
    while e.total_gradient(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
        if lo.abs() > BRACKET_LIMIT {
            return Err(Error::UnboundedProblem {
                limit: BRACKET_LIMIT,
            });
        }
    }
    step = 1.0;
    while e.total_gradient(hi) < 0.0 {
        hi += step;
        step *= 2.0;
        if hi.abs() > BRACKET_LIMIT {
            return Err(Error::UnboundedProblem {
                limit: BRACKET_LIMIT,
            });
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..2000 {
        mid = 0.5 * (lo + hi);
        let g = e.total_gradient(mid);
        if g.abs() <= tol {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo == hi {
            break;
        }
    }
    // Strong convexity makes the gradient cross tol well before the interval
    // collapses; reaching this point means the inputs were inconsistent.
    Err(Error::InvalidParameter(format!(
        "bisection stalled at y = {mid} with residual {}",
        e.total_gradient(mid)
    )))
}

/// The cost set of the heterogeneous four-agent example.
pub fn example2_ensemble() -> CostEnsemble {
    CostEnsemble::new(vec![
        CostFunction::example2_f1().with_declared_bounds((1.0, 3.0)),
        CostFunction::example2_f2().with_declared_bounds((1.0, 3.0)),
        CostFunction::example2_f3().with_declared_bounds((1.0, 3.0)),
        CostFunction::example2_f4().with_declared_bounds((1.0, 3.0)),
    ])
    .expect("built-in ensemble is valid")
}
