//! Distributed tracking controllers. Each agent runs a first-order
//! compensator `eta` reconstructing the unavailable feedforward input, an
//! adaptive gain `theta` that grows until it dominates the unknown
//! uncertainty bounds, and an embedded copy of the signal generator
//! `(r, v)`. The stabilizing error is the scalar
//! `zeta = sum_j k_j xbar_j + xbar_n` with Hurwitz chain coefficients `k`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::costs::CostFunction;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::generator::GeneratorGains;

/// Hurwitz margin demanded of chain coefficient polynomials.
pub const HURWITZ_MARGIN: f64 = 1e-6;

/// Which control law the closed loop runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// Adaptive law with the dynamic gain `theta`.
    Full,
    /// Static-damping law for the known-uncertainty-bound case.
    Reduced,
}

/// Coefficients `k_1..k_{n-1}` making
/// `p(s) = sum_j k_j s^{j-1} + s^{n-1}` Hurwitz; empty for `n = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDesign {
    pub k: Vec<f64>,
}

impl ChainDesign {
    /// Validates the Hurwitz property by solving for the roots.
    pub fn new(k: Vec<f64>) -> Result<Self> {
        let design = Self { k };
        let max_re = design.max_root_real_part();
        if max_re > -HURWITZ_MARGIN {
            return Err(Error::InvalidParameter(format!(
                "chain polynomial is not Hurwitz: max root real part {max_re:.3e}"
            )));
        }
        Ok(design)
    }

    /// Largest real part over the roots of the chain polynomial;
    /// `-inf` for the empty (n = 1) design.
    pub fn max_root_real_part(&self) -> f64 {
        let deg = self.k.len();
        if deg == 0 {
            return f64::NEG_INFINITY;
        }
        // Companion matrix of s^deg + k_deg s^{deg-1} + ... + k_1.
        let companion = DMatrix::from_fn(deg, deg, |i, j| {
            if j == deg - 1 {
                -self.k[i]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        companion
            .complex_eigenvalues()
            .iter()
            .map(|ev| ev.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn chain_length(&self) -> usize {
        self.k.len() + 1
    }
}

/// Default chain design: the binomial coefficients of `(s + pole)^{n-1}`,
/// placing all roots at `-pole`.
pub fn hurwitz_coeffs(n: usize, pole: f64) -> Result<ChainDesign> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!(
            "chain length must be at least 1, got {n}"
        )));
    }
    if !(pole > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pole must be positive, got {pole}"
        )));
    }
    let deg = n - 1;
    let mut k = Vec::with_capacity(deg);
    for j in 1..=deg {
        k.push(binomial(deg, j - 1) * pole.powi((deg - (j - 1)) as i32));
    }
    ChainDesign::new(k)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Tracking-error coordinates of one agent against its reference `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCoords {
    pub x_bar: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: f64,
}

/// `x_bar = x - (r, 0, ..., 0)`, `xi` its first `n-1` entries, and the
/// stabilizing scalar `zeta`.
pub fn error_coords(x: &[f64], r: f64, d: &ChainDesign) -> Result<ErrorCoords> {
    let n = x.len();
    if n != d.chain_length() {
        return Err(Error::ShapeMismatch {
            context: "error coordinates",
            expected: d.chain_length(),
            got: n,
        });
    }
    let mut x_bar = x.to_vec();
    x_bar[0] -= r;
    let xi = x_bar[..n - 1].to_vec();
    let zeta = d.k.iter().zip(&x_bar).map(|(k, xb)| k * xb).sum::<f64>() + x_bar[n - 1];
    Ok(ErrorCoords { x_bar, xi, zeta })
}

type KappaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type RhoFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The smooth design functions: scaling `kappa(r)`, damping `rho(zeta, r)`,
/// and adaptation rate `tau(zeta, r) = rho(zeta, r) * zeta^2`.
#[derive(Clone)]
pub struct DesignFunctions {
    kappa: KappaFn,
    rho: RhoFn,
}

impl std::fmt::Debug for DesignFunctions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DesignFunctions")
    }
}

impl DesignFunctions {
    pub fn new(
        kappa: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kappa: Arc::new(kappa),
            rho: Arc::new(rho),
        }
    }

    /// Build from parsed polynomial expressions; `kappa` must not involve
    /// `zeta`.
    pub fn from_exprs(kappa: Expr, rho: Expr) -> Result<Self> {
        if kappa.uses_zeta() {
            return Err(Error::Config("kappa may only depend on r, not zeta".into()));
        }
        Ok(Self::new(
            move |r| kappa.eval(0.0, r),
            move |zeta, r| rho.eval(zeta, r),
        ))
    }

    pub fn kappa(&self, r: f64) -> f64 {
        (self.kappa)(r)
    }

    pub fn rho(&self, zeta: f64, r: f64) -> f64 {
        (self.rho)(zeta, r)
    }

    pub fn tau(&self, zeta: f64, r: f64) -> f64 {
        self.rho(zeta, r) * zeta * zeta
    }

    /// Sanity-check positivity on a grid; catches user expressions that dip
    /// below the admissible floor.
    pub fn validate_on_grid(&self) -> Result<()> {
        for i in -10..=10 {
            let r = i as f64 / 2.0;
            if !(self.kappa(r) >= 1.0) {
                return Err(Error::Config(format!(
                    "kappa({r}) = {} violates kappa >= 1",
                    self.kappa(r)
                )));
            }
            for j in -10..=10 {
                let zeta = j as f64 / 2.0;
                if !(self.rho(zeta, r) >= 1.0) {
                    return Err(Error::Config(format!(
                        "rho({zeta}, {r}) = {} violates rho >= 1",
                        self.rho(zeta, r)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `kappa = 1`, `rho = zeta^4 + 1`: the rendezvous example's choices.
pub fn make_design_example1() -> DesignFunctions {
    DesignFunctions::new(|_r| 1.0, |zeta, _r| zeta.powi(4) + 1.0)
}

/// `kappa = r^4 + 1`, `rho = zeta^4 + r^4 + 1`: the heterogeneous
/// oscillator example's choices.
pub fn make_design_example2() -> DesignFunctions {
    DesignFunctions::new(
        |r| r.powi(4) + 1.0,
        |zeta, r| zeta.powi(4) + r.powi(4) + 1.0,
    )
}

/// Per-agent controller state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub eta: f64,
    pub theta: f64,
    pub r: f64,
    pub v: f64,
}

/// Outputs of one control-law evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDerivatives {
    pub u: f64,
    pub eta_dot: f64,
    pub theta_dot: f64,
    pub r_dot: f64,
    pub v_dot: f64,
}

fn generator_terms(
    cs: &ControllerState,
    neighbor_r: &[f64],
    neighbor_v: &[f64],
    weights: &[f64],
    cost: &CostFunction,
    gains: GeneratorGains,
) -> Result<(f64, f64)> {
    if neighbor_r.len() != weights.len() || neighbor_v.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            context: "controller neighbor lists",
            expected: weights.len(),
            got: neighbor_r.len().max(neighbor_v.len()),
        });
    }
    let mut consensus_r = 0.0;
    let mut consensus_v = 0.0;
    for ((rj, vj), a) in neighbor_r.iter().zip(neighbor_v).zip(weights) {
        consensus_r += a * (cs.r - rj);
        consensus_v += a * (cs.v - vj);
    }
    let r_dot = -gains.alpha * cost.gradient(cs.r) - gains.beta * consensus_r - consensus_v;
    let v_dot = gains.alpha * gains.beta * consensus_r;
    Ok((r_dot, v_dot))
}

/// Full adaptive law:
/// `u = -theta rho(zeta, r) zeta + kappa(r) eta`, with compensator,
/// adaptation, and embedded generator dynamics. Uses only the agent's own
/// state and its in-neighbors' `(r, v)`.
#[allow(clippy::too_many_arguments)]
pub fn control_full(
    cs: &ControllerState,
    zeta: f64,
    d: &DesignFunctions,
    neighbor_r: &[f64],
    neighbor_v: &[f64],
    weights: &[f64],
    cost: &CostFunction,
    gains: GeneratorGains,
) -> Result<ControlDerivatives> {
    let (r_dot, v_dot) = generator_terms(cs, neighbor_r, neighbor_v, weights, cost, gains)?;
    let kappa = d.kappa(cs.r);
    let u = -cs.theta * d.rho(zeta, cs.r) * zeta + kappa * cs.eta;
    Ok(ControlDerivatives {
        u,
        eta_dot: -kappa * cs.eta + u,
        theta_dot: d.tau(zeta, cs.r),
        r_dot,
        v_dot,
    })
}

/// Reduced law for the known-uncertainty-bound case:
/// `u = -rho(zeta, r) zeta + kappa(r) eta`, no adaptation state.
#[allow(clippy::too_many_arguments)]
pub fn control_reduced(
    cs: &ControllerState,
    zeta: f64,
    d: &DesignFunctions,
    neighbor_r: &[f64],
    neighbor_v: &[f64],
    weights: &[f64],
    cost: &CostFunction,
    gains: GeneratorGains,
) -> Result<ControlDerivatives> {
    let (r_dot, v_dot) = generator_terms(cs, neighbor_r, neighbor_v, weights, cost, gains)?;
    let kappa = d.kappa(cs.r);
    let u = -d.rho(zeta, cs.r) * zeta + kappa * cs.eta;
    Ok(ControlDerivatives {
        u,
        eta_dot: -kappa * cs.eta + u,
        theta_dot: 0.0,
        r_dot,
        v_dot,
    })
}
