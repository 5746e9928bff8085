//! Agent dynamics in normal form: an integrator chain of length `n` driven
//! by `g(z, x, w) + b(w) u`, with optional zero dynamics `z_dot = h(z, y, w)`
//! of dimension `m`. The uncertainty vector `w` is a constant parameter
//! draw from a box, never visible to the controller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type ZeroDynFn = Box<dyn Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync>;
type DriftFn = Box<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
type GainFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One agent's dynamics. The captured `w` is the draw the simulation binds
/// this agent to; the component functions still take `w` explicitly so an
/// oracle can probe other parameter values.
pub struct Plant {
    /// Chain length (relative degree), `n >= 1`.
    pub n: usize,
    /// Zero-dynamics dimension, `m >= 0`.
    pub m: usize,
    /// Expected length of the uncertainty slice.
    pub n_w: usize,
    /// Bound uncertainty draw for this agent.
    pub w: Vec<f64>,
    /// Lower bound on the input gain.
    pub b0: f64,
    h: ZeroDynFn,
    g: DriftFn,
    b: GainFn,
    pub label: String,
}

impl std::fmt::Debug for Plant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Plant")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("w", &self.w)
            .field("b0", &self.b0)
            .finish()
    }
}

/// State of one agent: zero-dynamics part plus the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

impl AgentState {
    pub fn output(&self) -> f64 {
        self.x[0]
    }
}

impl Plant {
    pub fn zero_dynamics(&self, z: &[f64], y: f64, w: &[f64]) -> Vec<f64> {
        (self.h)(z, y, w)
    }

    pub fn drift(&self, z: &[f64], x: &[f64], w: &[f64]) -> f64 {
        (self.g)(z, x, w)
    }

    pub fn input_gain(&self, w: &[f64]) -> f64 {
        (self.b)(w)
    }

    fn check_dims(&self, s: &AgentState, w: &[f64]) -> Result<()> {
        if s.z.len() != self.m {
            return Err(Error::ShapeMismatch {
                context: "plant zero-dynamics state",
                expected: self.m,
                got: s.z.len(),
            });
        }
        if s.x.len() != self.n {
            return Err(Error::ShapeMismatch {
                context: "plant chain state",
                expected: self.n,
                got: s.x.len(),
            });
        }
        if w.len() != self.n_w {
            return Err(Error::ShapeMismatch {
                context: "plant uncertainty slice",
                expected: self.n_w,
                got: w.len(),
            });
        }
        Ok(())
    }
}

/// Time derivative of one agent's state under input `u` and uncertainty `w`.
pub fn plant_field(p: &Plant, s: &AgentState, u: f64, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    p.check_dims(s, w)?;
    let z_dot = p.zero_dynamics(&s.z, s.x[0], w);
    let mut x_dot = vec![0.0; p.n];
    for k in 0..p.n - 1 {
        x_dot[k] = s.x[k + 1];
    }
    x_dot[p.n - 1] = p.drift(&s.z, &s.x, w) + p.input_gain(w) * u;
    Ok((z_dot, x_dot))
}

/// Single-link manipulator with a flexible joint, rewritten as a length-4
/// chain on `x = (q1, q1', q1'', q1''')`. The link's mass and length scale
/// with the two uncertainty components: `M = (1 + w[0]) m0`,
/// `L = (1 + w[1]) l0`.
#[allow(clippy::too_many_arguments)]
pub fn make_manipulator(
    j1: f64,
    j2: f64,
    m0: f64,
    l0: f64,
    k: f64,
    grav: f64,
    w: Vec<f64>,
) -> Result<Plant> {
    for (name, v) in [
        ("j1", j1),
        ("j2", j2),
        ("m0", m0),
        ("l0", l0),
        ("k", k),
        ("grav", grav),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "manipulator parameter {name} must be positive, got {v}"
            )));
        }
    }
    if w.len() != 2 {
        return Err(Error::ShapeMismatch {
            context: "manipulator uncertainty",
            expected: 2,
            got: w.len(),
        });
    }
    let b_val = k / (j1 * j2);
    let g = move |_z: &[f64], x: &[f64], w: &[f64]| {
        let mgl = (1.0 + w[0]) * m0 * grav * (1.0 + w[1]) * l0;
        -x[2] * (mgl / j1 * x[0].cos() + k / j1 + k / j2)
            + mgl / j1 * (x[1] * x[1] - k / j2) * x[0].sin()
    };
    Ok(Plant {
        n: 4,
        m: 0,
        n_w: 2,
        w,
        b0: b_val,
        h: Box::new(|_z, _y, _w| Vec::new()),
        g: Box::new(g),
        b: Box::new(move |_w| b_val),
        label: "manipulator".into(),
    })
}

/// Physical parameters of the manipulator, bundled for the oracle helpers.
#[derive(Debug, Clone, Copy)]
pub struct ManipulatorParams {
    pub j1: f64,
    pub j2: f64,
    pub m0: f64,
    pub l0: f64,
    pub k: f64,
    pub grav: f64,
}

impl ManipulatorParams {
    pub fn unit() -> Self {
        Self {
            j1: 1.0,
            j2: 1.0,
            m0: 1.0,
            l0: 1.0,
            k: 1.0,
            grav: 1.0,
        }
    }

    pub fn mgl(&self, w: &[f64]) -> f64 {
        (1.0 + w[0]) * self.m0 * self.grav * (1.0 + w[1]) * self.l0
    }

    /// Second-order form of the manipulator on `(q1, q1', q2, q2')`; the
    /// reference dynamics the chain form must reproduce.
    pub fn second_order_field(&self, q: &[f64; 4], u: f64, w: &[f64]) -> [f64; 4] {
        let mgl = self.mgl(w);
        let q1dd = (-mgl * q[0].sin() - self.k * (q[0] - q[2])) / self.j1;
        let q2dd = (self.k * (q[0] - q[2]) + u) / self.j2;
        [q[1], q1dd, q[3], q2dd]
    }

    /// Map physical initial data `(q1, q1', q2, q2')` to the chain state
    /// `(q1, q1', q1'', q1''')` using the model equations.
    pub fn chain_state_from_physical(&self, q: &[f64; 4], w: &[f64]) -> [f64; 4] {
        let mgl = self.mgl(w);
        let q1dd = (-mgl * q[0].sin() - self.k * (q[0] - q[2])) / self.j1;
        let q1ddd = (-mgl * q[0].cos() * q[1] - self.k * (q[1] - q[3])) / self.j1;
        [q[0], q[1], q1dd, q1ddd]
    }
}

/// FitzHugh-Nagumo dynamics: scalar chain with one-dimensional zero
/// dynamics. Uncertainty slice layout: `w = [w3, w4, w5, w6]`.
pub fn make_fhn(a: f64, b_par: f64, c: f64, w: Vec<f64>) -> Result<Plant> {
    for (name, v) in [("a", a), ("b", b_par), ("c", c)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fhn parameter {name} must be positive, got {v}"
            )));
        }
    }
    if w.len() != 4 {
        return Err(Error::ShapeMismatch {
            context: "fhn uncertainty",
            expected: 4,
            got: w.len(),
        });
    }
    let b0 = (1.0 + w[2]).min(1.0);
    if !(b0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fhn input gain 1 + w5 = {} must be positive",
            1.0 + w[2]
        )));
    }
    Ok(Plant {
        n: 1,
        m: 1,
        n_w: 4,
        w,
        b0,
        h: Box::new(move |z, y, w| vec![-(1.0 + w[0]) * c * z[0] + (1.0 - w[1]) * b_par * y]),
        g: Box::new(move |z, x, w| (1.0 + w[3]) * x[0] * (a - x[0]) * (x[0] - 1.0) - z[0]),
        b: Box::new(|w| 1.0 + w[2]),
        label: "fhn".into(),
    })
}

/// Van der Pol oscillator: length-2 chain, no zero dynamics. Uncertainty
/// slice layout: `w = [w3, w4, w5]`.
pub fn make_vdp(w: Vec<f64>) -> Result<Plant> {
    if w.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "vdp uncertainty",
            expected: 3,
            got: w.len(),
        });
    }
    let b0 = (1.0 + w[2]).min(1.0);
    if !(b0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "vdp input gain 1 + w5 = {} must be positive",
            1.0 + w[2]
        )));
    }
    Ok(Plant {
        n: 2,
        m: 0,
        n_w: 3,
        w,
        b0,
        h: Box::new(|_z, _y, _w| Vec::new()),
        g: Box::new(|_z, x, w| -(1.0 + w[0]) * x[0] + (1.0 + w[1]) * (1.0 - x[0] * x[0]) * x[1]),
        b: Box::new(|w| 1.0 + w[2]),
        label: "vdp".into(),
    })
}

/// Pure integrator chain of length `n` with unit input gain; the degenerate
/// plant that reduces the closed loop to reference tracking.
pub fn make_integrator_chain(n: usize) -> Result<Plant> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "integrator chain needs n >= 1".into(),
        ));
    }
    Ok(Plant {
        n,
        m: 0,
        n_w: 0,
        w: Vec::new(),
        b0: 1.0,
        h: Box::new(|_z, _y, _w| Vec::new()),
        g: Box::new(|_z, _x, _w| 0.0),
        b: Box::new(|_w| 1.0),
        label: format!("integrator{n}"),
    })
}

/// Box specification for uncertainty draws.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per-component nonnegativity constraints; empty means unconstrained.
    pub nonneg: Vec<bool>,
}

impl UncertaintySpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nonneg: Vec<bool>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::ShapeMismatch {
                context: "uncertainty box",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if !nonneg.is_empty() && nonneg.len() != lower.len() {
            return Err(Error::ShapeMismatch {
                context: "uncertainty sign constraints",
                expected: lower.len(),
                got: nonneg.len(),
            });
        }
        for (k, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidRange(format!(
                    "uncertainty component {k}: lower {lo} > upper {hi}"
                )));
            }
            if lo > 0.0 || hi < 0.0 {
                return Err(Error::InvalidRange(format!(
                    "uncertainty component {k}: box [{lo}, {hi}] must contain 0"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            nonneg,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Deterministic pseudorandom draw from the box; identical seed, identical
/// vector.
pub fn sample_uncertainty(spec: &UncertaintySpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_uncertainty(spec, &mut rng)
}

/// Draw from the box using the caller's RNG stream.
pub fn draw_uncertainty(spec: &UncertaintySpec, rng: &mut impl Rng) -> Vec<f64> {
    (0..spec.dim())
        .map(|k| {
            let lo = if spec.nonneg.get(k).copied().unwrap_or(false) {
                spec.lower[k].max(0.0)
            } else {
                spec.lower[k]
            };
            let hi = spec.upper[k];
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_w(dim: usize, seed: u64) -> Vec<f64> {
        let spec = UncertaintySpec::new(vec![-0.4; dim], vec![0.4; dim], vec![]).unwrap();
        sample_uncertainty(&spec, seed)
    }

    #[test]
    fn origin_is_an_equilibrium_for_all_builtins() {
        for seed in 0..100u64 {
            let w2 = random_w(2, seed);
            let p = make_manipulator(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, w2.clone()).unwrap();
            let s = AgentState {
                z: vec![],
                x: vec![0.0; 4],
            };
            let (_, x_dot) = plant_field(&p, &s, 0.0, &w2).unwrap();
            assert!(x_dot.iter().all(|v| v.abs() <= 1e-12));

            let w4 = random_w(4, seed);
            let p = make_fhn(0.2, 0.8, 0.8, w4.clone()).unwrap();
            let s = AgentState {
                z: vec![0.0],
                x: vec![0.0],
            };
            let (z_dot, x_dot) = plant_field(&p, &s, 0.0, &w4).unwrap();
            assert!(z_dot[0].abs() <= 1e-12 && x_dot[0].abs() <= 1e-12);

            let w3 = random_w(3, seed);
            let p = make_vdp(w3.clone()).unwrap();
            let s = AgentState {
                z: vec![],
                x: vec![0.0, 0.0],
            };
            let (_, x_dot) = plant_field(&p, &s, 0.0, &w3).unwrap();
            assert!(x_dot.iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn integrator_chain_shifts_and_feeds_input() {
        let p = make_integrator_chain(2).unwrap();
        let s = AgentState {
            z: vec![],
            x: vec![1.0, 2.0],
        };
        let (_, x_dot) = plant_field(&p, &s, 3.0, &[]).unwrap();
        assert_eq!(x_dot, vec![2.0, 3.0]);
    }

    #[test]
    fn manipulator_unit_parameters() {
        let p = make_manipulator(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(p.input_gain(&[0.0, 0.0]), 1.0);
        assert_eq!(p.drift(&[], &[0.0; 4], &[0.0, 0.0]), 0.0);
        // Upright at rest: the drift is -(mgl * k / j2) * sin(pi/2) = -1.
        let x = [std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0];
        assert!((p.drift(&[], &x, &[0.0, 0.0]) + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn manipulator_drift_scales_with_uncertainty() {
        let w = vec![0.2, 0.1];
        let p = make_manipulator(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, w.clone()).unwrap();
        let x = [1.0, 1.0, 1.0, 1.0];
        let mgl = 1.2 * 1.1;
        let want = -1.0 * (mgl * 1f64.cos() + 2.0) + mgl * (1.0 - 1.0) * 1f64.sin();
        assert!((p.drift(&[], &x, &w) - want).abs() <= 1e-12);
    }

    #[test]
    fn manipulator_rejects_nonpositive_parameters() {
        assert!(matches!(
            make_manipulator(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, vec![0.0, 0.0]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn fhn_hand_values() {
        let w = vec![0.0; 4];
        let p = make_fhn(0.2, 0.8, 0.8, w.clone()).unwrap();
        let z_dot = p.zero_dynamics(&[1.0], 0.5, &w);
        assert!((z_dot[0] + 0.4).abs() <= 1e-12);
        assert!((p.drift(&[1.0], &[0.5], &w) + 0.925).abs() <= 1e-12);
        // The cubic has a root at x = 1.
        assert!(p.drift(&[0.0], &[1.0], &w).abs() <= 1e-12);
    }

    #[test]
    fn vdp_hand_values() {
        let p = make_vdp(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.drift(&[], &[0.0, 0.0], &[0.0, 0.0, 0.0]), 0.0);
        // x1 = 1 kills the nonlinear term.
        assert_eq!(p.drift(&[], &[1.0, 5.0], &[0.0, 0.0, 0.0]), -1.0);
        let p = make_vdp(vec![0.1, 0.2, 0.3]).unwrap();
        assert!((p.input_gain(&p.w.clone()) - 1.3).abs() <= 1e-12);
    }

    #[test]
    fn plant_field_rejects_shape_mismatch() {
        let p = make_vdp(vec![0.0; 3]).unwrap();
        let s = AgentState {
            z: vec![],
            x: vec![0.0],
        };
        assert!(matches!(
            plant_field(&p, &s, 0.0, &[0.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_contained() {
        let spec =
            UncertaintySpec::new(vec![-0.5, 0.0], vec![0.5, 0.5], vec![true, false]).unwrap();
        assert_eq!(sample_uncertainty(&spec, 7), sample_uncertainty(&spec, 7));

        for seed in 0..1000u64 {
            let w = sample_uncertainty(&spec, seed);
            // Component 0 is sign-constrained despite its negative lower bound.
            assert!((0.0..=0.5).contains(&w[0]));
            assert!((0.0..=0.5).contains(&w[1]));
        }

        let degenerate = UncertaintySpec::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![]).unwrap();
        assert_eq!(sample_uncertainty(&degenerate, 3), vec![0.0, 0.0]);
    }

    #[test]
    fn input_gain_stays_above_floor_on_samples() {
        let spec = UncertaintySpec::new(
            vec![0.0, -0.3, 0.0, -0.3],
            vec![0.3, 0.3, 0.3, 0.3],
            vec![true, false, true, false],
        )
        .unwrap();
        for seed in 0..1000u64 {
            let w = sample_uncertainty(&spec, seed);
            let p = make_fhn(0.2, 0.8, 0.8, w.clone()).unwrap();
            assert!(p.input_gain(&w) >= p.b0);
        }
    }

    #[test]
    fn uncertainty_spec_rejects_bad_boxes() {
        assert!(UncertaintySpec::new(vec![1.0], vec![0.0], vec![]).is_err());
        assert!(UncertaintySpec::new(vec![0.5], vec![1.0], vec![]).is_err());
    }
}
