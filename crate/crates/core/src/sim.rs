//! Fixed-step integration of the closed loop (plants + controllers +
//! embedded generator), trajectory logging, and the convergence metrics
//! the run report is built from.
//!
//! State layout: agents are concatenated, each contributing
//! `[z (m_i) | x (n_i) | eta | theta | r | v]`. A single run is integrated
//! sequentially; sweeps over seeds fan out across threads when the
//! `parallel` feature is enabled.

use serde::Serialize;

use nalgebra::DVector;

use crate::controller::{control_full, control_reduced, ControllerMode, ControllerState};
use crate::costs::CostEnsemble;
use crate::error::{Error, Result};
use crate::generator::{
    generator_equilibrium, generator_field, lyapunov_vo, GeneratorGains, GeneratorState,
};
use crate::graph::{complement_basis, Digraph};
use crate::plants::Plant;
use crate::scenario::Scenario;

/// Components beyond this magnitude abort the run as divergent.
pub const DIVERGENCE_CUTOFF: f64 = 1e9;

/// Additive slack allowed in the per-step Lyapunov descent check.
pub const VO_DESCENT_TOL: f64 = 1e-9;

/// Floor added before taking logs in the exponential fit.
const LOG_FLOOR: f64 = 1e-15;

/// Classical fourth-order Runge-Kutta update. Errors if the field produces
/// a non-finite derivative, naming the offending component.
pub fn rk4_step<F>(mut field: F, s: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    assert!(h > 0.0, "step size must be positive");
    let mut wrapped = |state: &[f64], out: &mut [f64]| -> Result<()> {
        let d = field(state)?;
        out.copy_from_slice(&d);
        Ok(())
    };
    let mut ws = Rk4Workspace::new(s.len());
    let mut next = s.to_vec();
    ws.step(&mut wrapped, &mut next, h)?;
    Ok(next)
}

/// Reusable RK4 buffers for the integration loop.
struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step<F>(&mut self, field: &mut F, s: &mut [f64], h: f64) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let dim = s.len();
        field(s, &mut self.k1)?;
        check_finite(&self.k1)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + 0.5 * h * self.k1[i];
        }
        field(&self.tmp, &mut self.k2)?;
        check_finite(&self.k2)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + 0.5 * h * self.k2[i];
        }
        field(&self.tmp, &mut self.k3)?;
        check_finite(&self.k3)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + h * self.k3[i];
        }
        field(&self.tmp, &mut self.k4)?;
        check_finite(&self.k4)?;
        for i in 0..dim {
            s[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(d: &[f64]) -> Result<()> {
    for (i, v) in d.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Divergence {
                time: f64::NAN,
                component: i,
                value: *v,
            });
        }
    }
    Ok(())
}

/// Offsets of each agent's block in the flat state vector.
#[derive(Debug, Clone)]
pub struct StateLayout {
    pub z_off: Vec<usize>,
    pub x_off: Vec<usize>,
    pub eta: Vec<usize>,
    pub theta: Vec<usize>,
    pub r: Vec<usize>,
    pub v: Vec<usize>,
    pub dim: usize,
    pub n_agents: usize,
}

impl StateLayout {
    pub fn new(plants: &[Plant]) -> Self {
        let n_agents = plants.len();
        let mut z_off = Vec::with_capacity(n_agents);
        let mut x_off = Vec::with_capacity(n_agents);
        let mut eta = Vec::with_capacity(n_agents);
        let mut theta = Vec::with_capacity(n_agents);
        let mut r = Vec::with_capacity(n_agents);
        let mut v = Vec::with_capacity(n_agents);
        let mut off = 0;
        for p in plants {
            z_off.push(off);
            off += p.m;
            x_off.push(off);
            off += p.n;
            eta.push(off);
            off += 1;
            theta.push(off);
            off += 1;
            r.push(off);
            off += 1;
            v.push(off);
            off += 1;
        }
        Self {
            z_off,
            x_off,
            eta,
            theta,
            r,
            v,
            dim: off,
            n_agents,
        }
    }
}

/// A fully materialized closed loop: one seed's plants, resolved costs,
/// chain designs, design functions, and gains, wired over the digraph.
pub struct ClosedLoop {
    pub digraph: Digraph,
    pub costs: CostEnsemble,
    pub plants: Vec<Plant>,
    pub chains: Vec<crate::controller::ChainDesign>,
    pub design: crate::controller::DesignFunctions,
    pub mode: ControllerMode,
    pub gains: GeneratorGains,
    pub layout: StateLayout,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl ClosedLoop {
    pub fn new(
        digraph: Digraph,
        costs: CostEnsemble,
        plants: Vec<Plant>,
        chains: Vec<crate::controller::ChainDesign>,
        design: crate::controller::DesignFunctions,
        mode: ControllerMode,
        gains: GeneratorGains,
    ) -> Result<Self> {
        let n = digraph.n_nodes();
        if costs.len() != n || plants.len() != n || chains.len() != n {
            return Err(Error::Config(format!(
                "agent count mismatch: graph has {n} nodes, {} costs, {} plants, {} chains",
                costs.len(),
                plants.len(),
                chains.len()
            )));
        }
        for (i, (p, c)) in plants.iter().zip(&chains).enumerate() {
            if c.chain_length() != p.n {
                return Err(Error::Config(format!(
                    "agent {i}: chain design of length {} does not match plant order {}",
                    c.chain_length(),
                    p.n
                )));
            }
        }
        let layout = StateLayout::new(&plants);
        let neighbors = (0..n).map(|i| digraph.in_neighbors(i)).collect();
        Ok(Self {
            digraph,
            costs,
            plants,
            chains,
            design,
            mode,
            gains,
            layout,
            neighbors,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.layout.n_agents
    }

    fn zeta(&self, i: usize, s: &[f64]) -> f64 {
        let p = &self.plants[i];
        let x = &s[self.layout.x_off[i]..self.layout.x_off[i] + p.n];
        let r = s[self.layout.r[i]];
        let mut zeta = x[p.n - 1] - if p.n == 1 { r } else { 0.0 };
        for (j, k) in self.chains[i].k.iter().enumerate() {
            let xb = if j == 0 { x[0] - r } else { x[j] };
            zeta += k * xb;
        }
        zeta
    }

    /// Control inputs of all agents at the state `s`.
    pub fn controls(&self, s: &[f64]) -> Vec<f64> {
        (0..self.n_agents())
            .map(|i| {
                let zeta = self.zeta(i, s);
                let theta = s[self.layout.theta[i]];
                let r = s[self.layout.r[i]];
                let eta = s[self.layout.eta[i]];
                match self.mode {
                    ControllerMode::Full => {
                        -theta * self.design.rho(zeta, r) * zeta + self.design.kappa(r) * eta
                    }
                    ControllerMode::Reduced => {
                        -self.design.rho(zeta, r) * zeta + self.design.kappa(r) * eta
                    }
                }
            })
            .collect()
    }

    /// Closed-loop vector field. All agents are evaluated against the same
    /// state snapshot (synchronous coupling).
    pub fn field(
        &self,
        s: &[f64],
        out: &mut [f64],
        scratch_r: &mut Vec<f64>,
        scratch_v: &mut Vec<f64>,
        scratch_w: &mut Vec<f64>,
    ) -> Result<()> {
        for i in 0..self.n_agents() {
            let p = &self.plants[i];
            let lay = &self.layout;
            scratch_r.clear();
            scratch_v.clear();
            scratch_w.clear();
            for &(j, a) in &self.neighbors[i] {
                scratch_r.push(s[lay.r[j]]);
                scratch_v.push(s[lay.v[j]]);
                scratch_w.push(a);
            }
            let cs = ControllerState {
                eta: s[lay.eta[i]],
                theta: s[lay.theta[i]],
                r: s[lay.r[i]],
                v: s[lay.v[i]],
            };
            let zeta = self.zeta(i, s);
            let ctrl = match self.mode {
                ControllerMode::Full => control_full(
                    &cs,
                    zeta,
                    &self.design,
                    scratch_r,
                    scratch_v,
                    scratch_w,
                    self.costs.cost(i),
                    self.gains,
                )?,
                ControllerMode::Reduced => control_reduced(
                    &cs,
                    zeta,
                    &self.design,
                    scratch_r,
                    scratch_v,
                    scratch_w,
                    self.costs.cost(i),
                    self.gains,
                )?,
            };

            let z = &s[lay.z_off[i]..lay.z_off[i] + p.m];
            let x = &s[lay.x_off[i]..lay.x_off[i] + p.n];
            let z_dot = p.zero_dynamics(z, x[0], &p.w);
            out[lay.z_off[i]..lay.z_off[i] + p.m].copy_from_slice(&z_dot);
            for k in 0..p.n - 1 {
                out[lay.x_off[i] + k] = x[k + 1];
            }
            out[lay.x_off[i] + p.n - 1] = p.drift(z, x, &p.w) + p.input_gain(&p.w) * ctrl.u;
            out[lay.eta[i]] = ctrl.eta_dot;
            out[lay.theta[i]] = ctrl.theta_dot;
            out[lay.r[i]] = ctrl.r_dot;
            out[lay.v[i]] = ctrl.v_dot;
        }
        Ok(())
    }
}

/// Time-indexed closed-loop log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Full state vector at each logged instant.
    pub states: Vec<Vec<f64>>,
    /// Agent outputs `y_i = x_{i1}`.
    pub outputs: Vec<Vec<f64>>,
    /// Control inputs `u_i`.
    pub inputs: Vec<Vec<f64>>,
    /// Reference states `r_i`.
    pub references: Vec<Vec<f64>>,
    /// Adaptive gains `theta_i` (zero in reduced mode).
    pub thetas: Vec<Vec<f64>>,
    /// Dual states `v_i`.
    pub duals: Vec<Vec<f64>>,
    /// Generator Lyapunov monitor at each logged instant.
    pub vo: Vec<f64>,
}

impl Trajectory {
    pub fn n_agents(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }

    /// CSV export: `t, y_*, r_*, u_*, theta_*, v_*`, full double precision.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let n = self.n_agents();
        write!(w, "t")?;
        for tag in ["y", "r", "u", "theta", "v"] {
            for i in 1..=n {
                write!(w, ",{tag}_{i}")?;
            }
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for series in [
                &self.outputs,
                &self.references,
                &self.inputs,
                &self.thetas,
                &self.duals,
            ] {
                for val in &series[k] {
                    write!(w, ",{val}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Slope and fit quality of a log-linear regression.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ExpFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, ln(value + floor))`.
pub fn log_linear_fit(times: &[f64], values: &[f64]) -> ExpFit {
    assert_eq!(times.len(), values.len());
    let n = times.len() as f64;
    if times.len() < 2 {
        return ExpFit {
            rate: 0.0,
            r_squared: 1.0,
        };
    }
    let logs: Vec<f64> = values.iter().map(|v| (v + LOG_FLOOR).ln()).collect();
    let mean_t = times.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stl = 0.0;
    let mut sll = 0.0;
    for (t, l) in times.iter().zip(&logs) {
        stt += (t - mean_t) * (t - mean_t);
        stl += (t - mean_t) * (l - mean_l);
        sll += (l - mean_l) * (l - mean_l);
    }
    if stt == 0.0 {
        return ExpFit {
            rate: 0.0,
            r_squared: 1.0,
        };
    }
    let rate = stl / stt;
    let r_squared = if sll == 0.0 {
        1.0
    } else {
        stl * stl / (stt * sll)
    };
    ExpFit { rate, r_squared }
}

/// Summary statistics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub y_star: f64,
    pub t_end: f64,
    pub final_output_errors: Vec<f64>,
    pub max_state_norm: f64,
    pub theta_final: Vec<f64>,
    pub exp_fit: ExpFit,
    pub vo_monotone: bool,
    pub v_sum_drift: f64,
    pub semistable: bool,
    pub gains: GeneratorGains,
    pub gains_meet_bounds: bool,
}

/// Pass-through configuration for [`compute_metrics`].
#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig {
    pub tol_out: f64,
    pub seed: u64,
    pub gains: GeneratorGains,
    pub gains_meet_bounds: bool,
}

/// Derive the run report from a logged trajectory.
pub fn compute_metrics(t: &Trajectory, y_star: f64, cfg: &MetricsConfig) -> RunReport {
    assert!(!t.times.is_empty(), "trajectory must be nonempty");
    let last = t.times.len() - 1;
    let final_output_errors: Vec<f64> =
        t.outputs[last].iter().map(|y| (y - y_star).abs()).collect();
    let max_state_norm = t
        .states
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let theta_final = t.thetas[last].clone();

    // Log-linear fit of the worst output error over the trailing half.
    let t_end = t.times[last];
    let half = t
        .times
        .iter()
        .position(|&tt| tt >= t_end / 2.0)
        .unwrap_or(0);
    let fit_times = &t.times[half..];
    let worst: Vec<f64> = (half..t.times.len())
        .map(|k| {
            t.outputs[k]
                .iter()
                .map(|y| (y - y_star).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let exp_fit = log_linear_fit(fit_times, &worst);

    let vo_monotone = t.vo.windows(2).all(|w| w[1] <= w[0] + VO_DESCENT_TOL);

    let v0: f64 = t.duals[0].iter().sum();
    let v_sum_drift = t
        .duals
        .iter()
        .map(|v| (v.iter().sum::<f64>() - v0).abs())
        .fold(0.0f64, f64::max);

    let semistable =
        final_output_errors.iter().all(|e| *e <= cfg.tol_out) && max_state_norm.is_finite();

    RunReport {
        seed: cfg.seed,
        y_star,
        t_end,
        final_output_errors,
        max_state_norm,
        theta_final,
        exp_fit,
        vo_monotone,
        v_sum_drift,
        semistable,
        gains: cfg.gains,
        gains_meet_bounds: cfg.gains_meet_bounds,
    }
}

/// Integration window parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: default_h(),
            t_end: default_t_end(),
            log_every: default_log_every(),
        }
    }
}

fn default_h() -> f64 {
    1e-3
}

fn default_t_end() -> f64 {
    30.0
}

fn default_log_every() -> usize {
    100
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::Config(format!(
                "step h = {} must be positive",
                self.h
            )));
        }
        if !(self.t_end >= 10.0 * self.h) {
            return Err(Error::Config(format!(
                "horizon t_end = {} must be at least 10 steps",
                self.t_end
            )));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }
}

/// Integrate a materialized closed loop from `x0`, logging every
/// `log_every` steps plus the final state.
pub fn integrate(sys: &ClosedLoop, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.len() != sys.layout.dim {
        return Err(Error::ShapeMismatch {
            context: "initial state",
            expected: sys.layout.dim,
            got: x0.len(),
        });
    }
    let eq = generator_equilibrium(&sys.costs, &sys.digraph, sys.gains.alpha)?;
    let basis = complement_basis(sys.digraph.n_nodes())?;

    let mut scratch_r = Vec::new();
    let mut scratch_v = Vec::new();
    let mut scratch_w = Vec::new();
    let mut field = |s: &[f64], out: &mut [f64]| -> Result<()> {
        sys.field(s, out, &mut scratch_r, &mut scratch_v, &mut scratch_w)
    };

    let mut state = x0.to_vec();
    let mut ws = Rk4Workspace::new(state.len());
    let n_steps = cfg.n_steps();

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        outputs: Vec::new(),
        inputs: Vec::new(),
        references: Vec::new(),
        thetas: Vec::new(),
        duals: Vec::new(),
        vo: Vec::new(),
    };

    let log = |traj: &mut Trajectory, t: f64, s: &[f64]| {
        let lay = &sys.layout;
        traj.times.push(t);
        traj.states.push(s.to_vec());
        traj.outputs
            .push((0..sys.n_agents()).map(|i| s[lay.x_off[i]]).collect());
        traj.inputs.push(sys.controls(s));
        traj.references
            .push((0..sys.n_agents()).map(|i| s[lay.r[i]]).collect());
        traj.thetas
            .push((0..sys.n_agents()).map(|i| s[lay.theta[i]]).collect());
        traj.duals
            .push((0..sys.n_agents()).map(|i| s[lay.v[i]]).collect());
        let gs = GeneratorState {
            r: DVector::from_fn(sys.n_agents(), |i, _| s[lay.r[i]]),
            v: DVector::from_fn(sys.n_agents(), |i, _| s[lay.v[i]]),
        };
        traj.vo.push(lyapunov_vo(&gs, &eq, &basis, sys.gains.alpha));
    };

    log(&mut traj, 0.0, &state);
    for step in 1..=n_steps {
        let t = step as f64 * cfg.h;
        ws.step(&mut field, &mut state, cfg.h)
            .map_err(|e| match e {
                Error::Divergence {
                    component, value, ..
                } => Error::Divergence {
                    time: t,
                    component,
                    value,
                },
                other => other,
            })?;
        for (i, v) in state.iter().enumerate() {
            if !v.is_finite() || v.abs() > DIVERGENCE_CUTOFF {
                return Err(Error::Divergence {
                    time: t,
                    component: i,
                    value: *v,
                });
            }
        }
        if step % cfg.log_every == 0 || step == n_steps {
            log(&mut traj, t, &state);
        }
    }
    Ok(traj)
}

/// Materialize and run one seed of a scenario.
pub fn run_closed_loop(sc: &Scenario, seed: u64) -> Result<(Trajectory, RunReport)> {
    let m = sc.materialize(seed)?;
    let traj = integrate(&m.closed_loop, &m.x0, &sc.integrator)?;
    let y_star =
        crate::costs::global_optimum(&m.closed_loop.costs, crate::costs::DEFAULT_GRAD_TOL)?;
    let cfg = MetricsConfig {
        tol_out: sc.tol_out,
        seed,
        gains: sc.gains,
        gains_meet_bounds: sc.gains_meet_bounds,
    };
    let report = compute_metrics(&traj, y_star, &cfg);
    Ok((traj, report))
}

/// Run a scenario over many seeds sequentially.
pub fn run_sweep_seq(sc: &Scenario, seeds: &[u64]) -> Vec<(u64, Result<(Trajectory, RunReport)>)> {
    seeds
        .iter()
        .map(|&seed| (seed, run_closed_loop(sc, seed)))
        .collect()
}

/// Run a scenario over many seeds on the rayon thread pool.
#[cfg(feature = "parallel")]
pub fn run_sweep_par(sc: &Scenario, seeds: &[u64]) -> Vec<(u64, Result<(Trajectory, RunReport)>)> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| (seed, run_closed_loop(sc, seed)))
        .collect()
}

/// Seed sweep; data-parallel when the `parallel` feature is enabled,
/// sequential otherwise.
pub fn run_sweep(sc: &Scenario, seeds: &[u64]) -> Vec<(u64, Result<(Trajectory, RunReport)>)> {
    #[cfg(feature = "parallel")]
    {
        run_sweep_par(sc, seeds)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_seq(sc, seeds)
    }
}

/// Generator-only trajectory log.
#[derive(Debug, Clone)]
pub struct GeneratorRun {
    pub times: Vec<f64>,
    pub r: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub vo: Vec<f64>,
    pub y_star: f64,
}

/// Integrate the signal generator alone (no plants attached).
#[allow(clippy::too_many_arguments)]
pub fn integrate_generator(
    e: &CostEnsemble,
    g: &Digraph,
    gains: GeneratorGains,
    r0: &[f64],
    v0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<GeneratorRun> {
    cfg.validate()?;
    let n = g.n_nodes();
    if r0.len() != n || v0.len() != n {
        return Err(Error::ShapeMismatch {
            context: "generator initial state",
            expected: n,
            got: r0.len().min(v0.len()),
        });
    }
    let eq = generator_equilibrium(e, g, gains.alpha)?;
    let basis = complement_basis(n)?;

    let mut field = |s: &[f64], out: &mut [f64]| -> Result<()> {
        let gs = GeneratorState {
            r: DVector::from_column_slice(&s[..n]),
            v: DVector::from_column_slice(&s[n..]),
        };
        let (r_dot, v_dot) = generator_field(&gs, e, g, gains)?;
        out[..n].copy_from_slice(r_dot.as_slice());
        out[n..].copy_from_slice(v_dot.as_slice());
        Ok(())
    };

    let mut state = Vec::with_capacity(2 * n);
    state.extend_from_slice(r0);
    state.extend_from_slice(v0);
    let mut ws = Rk4Workspace::new(2 * n);

    let mut run = GeneratorRun {
        times: Vec::new(),
        r: Vec::new(),
        v: Vec::new(),
        vo: Vec::new(),
        y_star: eq.y_star,
    };
    let log = |run: &mut GeneratorRun, t: f64, s: &[f64]| {
        run.times.push(t);
        run.r.push(s[..n].to_vec());
        run.v.push(s[n..].to_vec());
        let gs = GeneratorState {
            r: DVector::from_column_slice(&s[..n]),
            v: DVector::from_column_slice(&s[n..]),
        };
        run.vo.push(lyapunov_vo(&gs, &eq, &basis, gains.alpha));
    };

    log(&mut run, 0.0, &state);
    let n_steps = cfg.n_steps();
    for step in 1..=n_steps {
        let t = step as f64 * cfg.h;
        ws.step(&mut field, &mut state, cfg.h)?;
        for (i, val) in state.iter().enumerate() {
            if !val.is_finite() || val.abs() > DIVERGENCE_CUTOFF {
                return Err(Error::Divergence {
                    time: t,
                    component: i,
                    value: *val,
                });
            }
        }
        if step % cfg.log_every == 0 || step == n_steps {
            log(&mut run, t, &state);
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_matches_the_truncated_exponential() {
        let next = rk4_step(|s| Ok(vec![-s[0]]), &[1.0], 0.1).unwrap();
        assert!((next[0] - 0.90483750).abs() <= 1e-8);
    }

    #[test]
    fn rk4_keeps_constants_fixed() {
        let next = rk4_step(|_| Ok(vec![0.0, 0.0]), &[3.0, -1.0], 0.5).unwrap();
        assert_eq!(next, vec![3.0, -1.0]);
    }

    #[test]
    fn rk4_reports_nonfinite_derivative_component() {
        let err = rk4_step(|_| Ok(vec![0.0, f64::NAN]), &[0.0, 0.0], 0.1).unwrap_err();
        match err {
            Error::Divergence { component, .. } => assert_eq!(component, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// Order-of-accuracy sweep against the closed-form rotation solution.
    #[test]
    fn rk4_is_fourth_order() {
        let field = |s: &[f64]| Ok(vec![s[1], -s[0]]);
        let exact = |t: f64| [t.cos(), -t.sin()];
        let max_err = |h: f64| {
            let steps = (1.0 / h).round() as usize;
            let mut s = vec![1.0, 0.0];
            let mut worst = 0.0f64;
            for k in 1..=steps {
                s = rk4_step(field, &s, h).unwrap();
                let e = exact(k as f64 * h);
                worst = worst.max((s[0] - e[0]).abs().max((s[1] - e[1]).abs()));
            }
            worst
        };
        let factor = max_err(0.02) / max_err(0.01);
        assert!(
            (12.0..=20.0).contains(&factor),
            "step-halving factor {factor}"
        );
    }

    #[test]
    fn fit_recovers_synthetic_exponential_rate() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let fit = log_linear_fit(&times, &values);
        assert!((fit.rate + 1.0).abs() <= 0.05, "rate {}", fit.rate);
        assert!(fit.r_squared >= 0.99);
    }

    #[test]
    fn fit_handles_constant_series() {
        let times = [0.0, 1.0, 2.0];
        let values = [0.0, 0.0, 0.0];
        let fit = log_linear_fit(&times, &values);
        assert_eq!(fit.rate, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    fn synthetic_trajectory(times: Vec<f64>, outputs: Vec<Vec<f64>>) -> Trajectory {
        let n = outputs[0].len();
        let len = times.len();
        Trajectory {
            times,
            states: vec![vec![0.0; n]; len],
            outputs,
            inputs: vec![vec![0.0; n]; len],
            references: vec![vec![0.0; n]; len],
            thetas: vec![vec![0.0; n]; len],
            duals: vec![vec![0.0; n]; len],
            vo: vec![0.0; len],
        }
    }

    fn metrics_cfg() -> MetricsConfig {
        MetricsConfig {
            tol_out: 0.05,
            seed: 0,
            gains: GeneratorGains {
                alpha: 1.0,
                beta: 15.0,
            },
            gains_meet_bounds: true,
        }
    }

    #[test]
    fn metrics_of_a_constant_equilibrium_trajectory() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let outputs = vec![vec![2.5, 2.5]; 11];
        let traj = synthetic_trajectory(times, outputs);
        let report = compute_metrics(&traj, 2.5, &metrics_cfg());
        assert_eq!(report.final_output_errors, vec![0.0, 0.0]);
        assert!(report.semistable);
        assert!(report.vo_monotone);
        assert_eq!(report.v_sum_drift, 0.0);
    }

    #[test]
    fn metrics_recover_a_synthetic_decay_rate() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let outputs: Vec<Vec<f64>> = times.iter().map(|t| vec![2.5 + (-t).exp()]).collect();
        let traj = synthetic_trajectory(times, outputs);
        let report = compute_metrics(&traj, 2.5, &metrics_cfg());
        assert!((report.exp_fit.rate + 1.0).abs() <= 0.05);
        assert!(report.exp_fit.r_squared >= 0.99);
    }

    #[test]
    fn integrator_config_validation() {
        assert!(IntegratorConfig {
            h: 0.0,
            t_end: 1.0,
            log_every: 1
        }
        .validate()
        .is_err());
        assert!(IntegratorConfig {
            h: 0.5,
            t_end: 1.0,
            log_every: 1
        }
        .validate()
        .is_err());
        assert!(IntegratorConfig {
            h: 0.001,
            t_end: 1.0,
            log_every: 10
        }
        .validate()
        .is_ok());
    }
}
