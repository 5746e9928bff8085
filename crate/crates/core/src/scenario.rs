//! Scenario files: a single JSON document bundling the digraph, per-agent
//! costs and plants, controller configuration, generator gains, integrator
//! window, and initial conditions. Loading validates everything that does
//! not depend on the seed; [`Scenario::materialize`] binds one seed's
//! uncertainty draws and initial conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::controller::{hurwitz_coeffs, ChainDesign, ControllerMode, DesignFunctions};
use crate::costs::{CostEnsemble, CostFunction};
use crate::error::{Error, Result};
use crate::expr;
use crate::generator::{select_gains, GeneratorGains};
use crate::graph::{build_laplacian, Digraph, LaplacianReport};
use crate::plants::{
    draw_uncertainty, make_fhn, make_integrator_chain, make_manipulator, make_vdp,
    sample_uncertainty, ManipulatorParams, Plant, UncertaintySpec,
};
use crate::sim::{ClosedLoop, IntegratorConfig, StateLayout};

/// Default output tolerance for the semistability verdict.
pub const DEFAULT_TOL_OUT: f64 = 0.05;

// ---------------------------------------------------------------------------
// Raw serde layer
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    graph: RawGraph,
    costs: Vec<RawCost>,
    plants: Vec<RawPlant>,
    controller: RawController,
    gains: RawGains,
    #[serde(default)]
    integrator: IntegratorConfig,
    #[serde(default)]
    initial: InitialSpec,
    #[serde(default = "default_tol_out")]
    tol_out: f64,
}

fn default_tol_out() -> f64 {
    DEFAULT_TOL_OUT
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    kind: String,
    #[serde(default)]
    center: Option<serde_json::Value>,
    #[serde(default)]
    weight: Option<f64>,
    #[serde(default)]
    hessian_bounds: Option<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    w: Option<RawW>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawW {
    Fixed(Vec<f64>),
    Sample { sample: RawSample },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default)]
    nonneg: Vec<bool>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default = "default_mode")]
    mode: String,
    design: RawDesign,
    #[serde(default = "default_pole")]
    pole: f64,
}

fn default_mode() -> String {
    "full".into()
}

fn default_pole() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDesign {
    Preset(String),
    Exprs { kappa: String, rho: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawGains {
    Auto(String),
    Fixed { alpha: f64, beta: f64 },
}

#[derive(Deserialize, Clone, Copy, Debug)]
#[serde(untagged)]
pub enum Draw {
    Fixed(f64),
    Range { min: f64, max: f64 },
}

impl Draw {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Draw::Fixed(v) => v,
            Draw::Range { min, max } => {
                if min == max {
                    min
                } else {
                    rng.gen_range(min..=max)
                }
            }
        }
    }
}

fn default_box() -> Draw {
    Draw::Range {
        min: -2.0,
        max: 2.0,
    }
}

fn default_theta() -> Draw {
    Draw::Fixed(0.0)
}

/// Per-state randomization boxes plus optional exact per-agent overrides.
#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default = "default_box")]
    pub x_first: Draw,
    #[serde(default = "default_box")]
    pub x_rest: Draw,
    #[serde(default = "default_box")]
    pub z: Draw,
    #[serde(default = "default_box")]
    pub eta: Draw,
    #[serde(default = "default_theta")]
    pub theta: Draw,
    #[serde(default = "default_box")]
    pub r: Draw,
    #[serde(default = "default_box")]
    pub v: Draw,
    #[serde(default)]
    pub agents: Vec<Option<AgentInitial>>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            x_first: default_box(),
            x_rest: default_box(),
            z: default_box(),
            eta: default_box(),
            theta: default_theta(),
            r: default_box(),
            v: default_box(),
            agents: Vec::new(),
        }
    }
}

/// Exact initial data for one agent. The chain state may be given directly
/// (`x`) or, for manipulators, as physical data `q = (q1, q1', q2, q2')`
/// which is mapped through the model equations.
#[derive(Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct AgentInitial {
    pub z: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub r: Option<f64>,
    pub v: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validated runtime layer
// ---------------------------------------------------------------------------

/// Cost center: a number, or bound to the agent's initial output at run
/// start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterSpec {
    Value(f64),
    InitialOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    Quadratic { center: CenterSpec, weight: f64 },
    Example2F1,
    Example2F2,
    Example2F3,
    Example2F4,
}

/// One agent's cost configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEntry {
    pub spec: CostSpec,
    pub declared_bounds: Option<(f64, f64)>,
}

impl CostEntry {
    /// Build the cost, binding `initial_output` centers to `y0`.
    pub fn build(&self, y0: f64) -> CostFunction {
        let cost = match &self.spec {
            CostSpec::Quadratic { center, weight } => {
                let c = match center {
                    CenterSpec::Value(v) => *v,
                    CenterSpec::InitialOutput => y0,
                };
                CostFunction::quadratic(c, *weight).expect("validated weight")
            }
            CostSpec::Example2F1 => CostFunction::example2_f1(),
            CostSpec::Example2F2 => CostFunction::example2_f2(),
            CostSpec::Example2F3 => CostFunction::example2_f3(),
            CostSpec::Example2F4 => CostFunction::example2_f4(),
        };
        match self.declared_bounds {
            Some(b) => cost.with_declared_bounds(b),
            None => cost,
        }
    }

    pub fn depends_on_initial_output(&self) -> bool {
        matches!(
            self.spec,
            CostSpec::Quadratic {
                center: CenterSpec::InitialOutput,
                ..
            }
        )
    }
}

#[derive(Debug, Clone)]
pub enum PlantKind {
    Manipulator(ManipulatorParams),
    Fhn { a: f64, b: f64, c: f64 },
    Vdp,
    Integrator { n: usize },
}

impl PlantKind {
    pub fn chain_length(&self) -> usize {
        match self {
            PlantKind::Manipulator(_) => 4,
            PlantKind::Fhn { .. } => 1,
            PlantKind::Vdp => 2,
            PlantKind::Integrator { n } => *n,
        }
    }

    pub fn zero_dim(&self) -> usize {
        match self {
            PlantKind::Fhn { .. } => 1,
            _ => 0,
        }
    }

    pub fn n_w(&self) -> usize {
        match self {
            PlantKind::Manipulator(_) => 2,
            PlantKind::Fhn { .. } => 4,
            PlantKind::Vdp => 3,
            PlantKind::Integrator { .. } => 0,
        }
    }

    fn build(&self, w: Vec<f64>) -> Result<Plant> {
        match self {
            PlantKind::Manipulator(p) => make_manipulator(p.j1, p.j2, p.m0, p.l0, p.k, p.grav, w),
            PlantKind::Fhn { a, b, c } => make_fhn(*a, *b, *c, w),
            PlantKind::Vdp => make_vdp(w),
            PlantKind::Integrator { n } => make_integrator_chain(*n),
        }
    }
}

#[derive(Debug, Clone)]
pub enum WSpec {
    Fixed(Vec<f64>),
    Sample {
        spec: UncertaintySpec,
        seed: Option<u64>,
    },
    Zero,
}

#[derive(Debug, Clone)]
pub struct PlantEntry {
    pub kind: PlantKind,
    pub w: WSpec,
}

impl PlantEntry {
    fn draw_w(&self, rng: &mut impl Rng) -> Vec<f64> {
        match &self.w {
            WSpec::Fixed(v) => v.clone(),
            WSpec::Sample { spec, seed } => match seed {
                Some(s) => sample_uncertainty(spec, *s),
                None => draw_uncertainty(spec, rng),
            },
            WSpec::Zero => vec![0.0; self.kind.n_w()],
        }
    }

    pub fn build(&self, rng: &mut impl Rng) -> Result<Plant> {
        self.kind.build(self.draw_w(rng))
    }
}

/// A validated scenario, ready to materialize per seed.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub digraph: Digraph,
    pub laplacian: LaplacianReport,
    pub costs: Vec<CostEntry>,
    pub plants: Vec<PlantEntry>,
    pub mode: ControllerMode,
    pub design: DesignFunctions,
    pub chains: Vec<ChainDesign>,
    pub pole: f64,
    /// Resolved generator gains (auto selection or the file's values).
    pub gains: GeneratorGains,
    /// Whether the configured gains clear the selection lower bounds.
    pub gains_meet_bounds: bool,
    /// The tight auto-selected gains, for reporting.
    pub auto_gains: Option<GeneratorGains>,
    /// Ensemble curvature bounds used for gain selection.
    pub l_bounds: (f64, f64),
    pub integrator: IntegratorConfig,
    pub initial: InitialSpec,
    pub tol_out: f64,
}

/// One seed's fully bound closed loop.
pub struct Materialized {
    pub closed_loop: ClosedLoop,
    pub x0: Vec<f64>,
}

impl Scenario {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawScenario =
            serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let n = raw.graph.n;
        if n < 2 {
            return Err(Error::Config(format!(
                "scenario needs at least 2 agents, got {n}"
            )));
        }
        let edges: Vec<(usize, usize, f64)> = raw.graph.edges;
        let digraph = Digraph::from_edges(n, &edges)?;
        let laplacian = build_laplacian(&digraph)?;

        if raw.costs.len() != n {
            return Err(Error::Config(format!(
                "{} costs for {n} agents",
                raw.costs.len()
            )));
        }
        if raw.plants.len() != n {
            return Err(Error::Config(format!(
                "{} plants for {n} agents",
                raw.plants.len()
            )));
        }

        let costs: Vec<CostEntry> = raw
            .costs
            .into_iter()
            .enumerate()
            .map(|(i, c)| parse_cost(i, c))
            .collect::<Result<_>>()?;
        let plants: Vec<PlantEntry> = raw
            .plants
            .into_iter()
            .enumerate()
            .map(|(i, p)| parse_plant(i, p))
            .collect::<Result<_>>()?;

        // Probe-build each plant at w = 0 to surface parameter errors now.
        for (i, p) in plants.iter().enumerate() {
            p.kind
                .build(vec![0.0; p.kind.n_w()])
                .map_err(|e| Error::Config(format!("plant {i}: {e}")))?;
        }

        let mode = match raw.controller.mode.as_str() {
            "full" => ControllerMode::Full,
            "reduced" => ControllerMode::Reduced,
            other => {
                return Err(Error::Config(format!(
                    "controller mode must be \"full\" or \"reduced\", got {other:?}"
                )))
            }
        };
        let design = match raw.controller.design {
            RawDesign::Preset(name) => {
                if mode == ControllerMode::Reduced {
                    return Err(Error::Config(
                        "reduced mode needs explicit kappa/rho declarations; \
                         presets only define the adaptive law's functions"
                            .into(),
                    ));
                }
                match name.as_str() {
                    "example1" => crate::controller::make_design_example1(),
                    "example2" => crate::controller::make_design_example2(),
                    other => return Err(Error::Config(format!("unknown design preset {other:?}"))),
                }
            }
            RawDesign::Exprs { kappa, rho } => {
                DesignFunctions::from_exprs(expr::parse(&kappa)?, expr::parse(&rho)?)?
            }
        };
        design.validate_on_grid()?;

        let chains: Vec<ChainDesign> = plants
            .iter()
            .map(|p| hurwitz_coeffs(p.kind.chain_length(), raw.controller.pole))
            .collect::<Result<_>>()?;

        // Curvature bounds do not depend on initial-output centers, so they
        // resolve at load time. Probe costs use center 0.
        let probe = CostEnsemble::new(costs.iter().map(|c| c.build(0.0)).collect())?;
        let l_bounds = (probe.l_lower, probe.l_upper);

        let auto_gains = select_gains(
            probe.l_lower,
            probe.l_upper,
            laplacian.lambda2,
            laplacian.lambda_n,
        )
        .ok();

        let (gains, gains_meet_bounds) = match raw.gains {
            RawGains::Auto(ref tag) if tag == "auto" => {
                let g = auto_gains.ok_or_else(|| {
                    Error::SpectralGap(
                        "auto gain selection needs a strongly connected digraph".into(),
                    )
                })?;
                (g, true)
            }
            RawGains::Auto(tag) => {
                return Err(Error::Config(format!(
                    "gains must be \"auto\" or {{\"alpha\": .., \"beta\": ..}}, got {tag:?}"
                )))
            }
            RawGains::Fixed { alpha, beta } => {
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(Error::Config(format!(
                        "gains must be positive, got alpha={alpha}, beta={beta}"
                    )));
                }
                let g = GeneratorGains { alpha, beta };
                let meets = g.meets_bounds(
                    probe.l_lower,
                    probe.l_upper,
                    laplacian.lambda2,
                    laplacian.lambda_n,
                );
                (g, meets)
            }
        };

        raw.integrator.validate()?;
        if !(raw.tol_out > 0.0) {
            return Err(Error::Config(format!(
                "tol_out must be positive, got {}",
                raw.tol_out
            )));
        }
        if raw.initial.agents.len() > n {
            return Err(Error::Config(format!(
                "{} per-agent initial overrides for {n} agents",
                raw.initial.agents.len()
            )));
        }
        for (i, a) in raw.initial.agents.iter().enumerate() {
            if let Some(a) = a {
                if a.q.is_some() && !matches!(plants[i].kind, PlantKind::Manipulator(_)) {
                    return Err(Error::Config(format!(
                        "agent {i}: physical initial data q is only defined for manipulators"
                    )));
                }
                if a.q.is_some() && a.x.is_some() {
                    return Err(Error::Config(format!(
                        "agent {i}: give either x or q initial data, not both"
                    )));
                }
            }
        }

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            digraph,
            laplacian,
            costs,
            plants,
            mode,
            design,
            chains,
            pole: raw.controller.pole,
            gains,
            gains_meet_bounds,
            auto_gains,
            l_bounds,
            integrator: raw.integrator,
            initial: raw.initial,
            tol_out: raw.tol_out,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.digraph.n_nodes()
    }

    /// Bind one seed: draw uncertainties, build plants, draw initial
    /// conditions, resolve costs, and assemble the closed loop.
    ///
    /// Draw order (fixed for reproducibility): per agent in index order,
    /// first the uncertainty vector, then — for components without explicit
    /// overrides — z, x, eta, theta, r, v.
    pub fn materialize(&self, seed: u64) -> Result<Materialized> {
        if !self.laplacian.assumption_holds() {
            return Err(Error::AssumptionViolated(format!(
                "digraph must be weight-balanced and strongly connected \
                 (balanced: {}, strongly connected: {})",
                self.laplacian.weight_balanced, self.laplacian.strongly_connected
            )));
        }
        let n = self.n_agents();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let plants: Vec<Plant> = self
            .plants
            .iter()
            .map(|p| p.build(&mut rng))
            .collect::<Result<_>>()?;
        let layout = StateLayout::new(&plants);
        let mut x0 = vec![0.0; layout.dim];

        for i in 0..n {
            let p = &plants[i];
            let overrides = self
                .initial
                .agents
                .get(i)
                .and_then(|a| a.clone())
                .unwrap_or_default();

            match &overrides.z {
                Some(z) => {
                    if z.len() != p.m {
                        return Err(Error::ShapeMismatch {
                            context: "initial z override",
                            expected: p.m,
                            got: z.len(),
                        });
                    }
                    x0[layout.z_off[i]..layout.z_off[i] + p.m].copy_from_slice(z);
                }
                None => {
                    for k in 0..p.m {
                        x0[layout.z_off[i] + k] = self.initial.z.sample(&mut rng);
                    }
                }
            }

            if let Some(x) = &overrides.x {
                if x.len() != p.n {
                    return Err(Error::ShapeMismatch {
                        context: "initial x override",
                        expected: p.n,
                        got: x.len(),
                    });
                }
                x0[layout.x_off[i]..layout.x_off[i] + p.n].copy_from_slice(x);
            } else if let Some(q) = &overrides.q {
                if q.len() != 4 {
                    return Err(Error::ShapeMismatch {
                        context: "initial q override",
                        expected: 4,
                        got: q.len(),
                    });
                }
                let params = match &self.plants[i].kind {
                    PlantKind::Manipulator(params) => *params,
                    _ => unreachable!("validated at load"),
                };
                let chain = params.chain_state_from_physical(&[q[0], q[1], q[2], q[3]], &p.w);
                x0[layout.x_off[i]..layout.x_off[i] + 4].copy_from_slice(&chain);
            } else {
                x0[layout.x_off[i]] = self.initial.x_first.sample(&mut rng);
                for k in 1..p.n {
                    x0[layout.x_off[i] + k] = self.initial.x_rest.sample(&mut rng);
                }
            }

            x0[layout.eta[i]] = match overrides.eta {
                Some(v) => v,
                None => self.initial.eta.sample(&mut rng),
            };
            x0[layout.theta[i]] = match overrides.theta {
                Some(v) => v,
                None => self.initial.theta.sample(&mut rng),
            };
            x0[layout.r[i]] = match overrides.r {
                Some(v) => v,
                None => self.initial.r.sample(&mut rng),
            };
            x0[layout.v[i]] = match overrides.v {
                Some(v) => v,
                None => self.initial.v.sample(&mut rng),
            };
        }

        let costs = CostEnsemble::new(
            (0..n)
                .map(|i| self.costs[i].build(x0[layout.x_off[i]]))
                .collect(),
        )?;

        let closed_loop = ClosedLoop::new(
            self.digraph.clone(),
            costs,
            plants,
            self.chains.clone(),
            self.design.clone(),
            self.mode,
            self.gains,
        )?;
        Ok(Materialized { closed_loop, x0 })
    }
}

fn parse_cost(i: usize, raw: RawCost) -> Result<CostEntry> {
    let spec = match raw.kind.as_str() {
        "quadratic" => {
            let center = match raw.center {
                Some(serde_json::Value::Number(v)) => CenterSpec::Value(
                    v.as_f64()
                        .ok_or_else(|| Error::Config(format!("cost {i}: bad center")))?,
                ),
                Some(serde_json::Value::String(s)) if s == "initial_output" => {
                    CenterSpec::InitialOutput
                }
                Some(other) => {
                    return Err(Error::Config(format!(
                        "cost {i}: center must be a number or \"initial_output\", got {other}"
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "cost {i}: quadratic costs need a center"
                    )))
                }
            };
            let weight = raw.weight.unwrap_or(1.0);
            if !(weight > 0.0) {
                return Err(Error::Config(format!(
                    "cost {i}: weight must be positive, got {weight}"
                )));
            }
            CostSpec::Quadratic { center, weight }
        }
        "example2_f1" | "example2_f2" | "example2_f3" | "example2_f4" => {
            if raw.center.is_some() || raw.weight.is_some() {
                return Err(Error::Config(format!(
                    "cost {i}: center/weight only apply to quadratic costs"
                )));
            }
            match raw.kind.as_str() {
                "example2_f1" => CostSpec::Example2F1,
                "example2_f2" => CostSpec::Example2F2,
                "example2_f3" => CostSpec::Example2F3,
                _ => CostSpec::Example2F4,
            }
        }
        other => return Err(Error::Config(format!("cost {i}: unknown kind {other:?}"))),
    };
    if let Some((lo, hi)) = raw.hessian_bounds {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!(
                "cost {i}: hessian_bounds ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
    }
    Ok(CostEntry {
        spec,
        declared_bounds: raw.hessian_bounds,
    })
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawManipParams {
    #[serde(default = "one")]
    j1: f64,
    #[serde(default = "one")]
    j2: f64,
    #[serde(default = "one")]
    m0: f64,
    #[serde(default = "one")]
    l0: f64,
    #[serde(default = "one")]
    k: f64,
    #[serde(default = "default_grav")]
    grav: f64,
}

fn one() -> f64 {
    1.0
}

fn default_grav() -> f64 {
    9.8
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawFhnParams {
    #[serde(default = "default_fhn_a")]
    a: f64,
    #[serde(default = "default_fhn_bc")]
    b: f64,
    #[serde(default = "default_fhn_bc")]
    c: f64,
}

fn default_fhn_a() -> f64 {
    0.2
}

fn default_fhn_bc() -> f64 {
    0.8
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawIntegratorParams {
    #[serde(default = "one_usize")]
    n: usize,
}

fn one_usize() -> usize {
    1
}

fn parse_plant(i: usize, raw: RawPlant) -> Result<PlantEntry> {
    let params = raw.params.unwrap_or(serde_json::Value::Null);
    let params_or_empty = if params.is_null() {
        serde_json::json!({})
    } else {
        params
    };
    let kind = match raw.kind.as_str() {
        "manipulator" => {
            let p: RawManipParams = serde_json::from_value(params_or_empty)
                .map_err(|e| Error::Config(format!("plant {i}: {e}")))?;
            PlantKind::Manipulator(ManipulatorParams {
                j1: p.j1,
                j2: p.j2,
                m0: p.m0,
                l0: p.l0,
                k: p.k,
                grav: p.grav,
            })
        }
        "fhn" => {
            let p: RawFhnParams = serde_json::from_value(params_or_empty)
                .map_err(|e| Error::Config(format!("plant {i}: {e}")))?;
            PlantKind::Fhn {
                a: p.a,
                b: p.b,
                c: p.c,
            }
        }
        "vdp" => PlantKind::Vdp,
        "integrator" => {
            let p: RawIntegratorParams = serde_json::from_value(params_or_empty)
                .map_err(|e| Error::Config(format!("plant {i}: {e}")))?;
            PlantKind::Integrator { n: p.n }
        }
        other => return Err(Error::Config(format!("plant {i}: unknown type {other:?}"))),
    };
    let n_w = kind.n_w();
    let w = match raw.w {
        None => WSpec::Zero,
        Some(RawW::Fixed(v)) => {
            if v.len() != n_w {
                return Err(Error::Config(format!(
                    "plant {i}: w has {} components, {} expected",
                    v.len(),
                    n_w
                )));
            }
            WSpec::Fixed(v)
        }
        Some(RawW::Sample { sample }) => {
            if sample.lower.len() != n_w {
                return Err(Error::Config(format!(
                    "plant {i}: w sample box has {} components, {} expected",
                    sample.lower.len(),
                    n_w
                )));
            }
            WSpec::Sample {
                spec: UncertaintySpec::new(sample.lower, sample.upper, sample.nonneg)?,
                seed: sample.seed,
            }
        }
    };
    Ok(PlantEntry { kind, w })
}

/// Apply a dotted-path override like `integrator.h=0.0005` to a scenario
/// JSON document. Array elements are addressed by index (`plants.2.w`).
pub fn apply_override(root: &mut serde_json::Value, path: &str, raw_value: &str) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("bad override path {path:?}")));
    }
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let mut cursor = root;
    for seg in &segments[..segments.len() - 1] {
        cursor = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*seg).ok_or_else(|| {
                Error::Config(format!("override path {path:?}: no field {seg:?}"))
            })?,
            serde_json::Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    Error::Config(format!("override path {path:?}: bad index {seg:?}"))
                })?;
                items.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("override path {path:?}: index {idx} out of range"))
                })?
            }
            _ => {
                return Err(Error::Config(format!(
                    "override path {path:?}: {seg:?} does not address an object or array"
                )))
            }
        };
    }
    let last = segments[segments.len() - 1];
    match cursor {
        serde_json::Value::Object(map) => {
            map.insert(last.to_string(), value);
        }
        serde_json::Value::Array(items) => {
            let idx: usize = last.parse().map_err(|_| {
                Error::Config(format!("override path {path:?}: bad index {last:?}"))
            })?;
            if idx >= items.len() {
                return Err(Error::Config(format!(
                    "override path {path:?}: index {idx} out of range"
                )));
            }
            items[idx] = value;
        }
        _ => {
            return Err(Error::Config(format!(
                "override path {path:?}: parent is not an object or array"
            )))
        }
    }
    Ok(())
}
