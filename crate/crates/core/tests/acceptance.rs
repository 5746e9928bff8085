//! Acceptance suite: one test per shipped claim, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use oocsim::costs::{global_optimum, CostEnsemble, CostFunction, DEFAULT_GRAD_TOL};
use oocsim::generator::select_gains;
use oocsim::graph::{build_laplacian, ring_of_four};
use oocsim::plants::{
    make_fhn, make_manipulator, make_vdp, plant_field, sample_uncertainty, AgentState,
    ManipulatorParams, UncertaintySpec,
};
use oocsim::scenario::Scenario;
use oocsim::sim::{
    integrate_generator, log_linear_fit, rk4_step, run_closed_loop, IntegratorConfig,
};

fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn report_line(id: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {id}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_1_spectral_reproduction() {
    let start = Instant::now();
    let report = build_laplacian(&ring_of_four()).unwrap();
    let elapsed = start.elapsed();
    let ok = (report.lambda2 - 2.0).abs() <= 1e-9
        && (report.lambda_n - 3.0).abs() <= 1e-9
        && report.weight_balanced
        && report.strongly_connected
        && elapsed.as_secs_f64() < 1.0;
    report_line(
        "1 (spectral reproduction)",
        ok,
        &format!(
            "lambda2={:.12}, lambdaN={:.12}, {:?}",
            report.lambda2, report.lambda_n, elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_optimum_reproduction() {
    let start = Instant::now();
    let e = oocsim::costs::example2_ensemble();
    let y_star = global_optimum(&e, DEFAULT_GRAD_TOL).unwrap();
    let elapsed = start.elapsed();
    let ok = (y_star - 3.24).abs() <= 0.01 && elapsed.as_secs_f64() < 1.0;
    report_line(
        "2 (optimum reproduction)",
        ok,
        &format!("y* = {y_star:.6}, {elapsed:?}"),
    );
    assert!(ok);
}

fn closed_loop_criterion(id: &str, file: &str, y_target: Option<f64>) {
    let sc = Scenario::load(scenario_path(file)).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut worst_seed = 0;
    for seed in 0..10u64 {
        let start = Instant::now();
        let (traj, report) = run_closed_loop(&sc, seed).unwrap();
        let elapsed = start.elapsed().as_secs_f64();

        // Reference point: the declared optimum if given, else the value the
        // drawn ensemble defines (cross-checked against the mean of the
        // drawn initial outputs for the rendezvous costs).
        let target = match y_target {
            Some(y) => y,
            None => {
                let m = sc.materialize(seed).unwrap();
                let mean: f64 = (0..sc.n_agents())
                    .map(|i| m.x0[m.closed_loop.layout.x_off[i]])
                    .sum::<f64>()
                    / sc.n_agents() as f64;
                assert!(
                    (report.y_star - mean).abs() <= 1e-9,
                    "optimum {} differs from the rendezvous mean {}",
                    report.y_star,
                    mean
                );
                mean
            }
        };
        let last = traj.outputs.last().unwrap();
        let err = last
            .iter()
            .map(|y| (y - target).abs())
            .fold(0.0f64, f64::max);
        if err > worst {
            worst = err;
            worst_seed = seed;
        }
        // The boundedness surrogate rides along with the output tolerance.
        if err > 0.05 || !report.semistable || report.max_state_norm > 1e6 || elapsed >= 30.0 {
            ok = false;
        }
    }
    report_line(
        id,
        ok,
        &format!("10 seeds, worst |y_i(T) - y*| = {worst:.2e} (seed {worst_seed})"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_closed_loop_rendezvous() {
    closed_loop_criterion("3 (closed-loop rendezvous)", "example1.json", None);
}

#[test]
fn criterion_4_closed_loop_heterogeneous() {
    closed_loop_criterion(
        "4 (closed-loop heterogeneous network)",
        "example2.json",
        Some(3.24),
    );
}

/// Generator-only fixture: ring digraph, unit quadratics, tight gains.
fn generator_fixture(seed: u64) -> (CostEnsemble, oocsim::graph::Digraph, Vec<f64>, Vec<f64>) {
    let g = ring_of_four();
    let e = CostEnsemble::new(
        [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&c| CostFunction::quadratic(c, 1.0).unwrap())
            .collect(),
    )
    .unwrap();
    let box_spec = UncertaintySpec::new(vec![-2.0; 8], vec![2.0; 8], vec![]).unwrap();
    let draw = sample_uncertainty(&box_spec, seed);
    (e, g, draw[..4].to_vec(), draw[4..].to_vec())
}

#[test]
fn criterion_5_lyapunov_descent() {
    let (e, g, r0, v0) = generator_fixture(11);
    let report = build_laplacian(&g).unwrap();
    let gains = select_gains(1.0, 1.0, report.lambda2, report.lambda_n).unwrap();
    let cfg = IntegratorConfig {
        h: 1e-3,
        t_end: 10.0,
        log_every: 1,
    };
    let run = integrate_generator(&e, &g, gains, &r0, &v0, &cfg).unwrap();

    let descent_ok = run.vo.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let v0_sum: f64 = run.v[0].iter().sum();
    let drift = run
        .v
        .iter()
        .map(|v| (v.iter().sum::<f64>() - v0_sum).abs())
        .fold(0.0f64, f64::max);
    let ok = descent_ok && drift <= 1e-6;
    report_line(
        "5 (Lyapunov descent)",
        ok,
        &format!(
            "V_o monotone over {} steps: {descent_ok}, dual-sum drift = {drift:.2e}",
            run.vo.len() - 1
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_exponential_convergence() {
    let (e, g, r0, v0) = generator_fixture(12);
    let report = build_laplacian(&g).unwrap();
    let gains = select_gains(1.0, 1.0, report.lambda2, report.lambda_n).unwrap();
    let cfg = IntegratorConfig {
        h: 1e-3,
        t_end: 10.0,
        log_every: 10,
    };
    let run = integrate_generator(&e, &g, gains, &r0, &v0, &cfg).unwrap();

    let half = run
        .times
        .iter()
        .position(|&t| t >= cfg.t_end / 2.0)
        .unwrap();
    let worst: Vec<f64> = run.r[half..]
        .iter()
        .map(|r| {
            r.iter()
                .map(|ri| (ri - run.y_star).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let fit = log_linear_fit(&run.times[half..], &worst);
    let ok = fit.rate < 0.0 && fit.r_squared >= 0.95;
    report_line(
        "6 (exponential convergence)",
        ok,
        &format!("fitted rate = {:.3}, R^2 = {:.4}", fit.rate, fit.r_squared),
    );
    assert!(ok);
}

#[test]
fn criterion_7a_gradient_consistency() {
    let costs = vec![
        CostFunction::quadratic(1.5, 2.0).unwrap(),
        CostFunction::example2_f1(),
        CostFunction::example2_f2(),
        CostFunction::example2_f3(),
        CostFunction::example2_f4(),
    ];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for c in &costs {
        for k in -10..=10 {
            let y = k as f64;
            let fd = (c.eval(y + h) - c.eval(y - h)) / (2.0 * h);
            worst = worst.max((c.gradient(y) - fd).abs());
        }
    }
    let ok = worst <= 1e-5;
    report_line(
        "7a (gradient vs finite difference)",
        ok,
        &format!("worst gap = {worst:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7b_origin_equilibrium() {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let spec = UncertaintySpec::new(vec![-0.4; 4], vec![0.4; 4], vec![]).unwrap();
        let w = sample_uncertainty(&spec, seed);

        let p = make_manipulator(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, w[..2].to_vec()).unwrap();
        let s = AgentState {
            z: vec![],
            x: vec![0.0; 4],
        };
        let (_, x_dot) = plant_field(&p, &s, 0.0, &w[..2]).unwrap();
        worst = x_dot.iter().fold(worst, |acc, v| acc.max(v.abs()));

        let p = make_fhn(0.2, 0.8, 0.8, w.clone()).unwrap();
        let s = AgentState {
            z: vec![0.0],
            x: vec![0.0],
        };
        let (z_dot, x_dot) = plant_field(&p, &s, 0.0, &w).unwrap();
        worst = worst.max(z_dot[0].abs()).max(x_dot[0].abs());

        let p = make_vdp(w[..3].to_vec()).unwrap();
        let s = AgentState {
            z: vec![],
            x: vec![0.0; 2],
        };
        let (_, x_dot) = plant_field(&p, &s, 0.0, &w[..3]).unwrap();
        worst = x_dot.iter().fold(worst, |acc, v| acc.max(v.abs()));
    }
    let ok = worst <= 1e-12;
    report_line(
        "7b (origin equilibrium, 100 draws)",
        ok,
        &format!("worst residual = {worst:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7c_manipulator_oracle_equivalence() {
    let params = ManipulatorParams::unit();
    let w = vec![0.25, 0.15];
    let plant = make_manipulator(
        params.j1,
        params.j2,
        params.m0,
        params.l0,
        params.k,
        params.grav,
        w.clone(),
    )
    .unwrap();

    // Matched initial data: physical (q1, q1', q2, q2') mapped through the
    // model to the chain coordinates.
    let q0 = [0.4, -0.2, 0.1, 0.3];
    let mut q = q0;
    let mut x = params.chain_state_from_physical(&q0, &w);
    let u = 0.3;
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..5000 {
        let qn = rk4_step(
            |s| {
                Ok(params
                    .second_order_field(&[s[0], s[1], s[2], s[3]], u, &w)
                    .to_vec())
            },
            &q,
            h,
        )
        .unwrap();
        q.copy_from_slice(&qn);
        let xn = rk4_step(
            |s| {
                let st = AgentState {
                    z: vec![],
                    x: s.to_vec(),
                };
                let (_, x_dot) = plant_field(&plant, &st, u, &w)?;
                Ok(x_dot)
            },
            &x,
            h,
        )
        .unwrap();
        x.copy_from_slice(&xn);
        worst = worst.max((q[0] - x[0]).abs());
    }
    let ok = worst <= 1e-4;
    report_line(
        "7c (chain vs second-order manipulator)",
        ok,
        &format!("max |q1 - x1| over [0, 5] = {worst:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7d_theta_monotone_on_shipped_runs() {
    let mut ok = true;
    for file in ["example1.json", "example2.json"] {
        let sc = Scenario::load(scenario_path(file)).unwrap();
        let (traj, _) = run_closed_loop(&sc, 0).unwrap();
        for i in 0..sc.n_agents() {
            for k in 1..traj.times.len() {
                if traj.thetas[k][i] < traj.thetas[k - 1][i] {
                    ok = false;
                }
            }
        }
    }
    report_line(
        "7d (theta monotone nondecreasing)",
        ok,
        "both shipped scenarios, seed 0",
    );
    assert!(ok);
}

#[test]
fn criterion_7e_rk4_order() {
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
    let ok = (12.0..=20.0).contains(&factor);
    report_line(
        "7e (RK4 order-4 convergence)",
        ok,
        &format!("step-halving error factor = {factor:.2}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7f_determinism() {
    let sc = Scenario::load(scenario_path("example1.json")).unwrap();
    let (_, report_a) = run_closed_loop(&sc, 42).unwrap();
    let (_, report_b) = run_closed_loop(&sc, 42).unwrap();
    let a = serde_json::to_string(&report_a).unwrap();
    let b = serde_json::to_string(&report_b).unwrap();
    let ok = a == b;
    report_line(
        "7f (determinism)",
        ok,
        "identical seed twice, byte-identical reports",
    );
    assert!(ok);
}
