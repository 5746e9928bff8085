//! Command-line front end: load a scenario file, run analyses or
//! simulations, and emit CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 runtime divergence, 2 assumption or validation
//! failure, 3 I/O or parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oocsim::error::Error;
use oocsim::generator::GeneratorGains;
use oocsim::scenario::{apply_override, Scenario};
use oocsim::sim::{run_closed_loop, run_sweep, RunReport, Trajectory};

#[derive(Parser)]
#[command(
    name = "oocsim",
    version,
    about = "Distributed optimal output consensus simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the digraph's Laplacian spectrum and structural checks
    Spectrum(CommonArgs),
    /// Print generator gains: the tight auto-selected pair and the scenario's
    Gains(GainsArgs),
    /// Print the centralized global optimum y*
    Oracle(CommonArgs),
    /// Run one closed-loop simulation, writing trajectory.csv and report.json
    Run(CommonArgs),
    /// Run a seed sweep, writing per-seed artifacts and a summary
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for uncertainty and initial-condition draws
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dotted-path scenario overrides, e.g. --set integrator.h=0.0005
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct GainsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the scenario's alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the scenario's beta
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of seeds (seed, seed+1, ..., seed+n-1)
    #[arg(long = "seeds", default_value_t = 10)]
    n_seeds: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Gains(args) => cmd_gains(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 1,
        Error::Parse(_) | Error::Io(_) => 3,
        _ => 2,
    }
}

fn load_scenario(args: &CommonArgs) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(&args.scenario)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", args.scenario.display())))?;
    for set in &args.sets {
        let (path, raw) = set.split_once('=').ok_or_else(|| {
            Error::Config(format!("override {set:?} is not of the form key=value"))
        })?;
        apply_override(&mut value, path, raw)?;
    }
    Scenario::from_value(value)
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, format!("{:#}\n", value))?;
    Ok(path)
}

fn cmd_spectrum(args: &CommonArgs) -> Result<ExitCode, Error> {
    let sc = load_scenario(args)?;
    let report = &sc.laplacian;
    println!("digraph: {} nodes ({})", sc.n_agents(), sc.name);
    println!("lambda2            = {}", report.lambda2);
    println!("lambdaN            = {}", report.lambda_n);
    println!("weight balanced    = {}", report.weight_balanced);
    println!("strongly connected = {}", report.strongly_connected);
    println!(
        "sym eigenvalues    = [{}]",
        report
            .sym_eigenvalues
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );
    let path = write_json(&args.out, "spectrum.json", &report.to_json())?;
    println!("wrote {}", path.display());
    if !report.assumption_holds() {
        eprintln!("error: digraph must be weight-balanced and strongly connected");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gains(args: &GainsArgs) -> Result<ExitCode, Error> {
    let sc = load_scenario(&args.common)?;
    let auto = sc.auto_gains.ok_or_else(|| {
        Error::SpectralGap("gain bounds need a strongly connected digraph".into())
    })?;
    let selected = GeneratorGains {
        alpha: args.alpha.unwrap_or(sc.gains.alpha),
        beta: args.beta.unwrap_or(sc.gains.beta),
    };
    let (l_lower, l_upper) = sc.l_bounds;
    let meets = selected.meets_bounds(
        l_lower,
        l_upper,
        sc.laplacian.lambda2,
        sc.laplacian.lambda_n,
    );
    println!("curvature bounds   : l_lower = {l_lower}, l_upper = {l_upper}");
    println!(
        "auto (tight bound) : alpha = {}, beta = {}",
        auto.alpha, auto.beta
    );
    println!(
        "selected           : alpha = {}, beta = {}",
        selected.alpha, selected.beta
    );
    if !meets {
        println!("warning: selected gains are below the selection lower bound");
    }
    let doc = serde_json::json!({
        "auto": auto,
        "selected": selected,
        "meets_bounds": meets,
        "l_lower": l_lower,
        "l_upper": l_upper,
        "lambda2": sc.laplacian.lambda2,
        "lambda_n": sc.laplacian.lambda_n,
    });
    let path = write_json(&args.common.out, "gains.json", &doc)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: &CommonArgs) -> Result<ExitCode, Error> {
    let sc = load_scenario(args)?;
    let m = sc.materialize(args.seed)?;
    let y_star =
        oocsim::costs::global_optimum(&m.closed_loop.costs, oocsim::costs::DEFAULT_GRAD_TOL)?;
    println!("y_star = {y_star}");
    Ok(ExitCode::SUCCESS)
}

fn write_run_artifacts(dir: &Path, traj: &Trajectory, report: &RunReport) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("trajectory.csv");
    let mut file = std::fs::File::create(&csv_path)?;
    traj.write_csv(&mut file)?;
    write_json(dir, "report.json", &serde_json::to_value(report).unwrap())?;
    Ok(())
}

fn cmd_run(args: &CommonArgs) -> Result<ExitCode, Error> {
    let sc = load_scenario(args)?;
    let (traj, report) = run_closed_loop(&sc, args.seed)?;
    write_run_artifacts(&args.out, &traj, &report)?;
    let worst = report
        .final_output_errors
        .iter()
        .fold(0.0f64, |a, b| a.max(*b));
    println!(
        "seed {}: y* = {:.6}, worst |y_i(T) - y*| = {:.3e}, semistable = {}",
        args.seed, report.y_star, worst, report.semistable
    );
    println!("wrote {}", args.out.join("trajectory.csv").display());
    println!("wrote {}", args.out.join("report.json").display());
    if report.semistable {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: run completed but outputs missed the tolerance");
        Ok(ExitCode::from(2))
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, Error> {
    let sc = load_scenario(&args.common)?;
    let seeds: Vec<u64> = (0..args.n_seeds).map(|k| args.common.seed + k).collect();
    let results = run_sweep(&sc, &seeds);

    let mut reports = Vec::new();
    let mut failing = Vec::new();
    let mut diverged = false;
    for (seed, result) in &results {
        match result {
            Ok((traj, report)) => {
                let dir = args.common.out.join(format!("seed_{seed}"));
                write_run_artifacts(&dir, traj, report)?;
                if !report.semistable {
                    failing.push(*seed);
                }
                reports.push(serde_json::to_value(report).unwrap());
            }
            Err(e) => {
                if matches!(e, Error::Divergence { .. }) {
                    diverged = true;
                }
                failing.push(*seed);
                reports.push(serde_json::json!({"seed": seed, "error": e.to_string()}));
            }
        }
    }
    let n_semistable = seeds.len() - failing.len();
    let summary = serde_json::json!({
        "scenario": sc.name,
        "n_seeds": seeds.len(),
        "n_semistable": n_semistable,
        "failing_seeds": failing,
        "reports": reports,
    });
    let path = write_json(&args.common.out, "sweep.json", &summary)?;
    println!(
        "{}/{} seeds semistable{}",
        n_semistable,
        seeds.len(),
        if failing.is_empty() {
            String::new()
        } else {
            format!(", failing: {failing:?}")
        }
    );
    println!("wrote {}", path.display());
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else if diverged {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::from(2))
    }
}
