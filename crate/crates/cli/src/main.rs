//! `kramers`: coupled simulations of underdamped Langevin dynamics and its small-mass
//! limit.
//!
//! Exit status: 0 on success, 1 for configuration errors, 2 when numerical failures
//! exceed the quarantine threshold.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kramers_core::linalg::Vector;
use kramers_core::lyapunov::default_fd_step;
use kramers_core::lyapunov_check::check_model;
use kramers_core::montecarlo::{run_with_model, ExperimentResult};
use kramers_core::{
    noise_induced_drift, AnyModel, CoupledSpec, Error, ExecutionPolicy, ExperimentPlan, Model,
    ModelSpec,
};

use config::{apply_params, ConfigFile, ResolvedConfig};
use output::{csv_with_header, json_with_config, resolve_out, write_atomic, Format};

#[derive(Parser, Debug)]
#[command(name = "kramers", version, about = "Small-mass limit experiments for Langevin dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one coupled pair of trajectories and dump it.
    Simulate(SimulateArgs),
    /// Exceedance probability P{sup d(x^m, x) > eps} over a mass ladder.
    Converge(ExperimentArgs),
    /// Exit probability P{tau^m <= T} over a mass ladder.
    ExitTimes(ExperimentArgs),
    /// Check conditions p1 and p2 for the model's Lyapunov candidate.
    LyapunovCheck(CheckArgs),
    /// Compare the noise-induced drift from the Lyapunov pipeline with its closed form.
    DriftCheck(CheckArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in model name.
    #[arg(long)]
    model: Option<String>,
    /// JSON config file (model document plus run parameters); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model parameter override, repeatable: --param kappa=20
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Output file (default kramers-<command>.<format>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct Grid {
    /// Horizon T.
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Starting position, comma separated (default: the model's interior reference point).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v0: Option<Vec<f64>>,
    /// Noise stream index within the master seed.
    #[arg(long, default_value_t = 0)]
    path_index: u64,
    /// Keep every n-th grid sample in the dump.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    /// Strictly decreasing masses, comma separated.
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
    /// Exceedance thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<u64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, env = "KRAMERS_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Number of interior probe points.
    #[arg(long, alias = "grid", default_value_t = 1000)]
    points: usize,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownModel(_)
            | Error::Config(_)
            | Error::InvalidPlan(_)
            | Error::ParameterDomain { .. }
            | Error::DimensionMismatch { .. }
            | Error::DomainMismatch(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn numerical_failure(message: String) -> Failure {
    Failure { code: 2, message }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Converge(a) => experiment(a, "converge"),
        Command::ExitTimes(a) => experiment(a, "exit-times"),
        Command::LyapunovCheck(a) => lyapunov_check(a),
        Command::DriftCheck(a) => drift_check(a),
    }
}

fn load(common: &Common) -> Result<(ConfigFile, ModelSpec), Error> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let spec = file.model_spec(common.model.as_deref())?;
    let spec = apply_params(spec, &common.params)?;
    spec.build()?;
    Ok((file, spec))
}

fn finite_positive(name: &str, v: f64) -> Result<f64, Error> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be finite and positive, got {v}")))
    }
}

fn simulate(a: SimulateArgs) -> Result<String, Failure> {
    let (file, spec) = load(&a.common)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let x0 = a.grid.x0.or(file.x0).unwrap_or_else(|| spec.default_x0());
    let v0 = a.v0.or(file.v0).unwrap_or_else(|| vec![0.0; spec.dim()]);
    let mut cfg = ResolvedConfig::new("simulate", &spec, x0.clone());
    cfg.horizon = a.grid.horizon.or(file.horizon).unwrap_or(1.0);
    cfg.dt = finite_positive("dt", a.grid.dt.or(file.dt).unwrap_or(1e-5))?;
    cfg.master_seed = a.grid.seed.or(file.seed).unwrap_or(0);
    cfg.mass = Some(finite_positive("mass", a.mass.or(file.mass).unwrap_or(1e-2))?);
    cfg.v0 = Some(v0.clone());
    cfg.path_index = Some(a.path_index);
    if !(cfg.horizon >= 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::Config(format!("T must be finite and nonnegative, got {}", cfg.horizon)).into());
    }
    for (name, v) in [("x0", &x0), ("v0", &v0)] {
        if v.len() != spec.dim() {
            return Err(Error::Config(format!("{name} needs {} components, got {}", spec.dim(), v.len())).into());
        }
    }
    let out = resolve_out(a.common.out.as_deref(), "simulate", format);
    match spec.build()? {
        AnyModel::One(m) => simulate_model(&m, &cfg, a.stride, format, &out),
        AnyModel::Two(m) => simulate_model(&m, &cfg, a.stride, format, &out),
    }
}

fn simulate_model<const N: usize, const K: usize>(
    model: &Model<N, K>,
    cfg: &ResolvedConfig,
    stride: usize,
    format: Format,
    out: &std::path::Path,
) -> Result<String, Failure> {
    let x0 = Vector::<N>::from_column_slice(&cfg.x0);
    if !model.domain().contains(x0.as_slice()) {
        return Err(Error::Config(format!("x0 = {:?} is outside the model domain", cfg.x0)).into());
    }
    let mut spec = CoupledSpec::new(
        x0,
        cfg.mass.expect("set"),
        cfg.horizon,
        cfg.dt,
        cfg.master_seed,
        cfg.path_index.expect("set"),
    );
    spec.v0 = Vector::<N>::from_column_slice(cfg.v0.as_deref().expect("set"));
    let pair = kramers_core::integrators::simulate_coupled_every(model, &spec, stride);
    let contents = match format {
        Format::Csv => {
            let mut body = Vec::new();
            pair.write_csv(&mut body).expect("in-memory write");
            csv_with_header(cfg, &String::from_utf8(body).expect("utf-8"))
        }
        Format::Json => {
            let pos = |s: &kramers_core::ExtendedState<N>| s.position().map(|x| x.as_slice().to_vec());
            let vel = |s: &kramers_core::ExtendedState<N>| s.velocity().map(|v| v.as_slice().to_vec());
            json_with_config(
                cfg,
                serde_json::json!({
                    "t": pair.times,
                    "x": pair.underdamped.iter().map(pos).collect::<Vec<_>>(),
                    "v": pair.underdamped.iter().map(vel).collect::<Vec<_>>(),
                    "x_lim": pair.limit.iter().map(pos).collect::<Vec<_>>(),
                    "sup_distance": finite_or_null(pair.outcome.sup_distance),
                    "exit_time_m": pair.outcome.exit_time_m,
                    "exit_time_limit": pair.outcome.exit_time_limit,
                    "failure": pair.outcome.failure.as_ref().map(|f| f.to_string()),
                }),
            )
        }
    };
    write_atomic(out, contents.as_bytes())?;
    if let Some(f) = &pair.outcome.failure {
        return Err(numerical_failure(format!("path aborted: {f} (partial trajectory in {})", out.display())));
    }
    Ok(format!(
        "simulate: sup distance {} (exit m: {}, exit limit: {}) -> {}",
        pair.outcome.sup_distance,
        pair.outcome.exit_time_m.map_or("none".into(), |t| t.to_string()),
        pair.outcome.exit_time_limit.map_or("none".into(), |t| t.to_string()),
        out.display()
    ))
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!("inf")
    }
}

fn experiment(a: ExperimentArgs, command: &'static str) -> Result<String, Failure> {
    let (file, spec) = load(&a.common)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let plan = ExperimentPlan {
        x0: Some(a.grid.x0.or(file.x0).unwrap_or_else(|| spec.default_x0())),
        horizon: a.grid.horizon.or(file.horizon).unwrap_or(1.0),
        dt: a.grid.dt.or(file.dt).unwrap_or(1e-5),
        epsilons: a.eps.or(file.epsilons).unwrap_or_else(|| vec![0.05]),
        masses: a.masses.or(file.masses).unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]),
        n_paths: a.paths.or(file.n_paths).unwrap_or(400),
        master_seed: a.grid.seed.or(file.seed).unwrap_or(0),
        model: spec.clone(),
    };
    plan.validate()?;
    let mut cfg = ResolvedConfig::new(command, &spec, plan.resolved_x0());
    cfg.horizon = plan.horizon;
    cfg.dt = plan.dt;
    cfg.master_seed = plan.master_seed;
    cfg.masses = Some(plan.masses.clone());
    cfg.n_paths = Some(plan.n_paths);
    if command == "converge" {
        cfg.epsilons = Some(plan.epsilons.clone());
    }
    let policy = ExecutionPolicy::with_threads(a.threads);
    let result = match spec.build()? {
        AnyModel::One(m) => run_with_model(&m, &plan, policy)?,
        AnyModel::Two(m) => run_with_model(&m, &plan, policy)?,
    };
    let out = resolve_out(a.common.out.as_deref(), command, format);
    write_tables(&result, &cfg, command, format, &out)?;
    let limit_exits: u64 = result.convergence.rows.iter().map(|r| r.limit_exits).max().unwrap_or(0);
    if !result.within_quarantine() {
        return Err(numerical_failure(format!(
            "{:.2}% of paths aborted at some mass (limit 1%); table written to {}",
            100.0 * result.max_abort_fraction(),
            out.display()
        )));
    }
    Ok(format!(
        "{command}: {} rows -> {} (limiting process left the domain on up to {limit_exits} paths)",
        if command == "converge" { result.convergence.rows.len() } else { result.exits.rows.len() },
        out.display()
    ))
}

fn write_tables(
    result: &ExperimentResult,
    cfg: &ResolvedConfig,
    command: &str,
    format: Format,
    out: &std::path::Path,
) -> Result<(), Error> {
    let contents = match (command, format) {
        ("converge", Format::Csv) => csv_with_header(cfg, &result.convergence.to_csv()),
        ("converge", Format::Json) => json_with_config(cfg, serde_json::to_value(&result.convergence).expect("table")),
        (_, Format::Csv) => csv_with_header(cfg, &result.exits.to_csv()),
        (_, Format::Json) => json_with_config(cfg, serde_json::to_value(&result.exits).expect("table")),
    };
    write_atomic(out, contents.as_bytes())?;
    if command == "converge" {
        let mut dat = format!("# kramers {}\n# config: {}\n", cfg.version, cfg.to_json()).into_bytes();
        result.convergence.write_gnuplot(&mut dat).expect("in-memory write");
        write_atomic(&out.with_extension("dat"), &dat)?;
    }
    Ok(())
}

fn lyapunov_check(a: CheckArgs) -> Result<String, Failure> {
    let (_, spec) = load(&a.common)?;
    let format = a.common.format.unwrap_or(Format::Json);
    let mut cfg = ResolvedConfig::new("lyapunov-check", &spec, Vec::new());
    cfg.grid_points = Some(a.points);
    let report = match spec.build()? {
        AnyModel::One(m) => check_model(&m, a.points)?,
        AnyModel::Two(m) => check_model(&m, a.points)?,
    };
    let out = resolve_out(a.common.out.as_deref(), "lyapunov-check", format);
    let contents = match format {
        Format::Json => json_with_config(&cfg, serde_json::to_value(&report).expect("report")),
        Format::Csv => {
            let mut body = String::from("k,inf_v,samples\n");
            for s in &report.p1 {
                body.push_str(&format!("{},{},{}\n", s.k, s.inf_v, s.samples));
            }
            let p2 = format!(
                "# p2: C={} D={} max_violation={} pass={}\n",
                report.p2.c, report.p2.d, report.p2.max_violation, report.p2.pass
            );
            csv_with_header(&cfg, &(p2 + &body))
        }
    };
    write_atomic(&out, contents.as_bytes())?;
    Ok(format!(
        "lyapunov-check {}: {} (p2: C={}, D={:.6e}, max violation {:.3e}) -> {}",
        spec.name(),
        if report.pass { "PASS" } else { "FAIL" },
        report.p2.c,
        report.p2.d,
        report.p2.max_violation,
        out.display()
    ))
}

fn drift_check(a: CheckArgs) -> Result<String, Failure> {
    let (_, spec) = load(&a.common)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut cfg = ResolvedConfig::new("drift-check", &spec, Vec::new());
    cfg.grid_points = Some(a.points);
    let out = resolve_out(a.common.out.as_deref(), "drift-check", format);
    let (rows, worst, worst_fd) = match spec.build()? {
        AnyModel::One(m) => drift_rows(&m, a.points)?,
        AnyModel::Two(m) => drift_rows(&m, a.points)?,
    };
    let contents = match format {
        Format::Csv => {
            let n = spec.dim();
            let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
            header.extend((1..=n).map(|i| format!("s_{i}")));
            header.extend((1..=n).map(|i| format!("s_ref_{i}")));
            header.push("abs_err".into());
            let mut body = header.join(",") + "\n";
            for r in &rows {
                let fields: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                body.push_str(&fields.join(","));
                body.push('\n');
            }
            csv_with_header(&cfg, &body)
        }
        Format::Json => json_with_config(
            &cfg,
            serde_json::json!({ "max_abs_error": worst, "max_abs_error_finite_difference": worst_fd, "rows": rows }),
        ),
    };
    write_atomic(&out, contents.as_bytes())?;
    Ok(format!(
        "drift-check {}: max |S - S_ref| = {worst:.3e} over {} points (finite-difference gradient: {worst_fd:.3e}) -> {}",
        spec.name(),
        rows.len(),
        out.display()
    ))
}

/// Rows `x, S(x), S_ref(x), |S − S_ref|_∞` plus the worst errors of the analytic- and
/// finite-difference-gradient pipelines.
fn drift_rows<const N: usize, const K: usize>(
    model: &Model<N, K>,
    points: usize,
) -> Result<(Vec<Vec<f64>>, f64, f64), Error> {
    let fd_model = model.without_friction_grad();
    let mut rows = Vec::new();
    let (mut worst, mut worst_fd) = (0.0_f64, 0.0_f64);
    for x in model.domain().grid_points::<N>(points) {
        let reference = model.reference_noise_drift(&x).ok_or_else(|| {
            Error::Config(format!("model `{}` has no closed-form noise-induced drift", model.name()))
        })?;
        let s = noise_induced_drift(model, &x)?;
        let err = (s - reference).amax();
        worst = worst.max(err);
        if model.domain().boundary_distance(x.as_slice()) > default_fd_step(&x) {
            worst_fd = worst_fd.max((noise_induced_drift(&fd_model, &x)? - reference).amax());
        }
        let mut row: Vec<f64> = x.iter().copied().collect();
        row.extend(s.iter());
        row.extend(reference.iter());
        row.push(err);
        rows.push(row);
    }
    Ok((rows, worst, worst_fd))
}
