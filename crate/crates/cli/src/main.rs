//! `latflux` — validate, certify, and simulate one-dimensional particle
//! systems with several conservation laws, and integrate their limiting
//! hyperbolic systems.

use clap::{Args, Parser, Subcommand};
use latflux::domain::admissible_grid;
use latflux::harness::{
    builtin_model, convergence_csv_header, convergence_csv_row, mix_seed, run_certification,
    run_convergence, ExperimentSpec, HarnessError,
};
use latflux::kmc::{block_average, evolve, sample_local_equilibrium};
use latflux::model::{
    check_irreducibility, load_model, save_model, validate_conservation, validate_rate_cycle,
    validate_stationarity, SpinModel, ValidationReport,
};
use latflux::pde::{
    solve, BricklayerClosedFlux, FluxEvaluator, LerouxClosedFlux, ModelFlux, ProfileSpec,
};
use latflux::thermo::invert_densities;
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "latflux",
    about = "Multi-conservation-law particle systems: validation, thermodynamics, flux \
             certification, kinetic Monte Carlo, and finite-volume hydrodynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Model selection shared by most subcommands.
#[derive(Args)]
struct ModelArgs {
    /// Built-in model: `leroux` or `bricklayer`.
    #[arg(long, conflicts_with = "model")]
    builtin: Option<String>,
    /// Path to a model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<(SpinModel, String), CliError> {
        match (&self.builtin, &self.model) {
            (Some(name), None) => Ok((builtin_model(name)?, format!("builtin:{name}"))),
            (None, Some(path)) => Ok((load_model(path)?, path.display().to_string())),
            _ => Err(CliError::Usage(
                "pass exactly one of --builtin or --model".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the structural validators (A)-(D) on a model.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        /// Lattice size for the irreducibility certificate. The result is a
        /// finite certificate for this size only, not a proof for all N.
        #[arg(long, default_value_t = 4)]
        sites: usize,
    },
    /// Certify the structural identities on a grid and emit a JSON report;
    /// exits nonzero if any residual exceeds its threshold.
    Certify {
        #[command(flatten)]
        model: ModelArgs,
        /// Output path for the JSON report (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate entropy data over an admissible density grid as CSV.
    Thermo {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid resolution per axis, e.g. `20x20`.
        #[arg(long, default_value = "20x20")]
        grid: String,
        /// Hull shrink margin for the grid.
        #[arg(long, default_value_t = 0.02)]
        margin: f64,
        /// Output CSV path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the limiting conservation-law system on the torus.
    Pde {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1024)]
        cells: usize,
        #[arg(long, default_value_t = 0.45)]
        cfl: f64,
        #[arg(long = "t-end")]
        t_end: f64,
        /// Number of evenly spaced snapshots over (0, t_end].
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        /// Initial profile: `const:v1,..` or `sine:mean1,amp1,..`.
        #[arg(long)]
        initial: String,
        /// Flux route: `exact` (summation over the model) or `closed`
        /// (built-in closed forms; built-ins only).
        #[arg(long, default_value = "exact")]
        flux: String,
        /// Output CSV path (defaults to stdout); columns time,x,u_1..u_n.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kinetic Monte Carlo: sample local equilibrium, evolve, block-average.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        sites: usize,
        /// Macroscopic duration.
        #[arg(long)]
        t: f64,
        #[arg(long)]
        initial: String,
        /// Block size for the output averages; must divide --sites.
        #[arg(long)]
        block: usize,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (defaults to stdout); columns replica,x_cell,u_1..u_n.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence experiment from a spec file (exit codes: 0 ok,
    /// 2 validation failure, 3 post-shock refusal).
    Converge {
        /// Experiment spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Override the rows CSV path from the spec.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Override the summary JSON path from the spec.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write a built-in model as a model JSON file.
    ExportModel {
        /// Built-in name: `leroux` or `bricklayer`.
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Harness(HarnessError),
    Model(latflux::model::ModelError),
    Solver(latflux::pde::SolverError),
    Kmc(latflux::kmc::KmcError),
    Thermo(latflux::thermo::ThermoError),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Harness(e) => write!(f, "{e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Kmc(e) => write!(f, "{e}"),
            CliError::Thermo(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}
impl From<latflux::model::ModelError> for CliError {
    fn from(e: latflux::model::ModelError) -> Self {
        CliError::Model(e)
    }
}
impl From<latflux::pde::SolverError> for CliError {
    fn from(e: latflux::pde::SolverError) -> Self {
        CliError::Solver(e)
    }
}
impl From<latflux::kmc::KmcError> for CliError {
    fn from(e: latflux::kmc::KmcError) -> Self {
        CliError::Kmc(e)
    }
}
impl From<latflux::thermo::ThermoError> for CliError {
    fn from(e: latflux::thermo::ThermoError) -> Self {
        CliError::Thermo(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Validate { model, sites } => cmd_validate(model, sites),
        Command::Certify { model, out } => cmd_certify(model, out),
        Command::Thermo {
            model,
            grid,
            margin,
            out,
        } => cmd_thermo(model, &grid, margin, out),
        Command::Pde {
            model,
            cells,
            cfl,
            t_end,
            snapshots,
            initial,
            flux,
            out,
        } => cmd_pde(model, cells, cfl, t_end, snapshots, &initial, &flux, out),
        Command::Simulate {
            model,
            sites,
            t,
            initial,
            block,
            replicas,
            seed,
            out,
        } => cmd_simulate(model, sites, t, &initial, block, replicas, seed, out),
        Command::Converge {
            spec,
            rows,
            summary,
        } => cmd_converge(&spec, rows, summary),
        Command::ExportModel { builtin, out } => {
            let model = builtin_model(&builtin)?;
            save_model(&model, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_validate(model_args: ModelArgs, sites: usize) -> Result<ExitCode, CliError> {
    let (model, label) = model_args.resolve()?;
    let mut all_passed = true;
    let mut show = |name: &str, report: &ValidationReport| {
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] {name}");
        for w in report.witnesses.iter().take(5) {
            println!(
                "       witness: states ({}) — {}",
                w.states.join(","),
                w.detail
            );
        }
        if report.witnesses.len() > 5 {
            println!("       ... {} more witnesses", report.witnesses.len() - 5);
        }
        all_passed &= report.passed;
    };
    println!("model: {label}");
    show(
        "condition (A) pairwise conservation",
        &validate_conservation(&model),
    );
    show(
        "condition (C) pair detailed balance",
        &validate_stationarity(&model),
    );
    show(
        "condition (D) cyclic total-rate identity",
        &validate_rate_cycle(&model),
    );
    match check_irreducibility(&model, sites) {
        Ok(report) => show(
            &format!("condition (B) irreducibility on {sites} sites (finite certificate)"),
            &report,
        ),
        Err(err) => {
            println!("[FAIL] condition (B): {err}");
            all_passed = false;
        }
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_certify(model_args: ModelArgs, out: Option<PathBuf>) -> Result<ExitCode, CliError> {
    let (model, label) = model_args.resolve()?;
    let report = run_certification(&model, &label)?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    write_output(out.as_deref(), &json)?;
    Ok(if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_thermo(
    model_args: ModelArgs,
    grid: &str,
    margin: f64,
    out: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let (model, _) = model_args.resolve()?;
    let counts = parse_grid(grid, model.n_cons())?;
    let points = admissible_grid(&model, &counts, margin);
    let n = model.n_cons();
    let mut text = String::new();
    let mut header: Vec<String> = (1..=n).map(|k| format!("u_{k}")).collect();
    header.extend((1..=n).map(|k| format!("theta_{k}")));
    header.push("S".into());
    header.push("eigmin_hessian".into());
    text.push_str(&header.join(","));
    text.push('\n');
    for u in &points {
        let dp = invert_densities(&model, u)?;
        let eigmin = dp
            .hessian
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let mut cols: Vec<String> = u.iter().map(|v| v.to_string()).collect();
        cols.extend(dp.theta.iter().map(|v| v.to_string()));
        cols.push(dp.entropy.to_string());
        cols.push(eigmin.to_string());
        text.push_str(&cols.join(","));
        text.push('\n');
    }
    write_output(out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pde(
    model_args: ModelArgs,
    cells: usize,
    cfl: f64,
    t_end: f64,
    snapshots: usize,
    initial: &str,
    flux_route: &str,
    out: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let (model, label) = model_args.resolve()?;
    let spec = ProfileSpec::parse(initial, model.n_cons())?;
    let profile = spec.profile(cells)?;
    let times: Vec<f64> = (1..=snapshots.max(1))
        .map(|k| t_end * k as f64 / snapshots.max(1) as f64)
        .collect();
    let exact = ModelFlux::new(&model);
    let leroux_closed = LerouxClosedFlux;
    let bricklayer_closed = BricklayerClosedFlux::builtin();
    let flux: &dyn FluxEvaluator = match flux_route {
        "exact" => &exact,
        "closed" if label == "builtin:leroux" => &leroux_closed,
        "closed" if label == "builtin:bricklayer" => &bricklayer_closed,
        "closed" => {
            return Err(CliError::Usage(
                "--flux closed is only available for the built-in models".into(),
            ))
        }
        other => return Err(CliError::Usage(format!("unknown flux route `{other}`"))),
    };
    let traj = solve(flux, &profile, t_end, cfl, &times)?;
    let n = model.n_cons();
    let mut text = String::from("time,x");
    for k in 1..=n {
        text.push_str(&format!(",u_{k}"));
    }
    text.push('\n');
    for snap in &traj.snapshots {
        for j in 0..snap.n_cells() {
            text.push_str(&snap.time.to_string());
            text.push(',');
            text.push_str(&snap.x_center(j).to_string());
            for v in snap.cell(j) {
                text.push(',');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
    }
    write_output(out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model_args: ModelArgs,
    sites: usize,
    t: f64,
    initial: &str,
    block: usize,
    replicas: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let (model, _) = model_args.resolve()?;
    let spec = ProfileSpec::parse(initial, model.n_cons())?;
    let profiles: Vec<Result<latflux::pde::Profile, CliError>> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let sample_seed = mix_seed(seed, &[replica as u64, 0]);
            let evolve_seed = mix_seed(seed, &[replica as u64, 1]);
            let cfg = sample_local_equilibrium(&model, &spec, sites, sample_seed)?;
            let cfg = evolve(&model, cfg, t, evolve_seed)?;
            Ok(block_average(&model, &cfg, block)?)
        })
        .collect();
    let n = model.n_cons();
    let mut text = String::from("replica,x_cell");
    for k in 1..=n {
        text.push_str(&format!(",u_{k}"));
    }
    text.push('\n');
    for (replica, profile) in profiles.into_iter().enumerate() {
        let profile = profile?;
        for j in 0..profile.n_cells() {
            text.push_str(&replica.to_string());
            text.push(',');
            text.push_str(&profile.x_center(j).to_string());
            for v in profile.cell(j) {
                text.push(',');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
    }
    write_output(out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_converge(
    spec_path: &PathBuf,
    rows_override: Option<PathBuf>,
    summary_override: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", spec_path.display())))?;
    let spec: ExperimentSpec = match serde_json::from_str(&text) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: experiment spec invalid: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let rows_path = rows_override.or_else(|| spec.rows_csv.clone());
    let summary_path = summary_override.or_else(|| spec.summary_json.clone());

    // Flush rows as they complete so an abort keeps partial results.
    let mut rows_file = match &rows_path {
        Some(path) => {
            let mut f = fs::File::create(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            writeln!(f, "{}", convergence_csv_header(component_count(&spec)?))
                .map_err(|e| CliError::Io(e.to_string()))?;
            Some(f)
        }
        None => None,
    };
    let result = run_convergence(&spec, |row| {
        let line = convergence_csv_row(row);
        match &mut rows_file {
            Some(f) => {
                let _ = writeln!(f, "{line}");
                let _ = f.flush();
            }
            None => println!("{line}"),
        }
    });
    match result {
        Ok(summary) => {
            let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
            match &summary_path {
                Some(path) => fs::write(path, json.clone() + "\n")
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(HarnessError::PostShock { drop, t, limit }) => {
            eprintln!(
                "warning: refusing post-shock comparison: entropy functional drops by {drop:e} \
                 over [0, {t}] (limit {limit:e})"
            );
            Ok(ExitCode::from(3))
        }
        Err(e @ (HarnessError::InvalidSpec(_) | HarnessError::ModelInvalid { .. })) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn component_count(spec: &ExperimentSpec) -> Result<usize, CliError> {
    Ok(spec.model.resolve()?.n_cons())
}

fn parse_grid(text: &str, n: usize) -> Result<Vec<usize>, CliError> {
    let counts: Vec<usize> = text
        .split('x')
        .map(|tok| tok.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad grid spec `{text}`; expected e.g. 20x20")))?;
    if counts.len() == 1 && n > 1 {
        return Ok(vec![counts[0]; n]);
    }
    if counts.len() != n {
        return Err(CliError::Usage(format!(
            "grid spec `{text}` has {} axes, model has {n} conserved quantities",
            counts.len()
        )));
    }
    Ok(counts)
}

fn write_output(path: Option<&std::path::Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
