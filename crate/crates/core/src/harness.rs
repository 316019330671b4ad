//! Experiment orchestration: hydrodynamic-convergence studies comparing
//! kinetic Monte Carlo against the finite-volume solution, and the
//! certification pipeline aggregating validators and structural-identity
//! residuals into one machine-readable report.

use crate::domain::admissible_grid;
use crate::flux::{macro_flux, FluxError};
use crate::kmc::{block_average, evolve, sample_local_equilibrium, KmcError};
use crate::model::{
    bricklayer_model, check_irreducibility, leroux_model, load_model, validate_conservation,
    validate_rate_cycle, validate_stationarity, BricklayerParams, ModelError, SpinModel,
    ValidationReport,
};
use crate::pde::{solve, DiagnosticsError, ModelFlux, ProfileSpec, SolverError};
use crate::thermo::{canonical_point, invert_densities, ThermoError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::PathBuf;
use thiserror::Error;

/// Residual ceiling for every structural-identity certification check.
pub const RESIDUAL_THRESHOLD: f64 = 1e-10;
/// Entropy-functional drop (in units of the PDE cell width) beyond which a
/// convergence run is refused as post-shock.
pub const POST_SHOCK_DROP_CELLS: f64 = 10.0;
/// Default block-size rule: `l = round_to_divisor(multiplier * sqrt(N))`.
/// The multiplier keeps the per-block statistical floor of the L1 error
/// below the convergence acceptance threshold at the default replica count;
/// sqrt(Var/l) with Var up to 1 needs l >= 512 at N = 2^14.
pub const DEFAULT_BLOCK_MULTIPLIER: f64 = 4.0;
/// Lattice sites of the irreducibility certificate in certification runs.
pub const CERTIFY_IRREDUCIBILITY_SITES: usize = 4;
/// Grid resolution per axis for certification runs.
pub const CERTIFY_GRID_PER_AXIS: usize = 30;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment spec invalid: {0}")]
    InvalidSpec(String),
    #[error("model failed validation: condition {condition:?} has {witnesses} witnesses")]
    ModelInvalid {
        condition: crate::model::Condition,
        witnesses: usize,
    },
    #[error(
        "post-shock refusal: the entropy functional drops by {drop:e} over [0, {t}], more than \
         {limit:e} (10 cell widths); shorten t or refine the grid"
    )]
    PostShock { drop: f64, t: f64, limit: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Kmc(#[from] KmcError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("io error on {path}: {detail}")]
    Io { path: String, detail: String },
}

/// Model reference in experiment specs: a named built-in or a model file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub enum ModelRef {
    #[serde(rename = "builtin")]
    Builtin(String),
    #[serde(rename = "file")]
    File(PathBuf),
}

impl ModelRef {
    pub fn resolve(&self) -> Result<SpinModel, HarnessError> {
        match self {
            ModelRef::Builtin(name) => builtin_model(name),
            ModelRef::File(path) => Ok(load_model(path)?),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ModelRef::Builtin(name) => format!("builtin:{name}"),
            ModelRef::File(path) => path.display().to_string(),
        }
    }
}

/// Named built-ins exposed on every CLI surface. `leroux` is the
/// three-state exchange model at a = b = 1; `bricklayer` is the four-state
/// deposition model with the charge-mixing exchanges that make it
/// irreducible.
pub fn builtin_model(name: &str) -> Result<SpinModel, HarnessError> {
    match name {
        "leroux" => Ok(leroux_model(1.0, 1.0)?),
        "bricklayer" => Ok(bricklayer_model(&BricklayerParams::ergodic())?),
        other => Err(HarnessError::InvalidSpec(format!(
            "unknown builtin `{other}` (available: leroux, bricklayer)"
        ))),
    }
}

/// A convergence experiment: evolve local-equilibrium lattices of the given
/// sizes to macroscopic time `t`, block-average, and compare against the
/// finite-volume solution of the limiting system started from the same
/// initial data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelRef,
    /// Initial-profile DSL string (`const:...` / `sine:...`).
    pub initial: String,
    /// Macroscopic end time.
    pub t: f64,
    /// Lattice sizes, strictly increasing.
    pub sizes: Vec<usize>,
    /// Block-size rule multiplier; `None` uses the default.
    #[serde(default)]
    pub block_multiplier: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_pde_cells")]
    pub pde_cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Output path of the per-size CSV rows (CLI writes it).
    #[serde(default)]
    pub rows_csv: Option<PathBuf>,
    /// Output path of the summary JSON (CLI writes it).
    #[serde(default)]
    pub summary_json: Option<PathBuf>,
}

fn default_pde_cells() -> usize {
    1024
}

fn default_cfl() -> f64 {
    0.45
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.t.is_nan() || self.t <= 0.0 {
            return Err(HarnessError::InvalidSpec(format!(
                "t must be > 0, got {}",
                self.t
            )));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::InvalidSpec(
                "sizes must be a nonempty strictly increasing list".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(HarnessError::InvalidSpec("replicas must be >= 1".into()));
        }
        if let Some(m) = self.block_multiplier {
            if m.is_nan() || m <= 0.0 {
                return Err(HarnessError::InvalidSpec(
                    "block_multiplier must be > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-replica L1 errors and test-function pairings.
type ReplicaSample = (Vec<f64>, Vec<Vec<f64>>);

/// Per-size result of the convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n_sites: usize,
    pub block: usize,
    pub replicas: usize,
    /// Mean over replicas of the per-component L1 distance between the
    /// block-averaged empirical profile and the restricted PDE solution.
    pub l1_error: Vec<f64>,
    /// Standard deviation over replicas of the same.
    pub l1_std: Vec<f64>,
    /// `|<g, empirical> - integral g u_pde|`, averaged over replicas, for
    /// each test function and component.
    pub test_function_errors: Vec<TestFunctionError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionError {
    pub g: String,
    pub component: usize,
    pub error: f64,
}

/// Full experiment output.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub model: String,
    pub t: f64,
    /// Entropy-functional drift of the PDE run over [0, t] (signed;
    /// negative means dissipation).
    pub entropy_drift: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Strict decrease of every per-component L1 mean along the size list.
    pub monotone_decrease: bool,
}

type TestFn = fn(f64) -> f64;

/// The smooth test functions of the weak-convergence statement.
const TEST_FUNCTIONS: [(&str, TestFn); 3] = [
    ("one", |_| 1.0),
    ("sin2pix", |x| (TAU * x).sin()),
    ("cos2pix", |x| (TAU * x).cos()),
];

/// Runs the convergence experiment. `on_row` fires after each lattice size
/// completes so partial results can be flushed before a later failure.
pub fn run_convergence(
    spec: &ExperimentSpec,
    mut on_row: impl FnMut(&ConvergenceRow),
) -> Result<ConvergenceSummary, HarnessError> {
    spec.validate()?;
    let model = spec.model.resolve()?;
    require_valid(&model)?;
    let initial = ProfileSpec::parse(&spec.initial, model.n_cons())?;

    // Reference solution, solved once at the PDE resolution.
    let flux = ModelFlux::new(&model);
    let initial_profile = initial.profile(spec.pde_cells)?;
    let snapshot_times: Vec<f64> = (1..=8).map(|k| spec.t * k as f64 / 8.0).collect();
    let mut traj = solve(&flux, &initial_profile, spec.t, spec.cfl, &snapshot_times)?;
    let reference_u = initial_profile.means();
    traj.attach_entropy_series(&model, &reference_u)?;

    // Post-shock refusal: the entropy functional of a smooth solution is
    // conserved; a drop beyond a few cell widths signals a shock inside
    // [0, t] and the lattice comparison would be meaningless there.
    let h0 = traj.entropy_series.first().map(|&(_, h)| h).unwrap_or(0.0);
    let h_min = traj
        .entropy_series
        .iter()
        .map(|&(_, h)| h)
        .fold(f64::INFINITY, f64::min);
    let drop = h0 - h_min;
    let limit = POST_SHOCK_DROP_CELLS / spec.pde_cells as f64;
    if drop > limit {
        return Err(HarnessError::PostShock {
            drop,
            t: spec.t,
            limit,
        });
    }
    let entropy_drift = traj
        .entropy_series
        .last()
        .map(|&(_, h)| h - h0)
        .unwrap_or(0.0);
    let pde_final = traj
        .snapshots
        .last()
        .expect("solver returns snapshots")
        .clone();

    // Integrals of the test functions against the PDE solution.
    let pde_pairings: Vec<Vec<f64>> = TEST_FUNCTIONS
        .iter()
        .map(|(_, g)| {
            (0..model.n_cons())
                .map(|k| {
                    (0..pde_final.n_cells())
                        .map(|j| g(pde_final.x_center(j)) * pde_final.cell(j)[k])
                        .sum::<f64>()
                        / pde_final.n_cells() as f64
                })
                .collect()
        })
        .collect();

    let multiplier = spec.block_multiplier.unwrap_or(DEFAULT_BLOCK_MULTIPLIER);
    let mut rows = Vec::new();
    for (size_idx, &n_sites) in spec.sizes.iter().enumerate() {
        let block = round_to_divisor(multiplier * (n_sites as f64).sqrt(), n_sites);
        let cells = n_sites / block;
        let pde_restricted = pde_final.restrict_to(cells);

        let replica_results: Vec<Result<ReplicaSample, HarnessError>> = (0..spec.replicas)
            .into_par_iter()
            .map(|replica| {
                let sample_seed = mix_seed(spec.seed, &[size_idx as u64, replica as u64, 0]);
                let evolve_seed = mix_seed(spec.seed, &[size_idx as u64, replica as u64, 1]);
                let cfg = sample_local_equilibrium(&model, &initial, n_sites, sample_seed)?;
                let cfg = evolve(&model, cfg, spec.t, evolve_seed)?;
                let empirical = block_average(&model, &cfg, block)?;
                let l1 = empirical.l1_distance(&pde_restricted);
                // Weak-form pairings straight from the microscopic
                // configuration.
                let pairings: Vec<Vec<f64>> = TEST_FUNCTIONS
                    .iter()
                    .map(|(_, g)| {
                        let mut acc = vec![0.0; model.n_cons()];
                        for (j, &w) in cfg.omega.iter().enumerate() {
                            let gx = g(j as f64 / n_sites as f64);
                            for (k, &x) in model.xi(w as usize).iter().enumerate() {
                                acc[k] += gx * x as f64;
                            }
                        }
                        acc.iter().map(|a| a / n_sites as f64).collect()
                    })
                    .collect();
                Ok((l1, pairings))
            })
            .collect();

        let mut l1_all: Vec<Vec<f64>> = Vec::with_capacity(spec.replicas);
        let mut tf_all: Vec<Vec<Vec<f64>>> = Vec::with_capacity(spec.replicas);
        for r in replica_results {
            let (l1, tf) = r?;
            l1_all.push(l1);
            tf_all.push(tf);
        }
        let nc = model.n_cons();
        let l1_error: Vec<f64> = (0..nc)
            .map(|k| l1_all.iter().map(|v| v[k]).sum::<f64>() / spec.replicas as f64)
            .collect();
        let l1_std: Vec<f64> = (0..nc)
            .map(|k| {
                let mean = l1_error[k];
                let var = l1_all.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>()
                    / spec.replicas as f64;
                var.sqrt()
            })
            .collect();
        let mut test_function_errors = Vec::new();
        for (gi, (name, _)) in TEST_FUNCTIONS.iter().enumerate() {
            for k in 0..nc {
                let mean_err = tf_all
                    .iter()
                    .map(|tf| (tf[gi][k] - pde_pairings[gi][k]).abs())
                    .sum::<f64>()
                    / spec.replicas as f64;
                test_function_errors.push(TestFunctionError {
                    g: name.to_string(),
                    component: k,
                    error: mean_err,
                });
            }
        }
        let row = ConvergenceRow {
            n_sites,
            block,
            replicas: spec.replicas,
            l1_error,
            l1_std,
            test_function_errors,
        };
        on_row(&row);
        rows.push(row);
    }

    let nc = model.n_cons();
    let monotone_decrease =
        (0..nc).all(|k| rows.windows(2).all(|w| w[1].l1_error[k] < w[0].l1_error[k]));
    Ok(ConvergenceSummary {
        model: spec.model.describe(),
        t: spec.t,
        entropy_drift,
        rows,
        monotone_decrease,
    })
}

fn require_valid(model: &SpinModel) -> Result<(), HarnessError> {
    for report in [
        validate_conservation(model),
        validate_stationarity(model),
        validate_rate_cycle(model),
    ] {
        if !report.passed {
            return Err(HarnessError::ModelInvalid {
                condition: report.condition,
                witnesses: report.witnesses.len(),
            });
        }
    }
    Ok(())
}

/// The divisor of `n` closest to `target` (ties resolve upward).
pub fn round_to_divisor(target: f64, n: usize) -> usize {
    let mut best = 1usize;
    let mut best_err = f64::INFINITY;
    let mut d = 1usize;
    while d * d <= n {
        if n.is_multiple_of(d) {
            for cand in [d, n / d] {
                let err = (cand as f64 - target).abs();
                if err < best_err || (err == best_err && cand > best) {
                    best = cand;
                    best_err = err;
                }
            }
        }
        d += 1;
    }
    best
}

/// SplitMix64-based deterministic seed derivation.
pub fn mix_seed(master: u64, parts: &[u64]) -> u64 {
    let mut z = master;
    for &p in parts {
        z = splitmix64(z ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix64(z)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One named check inside a certification report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Aggregate certification of a model: the four rate conditions, the
/// Onsager / symmetry / Lax residuals and eigenstructure over the
/// certification grid, and positive definiteness of the entropy Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub model: String,
    pub onsager_residual: f64,
    pub sym_residual_max: f64,
    pub lax_residual_max: f64,
    /// Smallest gap between adjacent characteristic speeds over the grid;
    /// reported, not thresholded (hyperbolicity does not require strict
    /// separation).
    pub speeds_min_gap: f64,
    pub grid_size: usize,
    pub speed_imag_residual_max: f64,
    /// `max |G'' S'' - I|` over the grid.
    pub inverse_identity_residual_max: f64,
    pub hessian_positive_definite: bool,
    pub conditions: Vec<CheckResult>,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

/// Runs validators (A)-(D) plus the grid certification and returns the
/// aggregate report; never panics on a failing model.
pub fn run_certification(
    model: &SpinModel,
    label: &str,
) -> Result<CertificationReport, HarnessError> {
    let mut conditions = Vec::new();
    let mut push_condition = |name: &str, report: &ValidationReport| {
        conditions.push(CheckResult {
            name: name.to_string(),
            passed: report.passed,
            value: report.witnesses.len() as f64,
            threshold: 0.0,
        });
    };
    push_condition("conservation (A)", &validate_conservation(model));
    push_condition("stationarity (C)", &validate_stationarity(model));
    push_condition("rate cycle (D)", &validate_rate_cycle(model));
    match check_irreducibility(model, CERTIFY_IRREDUCIBILITY_SITES) {
        Ok(report) => push_condition(
            &format!("irreducibility (B) at {CERTIFY_IRREDUCIBILITY_SITES} sites"),
            &report,
        ),
        Err(err) => conditions.push(CheckResult {
            name: format!("irreducibility (B): {err}"),
            passed: false,
            value: f64::NAN,
            threshold: 0.0,
        }),
    }

    let grid = admissible_grid(
        model,
        &vec![CERTIFY_GRID_PER_AXIS; model.n_cons()],
        crate::domain::GRID_MARGIN,
    );
    let mut onsager: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut lax: f64 = 0.0;
    let mut imag: f64 = 0.0;
    let mut inverse_identity: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut hessian_pd = true;
    for u in &grid {
        let report = macro_flux(model, u)?;
        onsager = onsager.max(report.onsager_residual);
        sym = sym.max(report.sym_residual);
        lax = lax.max(report.lax_residual);
        imag = imag.max(report.speed_imag_residual);
        for pair in report.speeds.windows(2) {
            min_gap = min_gap.min(pair[1] - pair[0]);
        }
        let dp = invert_densities(model, u)?;
        let cov = canonical_point(model, dp.theta.as_slice())?.covariance;
        let eye = nalgebra::DMatrix::identity(model.n_cons(), model.n_cons());
        inverse_identity = inverse_identity.max((&cov * &dp.hessian - eye).amax());
        if nalgebra::Cholesky::new(dp.hessian.clone()).is_none() {
            hessian_pd = false;
        }
    }
    if grid.len() < 2 {
        min_gap = f64::NAN;
    }

    let checks = vec![
        CheckResult {
            name: "onsager residual".into(),
            passed: onsager < RESIDUAL_THRESHOLD,
            value: onsager,
            threshold: RESIDUAL_THRESHOLD,
        },
        CheckResult {
            name: "entropy compatibility (sym) residual".into(),
            passed: sym < RESIDUAL_THRESHOLD,
            value: sym,
            threshold: RESIDUAL_THRESHOLD,
        },
        CheckResult {
            name: "lax residual".into(),
            passed: lax < RESIDUAL_THRESHOLD,
            value: lax,
            threshold: RESIDUAL_THRESHOLD,
        },
        CheckResult {
            name: "speed imaginary residual".into(),
            passed: imag < RESIDUAL_THRESHOLD,
            value: imag,
            threshold: RESIDUAL_THRESHOLD,
        },
        CheckResult {
            name: "inverse identity G''S'' = I".into(),
            passed: inverse_identity < RESIDUAL_THRESHOLD,
            value: inverse_identity,
            threshold: RESIDUAL_THRESHOLD,
        },
        CheckResult {
            name: "entropy hessian positive definite".into(),
            passed: hessian_pd,
            value: if hessian_pd { 1.0 } else { 0.0 },
            threshold: 1.0,
        },
    ];

    let all_passed = conditions.iter().all(|c| c.passed) && checks.iter().all(|c| c.passed);
    Ok(CertificationReport {
        model: label.to_string(),
        onsager_residual: onsager,
        sym_residual_max: sym,
        lax_residual_max: lax,
        speeds_min_gap: min_gap,
        grid_size: grid.len(),
        speed_imag_residual_max: imag,
        inverse_identity_residual_max: inverse_identity,
        hessian_positive_definite: hessian_pd,
        conditions,
        checks,
        all_passed,
    })
}

/// CSV header for convergence rows given component count `nc`.
pub fn convergence_csv_header(nc: usize) -> String {
    let mut cols = vec!["n_sites".to_string(), "block".into(), "replicas".into()];
    for k in 0..nc {
        cols.push(format!("l1_{}", k + 1));
    }
    for k in 0..nc {
        cols.push(format!("l1_std_{}", k + 1));
    }
    for (name, _) in TEST_FUNCTIONS {
        for k in 0..nc {
            cols.push(format!("tf_{name}_{}", k + 1));
        }
    }
    cols.join(",")
}

/// One CSV line for a convergence row; float formatting is the shortest
/// round-trip form, so identical runs produce byte-identical files.
pub fn convergence_csv_row(row: &ConvergenceRow) -> String {
    let mut cols = vec![
        row.n_sites.to_string(),
        row.block.to_string(),
        row.replicas.to_string(),
    ];
    cols.extend(row.l1_error.iter().map(|v| v.to_string()));
    cols.extend(row.l1_std.iter().map(|v| v.to_string()));
    cols.extend(row.test_function_errors.iter().map(|e| e.error.to_string()));
    cols.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_to_divisor_picks_nearest() {
        assert_eq!(round_to_divisor(32.0, 1024), 32);
        assert_eq!(round_to_divisor(100.0, 1024), 128); // 64 and 128 tie at 36/28
        assert_eq!(round_to_divisor(96.0, 1024), 128); // tie resolves upward
        assert_eq!(round_to_divisor(5.0, 100), 5);
        assert_eq!(round_to_divisor(7.0, 100), 5);
        assert_eq!(round_to_divisor(1.0, 17), 1);
        assert_eq!(round_to_divisor(9.0, 17), 17);
    }

    #[test]
    fn seed_mixing_is_deterministic_and_spread() {
        let a = mix_seed(42, &[0, 1, 0]);
        let b = mix_seed(42, &[0, 1, 0]);
        let c = mix_seed(42, &[0, 1, 1]);
        let d = mix_seed(43, &[0, 1, 0]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn builtin_models_certify_clean() {
        for name in ["leroux", "bricklayer"] {
            let model = builtin_model(name).unwrap();
            let report = run_certification(&model, name).unwrap();
            assert!(report.all_passed, "{name}: {report:?}");
            assert!(report.onsager_residual < RESIDUAL_THRESHOLD);
            assert!(report.grid_size > 100);
        }
    }

    #[test]
    fn certification_flags_rate_cycle_violation_twice() {
        // Condition (D) fails AND the Onsager residual blows past the
        // threshold: the two detection routes cross-confirm.
        let m = crate::model::SpinModel::new(
            vec!["0-".into(), "0+".into(), "1-".into(), "1+".into()],
            2,
            vec![vec![-1, 0], vec![1, 0], vec![-1, 1], vec![1, 1]],
            vec![0.25; 4],
            vec![((0, 2), (2, 0), 1.0), ((3, 1), (1, 3), 1.0)],
        )
        .unwrap();
        let report = run_certification(&m, "broken").unwrap();
        assert!(!report.all_passed);
        let cycle = report
            .conditions
            .iter()
            .find(|c| c.name.starts_with("rate cycle"))
            .unwrap();
        assert!(!cycle.passed);
        assert!(report.onsager_residual > 1e-3);
    }

    #[test]
    fn experiment_spec_validation() {
        let mut spec = ExperimentSpec {
            model: ModelRef::Builtin("leroux".into()),
            initial: "sine:0,0,0.4,0.1".into(),
            t: 0.1,
            sizes: vec![256, 1024],
            block_multiplier: None,
            replicas: 2,
            seed: 1,
            pde_cells: 256,
            cfl: 0.45,
            rows_csv: None,
            summary_json: None,
        };
        spec.validate().unwrap();
        spec.sizes = vec![1024, 256];
        assert!(spec.validate().is_err());
        spec.sizes = vec![256, 1024];
        spec.t = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn convergence_runs_are_deterministic() {
        let spec = ExperimentSpec {
            model: ModelRef::Builtin("leroux".into()),
            initial: "sine:0,0,0.4,0.1".into(),
            t: 0.05,
            sizes: vec![256, 512],
            block_multiplier: None,
            replicas: 2,
            seed: 7,
            pde_cells: 128,
            cfl: 0.45,
            rows_csv: None,
            summary_json: None,
        };
        let a = run_convergence(&spec, |_| {}).unwrap();
        let b = run_convergence(&spec, |_| {}).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn constant_data_mass_pairing_is_exact() {
        // <1, empirical> equals totals/N exactly, and matches the PDE mass
        // to rounding.
        let spec = ExperimentSpec {
            model: ModelRef::Builtin("leroux".into()),
            initial: "const:0,0.5".into(),
            t: 0.02,
            sizes: vec![512],
            block_multiplier: None,
            replicas: 2,
            seed: 3,
            pde_cells: 128,
            cfl: 0.45,
            rows_csv: None,
            summary_json: None,
        };
        let summary = run_convergence(&spec, |_| {}).unwrap();
        let row = &summary.rows[0];
        // The `one` pairings appear first; both components' evolution
        // conserves mass on both sides, so errors are statistical only at
        // the initial draw, then exactly preserved: bounded by 4 standard
        // errors of the initial sampling.
        for e in row.test_function_errors.iter().filter(|e| e.g == "one") {
            let se = (1.0 / 512.0f64).sqrt();
            assert!(
                e.error < 4.0 * se,
                "mass pairing error {} (component {})",
                e.error,
                e.component
            );
        }
    }

    #[test]
    fn constant_data_error_is_pure_sampling_noise() {
        // With constant initial data the PDE solution is constant, so the
        // L1 error is the block-averaging noise floor, which shrinks with N.
        let spec = ExperimentSpec {
            model: ModelRef::Builtin("leroux".into()),
            initial: "const:0,0.5".into(),
            t: 0.05,
            sizes: vec![1 << 10, 1 << 14],
            block_multiplier: None,
            replicas: 2,
            seed: 99,
            pde_cells: 128,
            cfl: 0.45,
            rows_csv: None,
            summary_json: None,
        };
        let summary = run_convergence(&spec, |_| {}).unwrap();
        for k in 0..2 {
            assert!(
                summary.rows[1].l1_error[k] < summary.rows[0].l1_error[k],
                "component {k}: {:?} vs {:?}",
                summary.rows[1].l1_error,
                summary.rows[0].l1_error
            );
        }
    }

    #[test]
    fn three_charge_exchange_model_certifies() {
        // n-genericity beyond the built-ins: four states carrying three
        // independent charges, exchange dynamics with a telescoping
        // asymmetry so the cyclic identity holds.
        let v = [0.0, 0.2, 0.4, 0.6];
        let mut rates = Vec::new();
        for i in 0..4usize {
            for j in 0..4usize {
                if i != j {
                    rates.push(((i, j), (j, i), 1.0 + v[i] - v[j]));
                }
            }
        }
        let m = crate::model::SpinModel::new(
            vec!["s0".into(), "s1".into(), "s2".into(), "s3".into()],
            3,
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![0, 0, 0]],
            vec![0.25; 4],
            rates,
        )
        .unwrap();
        let report = run_certification(&m, "three-charge exchange").unwrap();
        assert!(report.all_passed, "{report:?}");
        assert!(report.onsager_residual < RESIDUAL_THRESHOLD);
        assert!(report.speed_imag_residual_max < RESIDUAL_THRESHOLD);
    }

    #[test]
    fn post_shock_runs_are_refused() {
        let spec = ExperimentSpec {
            model: ModelRef::Builtin("leroux".into()),
            initial: "sine:0,0.25,0.4,0.2".into(),
            t: 3.0,
            sizes: vec![256],
            block_multiplier: None,
            replicas: 1,
            seed: 1,
            pde_cells: 256,
            cfl: 0.45,
            rows_csv: None,
            summary_json: None,
        };
        match run_convergence(&spec, |_| {}) {
            Err(HarnessError::PostShock { .. }) => {}
            other => panic!("expected post-shock refusal, got {other:?}"),
        }
    }
}
