//! Statistical checks of the simulator against the stationary theory:
//! canonical product measures stay canonical under the dynamics, and
//! equilibrium density fields show no spatial trend.

use latflux::kmc::{block_average, evolve, sample_local_equilibrium};
use latflux::model::leroux_model;
use latflux::pde::ProfileSpec;
use latflux::thermo::{canonical_point, invert_densities};

#[test]
fn leroux_equilibrium_marginals_are_stationary() {
    let model = leroux_model(1.0, 1.0).unwrap();
    let n = 4096usize;
    let (u, rho) = (0.1, 0.45);
    let profile = ProfileSpec::Const(vec![u, rho]);
    let cfg = sample_local_equilibrium(&model, &profile, n, 91).unwrap();
    let cfg = evolve(&model, cfg, 0.5, 92).unwrap();

    let dp = invert_densities(&model, &[u, rho]).unwrap();
    let weights = canonical_point(&model, dp.theta.as_slice())
        .unwrap()
        .single_site_weights;
    let mut counts = vec![0usize; model.n_states()];
    for &w in &cfg.omega {
        counts[w as usize] += 1;
    }
    for (w, &count) in counts.iter().enumerate() {
        let p = weights[w];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let freq = count as f64 / n as f64;
        assert!(
            (freq - p).abs() < 4.0 * se,
            "state {w}: frequency {freq} vs canonical {p} (se {se})"
        );
    }
}

#[test]
fn equilibrium_density_field_has_no_spatial_trend() {
    // Time-averaged block densities from a constant-profile run, regressed
    // against the cell index: the slope must be statistically zero.
    let model = leroux_model(1.0, 1.0).unwrap();
    let n = 8192usize;
    let block = 64usize;
    let profile = ProfileSpec::Const(vec![0.0, 0.5]);
    let mut cfg = sample_local_equilibrium(&model, &profile, n, 4242).unwrap();

    let slices = 12usize;
    let cells = n / block;
    let mut mean_field = vec![0.0f64; cells];
    for k in 0..slices {
        cfg = evolve(&model, cfg, 0.05, 9000 + k as u64).unwrap();
        let snap = block_average(&model, &cfg, block).unwrap();
        for (j, acc) in mean_field.iter_mut().enumerate() {
            *acc += snap.cell(j)[1] / slices as f64; // zeros density
        }
    }

    // Ordinary least squares of field vs centred index.
    let m = cells as f64;
    let xbar = (m - 1.0) / 2.0;
    let ybar = mean_field.iter().sum::<f64>() / m;
    let sxx: f64 = (0..cells).map(|j| (j as f64 - xbar).powi(2)).sum();
    let sxy: f64 = (0..cells)
        .map(|j| (j as f64 - xbar) * (mean_field[j] - ybar))
        .sum();
    let slope = sxy / sxx;
    let residual_var: f64 = (0..cells)
        .map(|j| {
            let fit = ybar + slope * (j as f64 - xbar);
            (mean_field[j] - fit).powi(2)
        })
        .sum::<f64>()
        / (m - 2.0);
    let slope_se = (residual_var / sxx).sqrt();
    assert!(
        slope.abs() < 4.0 * slope_se,
        "spatial trend detected: slope {slope} vs se {slope_se}"
    );
}
