//! Microscopic and macroscopic fluxes of the conserved quantities, the flux
//! Jacobian, and numeric certification of the structural identities that
//! make the hydrodynamic system hyperbolic.
//!
//! The instantaneous current of charge `k` across a bond with pair state
//! `(w1, w2)` is
//!
//! ```text
//! phi_k(w1, w2) = sum_{w1', w2'} r(w1,w2; w1',w2') (xi_k(w2') - xi_k(w2))
//! ```
//!
//! (equivalently with `xi_k(w1) - xi_k(w1')`; the two agree exactly when
//! pairwise conservation holds). The macroscopic flux is its expectation
//! `Phi(u) = E_u[phi]` under the product of two tilted single-site
//! measures, evaluated by exact summation. Because the tilt enters through
//! `exp(theta . xi)`, the theta-derivative of `Phi` is again an exact sum,
//! and the density Jacobian follows by the chain rule
//! `D(u) = dPhi/dtheta . S''(u)` with no finite differences anywhere.
//!
//! Three residuals certify the structural identities on a model:
//!
//! - `onsager_residual`: asymmetry of `dPhi/dtheta`, which vanishes exactly
//!   when the flux derives from a scalar potential in the chemical
//!   potentials;
//! - `sym_residual` / `lax_residual`: asymmetry of `S'' D`, whose vanishing
//!   is the compatibility equation making the entropy a Lax entropy;
//! - `speed_imag_residual`: imaginary mass of the eigenvalues of `D`, which
//!   must vanish for a hyperbolic system.

use crate::domain::GRID_MARGIN;
use crate::model::SpinModel;
use crate::thermo::{canonical_point, invert_densities, ThermoError};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluxError {
    #[error("the two flux forms disagree by {mismatch:e} on pair ({w1},{w2}); the model breaks pairwise conservation")]
    ConservationBroken {
        w1: String,
        w2: String,
        mismatch: f64,
    },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(
        "adaptive quadrature could not reach tolerance {tol:e} (best error estimate {estimate:e})"
    )]
    QuadratureFailure { tol: f64, estimate: f64 },
}

/// Flux data at one density point.
#[derive(Debug, Clone)]
pub struct FluxReport {
    pub u: Vec<f64>,
    /// Macroscopic flux vector `Phi(u)`.
    pub phi: DVector<f64>,
    /// `D(u) = dPhi/du`, computed as `jacobian_theta * S''(u)`.
    pub jacobian_u: DMatrix<f64>,
    /// `dPhi/dtheta`, symmetric exactly when the Onsager identity holds.
    pub jacobian_theta: DMatrix<f64>,
    /// `max_{i<j} |dPhi_i/dtheta_j - dPhi_j/dtheta_i|`.
    pub onsager_residual: f64,
    /// `max |S''D - (S''D)^T|`.
    pub sym_residual: f64,
    /// Defect of the Lax-entropy compatibility equations; identically the
    /// symmetry residual, kept as a named diagnostic.
    pub lax_residual: f64,
    /// Characteristic speeds: eigenvalues of `D` obtained through the
    /// symmetric similarity transform, sorted ascending.
    pub speeds: Vec<f64>,
    /// Largest imaginary part among the eigenvalues of `D` from a general
    /// (Schur) eigensolver; hyperbolicity means this vanishes.
    pub speed_imag_residual: f64,
}

/// Microscopic flux of all charges across a bond in pair state `(w1, w2)`,
/// by the first defining form. The second form is evaluated too and the two
/// must agree; a mismatch means the rate table violates conservation.
pub fn micro_flux(model: &SpinModel, w1: usize, w2: usize) -> Result<Vec<f64>, FluxError> {
    let n = model.n_cons();
    let mut incoming = vec![0.0; n]; // rate-weighted charge gain of site 2
    let mut outgoing = vec![0.0; n]; // rate-weighted charge loss of site 1
    for t in model.transitions_from((w1, w2)) {
        for k in 0..n {
            incoming[k] += t.rate * (model.xi(t.to.1)[k] - model.xi(w2)[k]) as f64;
            outgoing[k] += t.rate * (model.xi(w1)[k] - model.xi(t.to.0)[k]) as f64;
        }
    }
    for k in 0..n {
        let mismatch = (incoming[k] - outgoing[k]).abs();
        if mismatch > 1e-12 * (1.0 + incoming[k].abs().max(outgoing[k].abs())) {
            return Err(FluxError::ConservationBroken {
                w1: model.state_label(w1).to_string(),
                w2: model.state_label(w2).to_string(),
                mismatch,
            });
        }
    }
    Ok(incoming)
}

/// Macroscopic flux `Phi(theta)` as a function of the chemical potentials,
/// by exact summation over pair states. No density inversion involved.
pub fn phi_of_theta(model: &SpinModel, theta: &[f64]) -> Result<DVector<f64>, FluxError> {
    let point = canonical_point(model, theta)?;
    let table = micro_flux_table(model)?;
    Ok(phi_from_weights(model, &table, &point.single_site_weights))
}

/// Full flux report at an admissible density point: flux vector, both
/// Jacobians, the certification residuals and the characteristic speeds.
pub fn macro_flux(model: &SpinModel, u: &[f64]) -> Result<FluxReport, FluxError> {
    let n = model.n_cons();
    let s = model.n_states();
    let dp = invert_densities(model, u)?;
    let point = canonical_point(model, dp.theta.as_slice())?;
    let w = &point.single_site_weights;
    let table = micro_flux_table(model)?;

    let phi = phi_from_weights(model, &table, w);

    // d/dtheta_j of the product weight pi(w1) pi(w2) inserts the centred
    // factor (xi_j(w1) + xi_j(w2) - 2 u_j).
    let mut jacobian_theta = DMatrix::zeros(n, n);
    for w1 in 0..s {
        for w2 in 0..s {
            let mf = &table[w1 * s + w2];
            if mf.iter().all(|&v| v == 0.0) {
                continue;
            }
            let weight = w[w1] * w[w2];
            for j in 0..n {
                let centred = (model.xi(w1)[j] + model.xi(w2)[j]) as f64 - 2.0 * point.densities[j];
                let factor = weight * centred;
                for i in 0..n {
                    jacobian_theta[(i, j)] += mf[i] * factor;
                }
            }
        }
    }

    let jacobian_u = &jacobian_theta * &dp.hessian;

    let mut onsager_residual: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            onsager_residual =
                onsager_residual.max((jacobian_theta[(i, j)] - jacobian_theta[(j, i)]).abs());
        }
    }

    let compat = &dp.hessian * &jacobian_u; // S'' D
    let sym_residual = (&compat - compat.transpose()).amax();

    let speeds = speeds_by_symmetric_similarity(&dp.hessian, &compat)?;
    let speed_imag_residual = jacobian_u
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.im.abs()));

    Ok(FluxReport {
        u: u.to_vec(),
        phi,
        jacobian_u,
        jacobian_theta,
        onsager_residual,
        sym_residual,
        lax_residual: sym_residual,
        speeds,
        speed_imag_residual,
    })
}

/// Eigenvalues of `D` through the similarity
/// `(S'')^{1/2} D (S'')^{-1/2} = (S'')^{-1/2} (S''D) (S'')^{-1/2}`,
/// which is symmetric up to the certification residual and therefore has
/// real eigenvalues by construction.
fn speeds_by_symmetric_similarity(
    hessian: &DMatrix<f64>,
    compat: &DMatrix<f64>,
) -> Result<Vec<f64>, FluxError> {
    let eig = SymmetricEigen::new(hessian.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(FluxError::Thermo(ThermoError::SingularCovariance));
    }
    let n = hessian.nrows();
    let mut inv_sqrt = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = eig.eigenvectors.column(k);
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        for i in 0..n {
            for j in 0..n {
                inv_sqrt[(i, j)] += scale * col[i] * col[j];
            }
        }
    }
    let mut sym = &inv_sqrt * compat * &inv_sqrt;
    sym = 0.5 * (&sym + sym.transpose());
    let mut speeds: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    speeds.sort_by(f64::total_cmp);
    Ok(speeds)
}

/// Hyperbolicity view of the flux report: the characteristic speeds from
/// the symmetric similarity and the asymmetry of `S''D`, whose vanishing is
/// exactly what makes the speeds real.
pub fn hyperbolicity_report(model: &SpinModel, u: &[f64]) -> Result<(Vec<f64>, f64), FluxError> {
    let report = macro_flux(model, u)?;
    Ok((report.speeds, report.sym_residual))
}

/// Largest Onsager residual over a grid of admissible density points.
pub fn certify_onsager(model: &SpinModel, grid: &[Vec<f64>]) -> Result<f64, FluxError> {
    let mut worst: f64 = 0.0;
    for u in grid {
        worst = worst.max(macro_flux(model, u)?.onsager_residual);
    }
    Ok(worst)
}

/// Defect of the Lax-entropy compatibility equations at one point.
pub fn lax_entropy_residual(model: &SpinModel, u: &[f64]) -> Result<f64, FluxError> {
    Ok(macro_flux(model, u)?.lax_residual)
}

/// Error target of the flux-potential quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Flux potential `U(theta)`: the scalar function with `dU/dtheta = Phi`,
/// anchored at `U(0) = 0` and evaluated by adaptive Gauss-Legendre
/// quadrature of `Phi(t theta) . theta` along the straight segment from the
/// origin. Well defined up to the anchor exactly when the Onsager identity
/// holds.
pub fn flux_potential(model: &SpinModel, theta: &[f64]) -> Result<f64, FluxError> {
    let table = micro_flux_table(model)?;
    let theta_v = DVector::from_column_slice(theta);
    let integrand = |t: f64| -> Result<f64, FluxError> {
        let scaled: Vec<f64> = theta.iter().map(|&v| t * v).collect();
        let point = canonical_point(model, &scaled)?;
        let phi = phi_from_weights(model, &table, &point.single_site_weights);
        Ok(phi.dot(&theta_v))
    };
    integrate_adaptive(&integrand, 0.0, 1.0, QUADRATURE_TOL)
}

/// Line integral of `Phi . dtheta` along a polyline; used to check path
/// independence of the potential.
pub fn flux_potential_along(model: &SpinModel, path: &[Vec<f64>]) -> Result<f64, FluxError> {
    let table = micro_flux_table(model)?;
    let mut total = 0.0;
    for leg in path.windows(2) {
        let (from, to) = (&leg[0], &leg[1]);
        let dir: Vec<f64> = from.iter().zip(to).map(|(&a, &b)| b - a).collect();
        let dir_v = DVector::from_column_slice(&dir);
        let integrand = |t: f64| -> Result<f64, FluxError> {
            let at: Vec<f64> = from.iter().zip(&dir).map(|(&a, &d)| a + t * d).collect();
            let point = canonical_point(model, &at)?;
            let phi = phi_from_weights(model, &table, &point.single_site_weights);
            Ok(phi.dot(&dir_v))
        };
        total += integrate_adaptive(&integrand, 0.0, 1.0, QUADRATURE_TOL)?;
    }
    Ok(total)
}

/// Grid used by the certification operations: 30 points per axis inside the
/// margin-shrunk admissible hull.
pub fn certification_grid(model: &SpinModel, per_axis: usize) -> Vec<Vec<f64>> {
    crate::domain::admissible_grid(model, &vec![per_axis; model.n_cons()], GRID_MARGIN)
}

/// Microscopic flux of every ordered pair, flattened as `pair = w1 * |S| + w2`.
fn micro_flux_table(model: &SpinModel) -> Result<Vec<Vec<f64>>, FluxError> {
    let s = model.n_states();
    let mut table = Vec::with_capacity(s * s);
    for w1 in 0..s {
        for w2 in 0..s {
            table.push(micro_flux(model, w1, w2)?);
        }
    }
    Ok(table)
}

fn phi_from_weights(model: &SpinModel, table: &[Vec<f64>], weights: &[f64]) -> DVector<f64> {
    let n = model.n_cons();
    let s = model.n_states();
    let mut phi = DVector::zeros(n);
    for w1 in 0..s {
        for w2 in 0..s {
            let weight = weights[w1] * weights[w2];
            let mf = &table[w1 * s + w2];
            for k in 0..n {
                phi[k] += weight * mf[k];
            }
        }
    }
    phi
}

// 15-point Gauss-Legendre rule on [-1, 1].
const GL15_NODES: [f64; 8] = [
    0.0,
    0.2011940939974345,
    0.3941513470775634,
    0.5709721726085388,
    0.72441773136017,
    0.8482065834104272,
    0.937273392400706,
    0.9879925180204854,
];
const GL15_WEIGHTS: [f64; 8] = [
    0.2025782419255613,
    0.1984314853271116,
    0.1861610000155622,
    0.1662692058169939,
    0.1395706779261543,
    0.1071592204671719,
    0.0703660474881081,
    0.0307532419961173,
];

fn gl15<E>(f: &dyn Fn(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<f64, E> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = GL15_WEIGHTS[0] * f(mid)?;
    for k in 1..8 {
        let dx = half * GL15_NODES[k];
        acc += GL15_WEIGHTS[k] * (f(mid + dx)? + f(mid - dx)?);
    }
    Ok(acc * half)
}

/// Adaptive bisection with a 15-point Gauss-Legendre panel; accepts a panel
/// when splitting it changes the value by less than the local tolerance.
fn integrate_adaptive(
    f: &dyn Fn(f64) -> Result<f64, FluxError>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, FluxError> {
    fn recurse(
        f: &dyn Fn(f64) -> Result<f64, FluxError>,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64, FluxError> {
        let mid = 0.5 * (a + b);
        let left = gl15(f, a, mid)?;
        let right = gl15(f, mid, b)?;
        let refined = left + right;
        let estimate = (refined - whole).abs();
        if estimate <= tol || refined.abs() * 1e-15 > estimate {
            return Ok(refined);
        }
        if depth == 0 {
            return Err(FluxError::QuadratureFailure { tol, estimate });
        }
        Ok(recurse(f, a, mid, left, tol / 2.0, depth - 1)?
            + recurse(f, mid, b, right, tol / 2.0, depth - 1)?)
    }
    let whole = gl15(f, a, b)?;
    recurse(f, a, b, whole, tol, 40)
}
