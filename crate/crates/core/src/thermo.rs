//! Canonical single-site measures and the thermodynamic functions built
//! from them.
//!
//! For a chemical-potential vector `theta` the tilted single-site measure is
//! `pi_theta(w) = pi(w) exp(theta . xi(w) - G(theta))` with the log
//! partition function `G(theta) = log sum_w exp(theta . xi(w)) pi(w)`. Its
//! gradient is the density vector `u(theta)` and its Hessian the charge
//! covariance, which is strictly positive definite, so `theta -> u` is
//! invertible on the open hull of the charge vectors. The convex conjugate
//! `S(u) = theta . u - G(theta)` is the equilibrium entropy; its Hessian is
//! the inverse covariance.
//!
//! Everything here is an exact finite sum over the local state set; there
//! is no sampling in this module.

use crate::domain::{hull_contains, DOMAIN_MARGIN};
use crate::model::SpinModel;
use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("chemical potential must be finite, got {0:?}")]
    NonFiniteTheta(Vec<f64>),
    #[error("density {0:?} lies outside the admissible domain")]
    OutsideDomain(Vec<f64>),
    #[error("Newton inversion failed to converge (residual {residual:e}); this indicates a bug for interior targets")]
    NoConvergence { residual: f64 },
    #[error("covariance matrix is numerically singular")]
    SingularCovariance,
}

/// Canonical measure data at a chemical-potential point.
#[derive(Debug, Clone)]
pub struct CanonicalPoint {
    pub theta: DVector<f64>,
    /// Log partition function `G(theta)`; equals 0 at `theta = 0`.
    pub g_value: f64,
    /// Charge expectations under the tilted measure.
    pub densities: DVector<f64>,
    /// Charge covariance = Hessian of `G`; symmetric positive definite.
    pub covariance: DMatrix<f64>,
    pub single_site_weights: Vec<f64>,
}

/// Entropy data at a density point.
#[derive(Debug, Clone)]
pub struct DensityPoint {
    pub u: DVector<f64>,
    /// Chemical potentials `theta(u)`, the entropy gradient.
    pub theta: DVector<f64>,
    /// `S(u) = theta . u - G(theta)`, zero exactly at the base densities.
    pub entropy: f64,
    /// Entropy Hessian = inverse covariance.
    pub hessian: DMatrix<f64>,
}

/// Evaluates the canonical measure, densities and covariance at `theta`
/// by exact summation over S, with log-sum-exp shifting so large `|theta|`
/// near the domain boundary cannot overflow.
pub fn canonical_point(model: &SpinModel, theta: &[f64]) -> Result<CanonicalPoint, ThermoError> {
    let n = model.n_cons();
    assert_eq!(theta.len(), n);
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(ThermoError::NonFiniteTheta(theta.to_vec()));
    }
    let s = model.n_states();
    let pi = model.base_measure();

    let mut exponents = Vec::with_capacity(s);
    let mut shift = f64::NEG_INFINITY;
    for (w, &p) in pi.iter().enumerate() {
        let dot: f64 = model
            .xi(w)
            .iter()
            .zip(theta)
            .map(|(&x, &t)| x as f64 * t)
            .sum();
        let e = dot + p.ln();
        shift = shift.max(e);
        exponents.push(e);
    }
    let z_shifted: f64 = exponents.iter().map(|&e| (e - shift).exp()).sum();
    let g_value = shift + z_shifted.ln();
    let weights: Vec<f64> = exponents.iter().map(|&e| (e - g_value).exp()).collect();

    let mut densities = DVector::zeros(n);
    for (w, &weight) in weights.iter().enumerate() {
        for k in 0..n {
            densities[k] += model.xi(w)[k] as f64 * weight;
        }
    }
    let mut covariance = DMatrix::zeros(n, n);
    for (w, &weight) in weights.iter().enumerate() {
        for i in 0..n {
            let di = model.xi(w)[i] as f64 - densities[i];
            for j in 0..=i {
                covariance[(i, j)] += weight * di * (model.xi(w)[j] as f64 - densities[j]);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            covariance[(i, j)] = covariance[(j, i)];
        }
    }
    Ok(CanonicalPoint {
        theta: DVector::from_column_slice(theta),
        g_value,
        densities,
        covariance,
        single_site_weights: weights,
    })
}

/// Largest residual allowed by the Newton inversion.
pub const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Inverts the density map: finds `theta` with `densities(theta) = u`.
///
/// Newton iteration from `theta = 0` with the exact covariance as Jacobian
/// and step halving whenever the residual norm fails to decrease; `G` is
/// smooth and strictly convex, so this converges for every interior target.
/// The admissibility precheck uses a weight floor of [`DOMAIN_MARGIN`].
pub fn invert_densities(model: &SpinModel, u_target: &[f64]) -> Result<DensityPoint, ThermoError> {
    invert_densities_with_margin(model, u_target, DOMAIN_MARGIN)
}

/// Same as [`invert_densities`] with an explicit hull margin.
pub fn invert_densities_with_margin(
    model: &SpinModel,
    u_target: &[f64],
    margin: f64,
) -> Result<DensityPoint, ThermoError> {
    let n = model.n_cons();
    assert_eq!(u_target.len(), n);
    if u_target.iter().any(|v| !v.is_finite())
        || !hull_contains(model, u_target, margin.min(0.5 / model.n_states() as f64))
    {
        return Err(ThermoError::OutsideDomain(u_target.to_vec()));
    }

    let target = DVector::from_column_slice(u_target);
    let mut theta = DVector::zeros(n);
    let mut point = canonical_point(model, theta.as_slice())?;
    let mut residual = &point.densities - &target;
    let mut res_norm = residual.amax();
    for _ in 0..NEWTON_MAX_ITER {
        if res_norm < NEWTON_TOL {
            let entropy = theta.dot(&target) - point.g_value;
            let hessian = spd_inverse(&point.covariance)?;
            return Ok(DensityPoint {
                u: target,
                theta,
                entropy,
                hessian,
            });
        }
        let chol =
            Cholesky::new(point.covariance.clone()).ok_or(ThermoError::SingularCovariance)?;
        let full_step = chol.solve(&residual);
        // Backtracking on the residual norm.
        let mut scale = 1.0;
        loop {
            let candidate = &theta - &full_step * scale;
            let cand_point = canonical_point(model, candidate.as_slice())?;
            let cand_residual = &cand_point.densities - &target;
            let cand_norm = cand_residual.amax();
            if cand_norm < res_norm || scale < 1e-8 {
                theta = candidate;
                point = cand_point;
                residual = cand_residual;
                res_norm = cand_norm;
                break;
            }
            scale *= 0.5;
        }
    }
    Err(ThermoError::NoConvergence { residual: res_norm })
}

/// Entropy Hessian `S''(u)`: the inverse of the charge covariance at
/// `theta(u)`, computed by a symmetric positive-definite solve and
/// symmetrised against rounding.
pub fn entropy_hessian(model: &SpinModel, u: &[f64]) -> Result<DMatrix<f64>, ThermoError> {
    Ok(invert_densities(model, u)?.hessian)
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, ThermoError> {
    let inv = Cholesky::new(m.clone())
        .ok_or(ThermoError::SingularCovariance)?
        .inverse();
    // Force exact symmetry.
    Ok(0.5 * (&inv + inv.transpose()))
}
