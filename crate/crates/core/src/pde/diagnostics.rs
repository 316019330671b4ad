//! Entropy and dual-field diagnostics on solver output.
//!
//! The entropy functional `integral of S(u(t,x)) - S(u_ref) dx` is constant
//! in time while the solution stays smooth and starts to decrease when the
//! first shock forms, which makes it the practical smoothness monitor for
//! everything downstream.
//!
//! The dual-field identity transports the chemical potentials instead of
//! the densities: along smooth solutions `d_t theta = -D(u)^T d_x theta`.
//! Its discrete defect, measured with central differences on the snapshot
//! grid, vanishes at the consistency order of the scheme under space-time
//! refinement.

use super::{Profile, Trajectory};
use crate::flux::{macro_flux, FluxError};
use crate::model::SpinModel;
use crate::thermo::{invert_densities, ThermoError};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error("need at least {min} snapshots, got {got}")]
    TooFewSnapshots { min: usize, got: usize },
    #[error("snapshot times must be strictly increasing")]
    UnorderedSnapshots,
}

/// `dx * sum_j (S(u_j) - S(u_ref))`.
pub fn entropy_functional(
    model: &SpinModel,
    profile: &Profile,
    reference_u: &[f64],
) -> Result<f64, DiagnosticsError> {
    let s_ref = invert_densities(model, reference_u)?.entropy;
    let n = profile.n_cells();
    let mut entropies = Vec::with_capacity(n);
    for j in 0..n {
        entropies.push(invert_densities(model, profile.cell(j))?.entropy - s_ref);
    }
    Ok(super::kahan_sum(entropies.into_iter()) * profile.dx())
}

/// Largest defect of the dual-field transport identity over all interior
/// snapshots, cells and components.
pub fn dual_field_consistency(
    model: &SpinModel,
    traj: &Trajectory,
) -> Result<f64, DiagnosticsError> {
    let m = traj.snapshots.len();
    if m < 3 {
        return Err(DiagnosticsError::TooFewSnapshots { min: 3, got: m });
    }
    for pair in traj.snapshots.windows(2) {
        if pair[1].time <= pair[0].time {
            return Err(DiagnosticsError::UnorderedSnapshots);
        }
    }
    let n_cells = traj.snapshots[0].n_cells();
    let nc = traj.snapshots[0].n_comp();
    let dx = traj.snapshots[0].dx();

    // Chemical-potential fields per snapshot.
    let mut theta: Vec<Vec<DVector<f64>>> = Vec::with_capacity(m);
    for snap in &traj.snapshots {
        let mut row = Vec::with_capacity(n_cells);
        for j in 0..n_cells {
            row.push(invert_densities(model, snap.cell(j))?.theta);
        }
        theta.push(row);
    }

    let mut worst: f64 = 0.0;
    for t in 1..(m - 1) {
        let dt2 = traj.snapshots[t + 1].time - traj.snapshots[t - 1].time;
        for j in 0..n_cells {
            let jp = (j + n_cells - 1) % n_cells;
            let jn = (j + 1) % n_cells;
            let dtheta_dt = (&theta[t + 1][j] - &theta[t - 1][j]) / dt2;
            let dtheta_dx = (&theta[t][jn] - &theta[t][jp]) / (2.0 * dx);
            let d = macro_flux(model, traj.snapshots[t].cell(j))?.jacobian_u;
            let defect = &dtheta_dt + d.transpose() * &dtheta_dx;
            for k in 0..nc {
                worst = worst.max(defect[k].abs());
            }
        }
    }
    Ok(worst)
}
