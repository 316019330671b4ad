//! Flux evaluators consumed by the solver.
//!
//! The solver is agnostic about where `Phi` comes from: the exact-summation
//! route through a model and the closed-form built-in fluxes implement the
//! same trait, and their agreement on identical initial data is itself a
//! test.

use super::SolverError;
use crate::domain::hull_contains;
use crate::flux::macro_flux;
use crate::model::SpinModel;

pub trait FluxEvaluator: Sync {
    fn n_comp(&self) -> usize;

    /// Writes `Phi(u)` into `out` and returns the local maximal
    /// characteristic speed at `u`.
    fn flux_and_speed(&self, u: &[f64], out: &mut [f64]) -> Result<f64, SolverError>;

    /// Whether a cell value is inside the evaluator's admissible domain.
    fn admissible(&self, u: &[f64]) -> bool;
}

/// Exact-summation fluxes of a spin model; the speed is the largest
/// characteristic speed from the certified flux Jacobian.
pub struct ModelFlux<'a> {
    model: &'a SpinModel,
    floor: f64,
}

impl<'a> ModelFlux<'a> {
    pub fn new(model: &'a SpinModel) -> Self {
        // Cells may wander close to (but not onto) the hull boundary.
        ModelFlux { model, floor: 1e-9 }
    }

    pub fn model(&self) -> &SpinModel {
        self.model
    }
}

impl FluxEvaluator for ModelFlux<'_> {
    fn n_comp(&self) -> usize {
        self.model.n_cons()
    }

    fn flux_and_speed(&self, u: &[f64], out: &mut [f64]) -> Result<f64, SolverError> {
        let report = macro_flux(self.model, u).map_err(|e| SolverError::Evaluator {
            detail: e.to_string(),
        })?;
        for (o, &p) in out.iter_mut().zip(report.phi.iter()) {
            *o = p;
        }
        Ok(report
            .speeds
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s.abs())))
    }

    fn admissible(&self, u: &[f64]) -> bool {
        hull_contains(self.model, u, self.floor)
    }
}

/// Closed-form fluxes of the three-state exchange model in the component
/// order (spin u, zero-density rho): `Phi = (rho + u^2, rho u)` with
/// Jacobian `[[2u, 1], [rho, u]]` and speeds `(3u +- sqrt(u^2 + 4 rho))/2`.
pub struct LerouxClosedFlux;

impl FluxEvaluator for LerouxClosedFlux {
    fn n_comp(&self) -> usize {
        2
    }

    fn flux_and_speed(&self, u: &[f64], out: &mut [f64]) -> Result<f64, SolverError> {
        let (spin, rho) = (u[0], u[1]);
        out[0] = rho + spin * spin;
        out[1] = rho * spin;
        let disc = (spin * spin + 4.0 * rho).max(0.0).sqrt();
        let s1 = (3.0 * spin + disc) / 2.0;
        let s2 = (3.0 * spin - disc) / 2.0;
        Ok(s1.abs().max(s2.abs()))
    }

    fn admissible(&self, u: &[f64]) -> bool {
        let (spin, rho) = (u[0], u[1]);
        rho > 0.0 && rho + spin.abs() < 1.0
    }
}

/// Closed-form fluxes of the bricklayer family in the component order
/// (slope u, occupation rho):
/// `Phi = ((pq rho - gamma pq)(1 - u^2), pq rho (1 - rho) u)` with
/// `pq = p - q`.
pub struct BricklayerClosedFlux {
    pq: f64,
    gamma: f64,
}

impl BricklayerClosedFlux {
    pub fn new(pq: f64, gamma: f64) -> Self {
        BricklayerClosedFlux { pq, gamma }
    }

    /// The built-in parameter sets have `p - q = 1`, `gamma = 1/2`.
    pub fn builtin() -> Self {
        BricklayerClosedFlux {
            pq: 1.0,
            gamma: 0.5,
        }
    }
}

impl FluxEvaluator for BricklayerClosedFlux {
    fn n_comp(&self) -> usize {
        2
    }

    fn flux_and_speed(&self, u: &[f64], out: &mut [f64]) -> Result<f64, SolverError> {
        let (z, rho) = (u[0], u[1]);
        let drift = self.pq * (rho - self.gamma);
        out[0] = drift * (1.0 - z * z);
        out[1] = self.pq * rho * (1.0 - rho) * z;
        // Jacobian in (z, rho): [[-2 z drift, pq (1 - z^2)],
        //                        [pq rho(1-rho), pq (1 - 2 rho) z]]
        let a = -2.0 * z * drift;
        let b = self.pq * (1.0 - z * z);
        let c = self.pq * rho * (1.0 - rho);
        let d = self.pq * (1.0 - 2.0 * rho) * z;
        let tr = a + d;
        let disc = (tr * tr - 4.0 * (a * d - b * c)).max(0.0).sqrt();
        let s1 = (tr + disc) / 2.0;
        let s2 = (tr - disc) / 2.0;
        Ok(s1.abs().max(s2.abs()))
    }

    fn admissible(&self, u: &[f64]) -> bool {
        let (z, rho) = (u[0], u[1]);
        z.abs() < 1.0 && rho > 0.0 && rho < 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::certification_grid;
    use crate::model::{bricklayer_model, leroux_model, BricklayerParams};

    #[test]
    fn model_and_closed_form_speeds_agree_for_leroux() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let exact = ModelFlux::new(&m);
        let closed = LerouxClosedFlux;
        let mut fa = [0.0; 2];
        let mut fb = [0.0; 2];
        for u in certification_grid(&m, 9) {
            let sa = exact.flux_and_speed(&u, &mut fa).unwrap();
            let sb = closed.flux_and_speed(&u, &mut fb).unwrap();
            assert!((sa - sb).abs() < 1e-9, "speeds at {u:?}: {sa} vs {sb}");
            // Fluxes agree up to the additive constant -1 in the spin
            // component and exactly in the occupation component.
            assert!(((fa[0] + 1.0) - fb[0]).abs() < 1e-11, "u={u:?}");
            assert!((fa[1] - fb[1]).abs() < 1e-11, "u={u:?}");
        }
    }

    #[test]
    fn model_and_closed_form_speeds_agree_for_bricklayer() {
        let m = bricklayer_model(&BricklayerParams::ergodic()).unwrap();
        let exact = ModelFlux::new(&m);
        let closed = BricklayerClosedFlux::builtin();
        let mut fa = [0.0; 2];
        let mut fb = [0.0; 2];
        for u in certification_grid(&m, 9) {
            let sa = exact.flux_and_speed(&u, &mut fa).unwrap();
            let sb = closed.flux_and_speed(&u, &mut fb).unwrap();
            assert!((sa - sb).abs() < 1e-9, "speeds at {u:?}: {sa} vs {sb}");
            assert!((fa[0] - fb[0]).abs() < 1e-11, "u={u:?}");
            assert!((fa[1] - fb[1]).abs() < 1e-11, "u={u:?}");
        }
    }
}
