//! First-order finite-volume solver for `d_t u + d_x Phi(u) = 0` on the
//! unit torus, with the Rusanov (local Lax-Friedrichs) numerical flux
//!
//! ```text
//! F_{j+1/2} = (Phi(u_j) + Phi(u_{j+1}))/2 - a_{j+1/2} (u_{j+1} - u_j)/2
//! ```
//!
//! where `a_{j+1/2}` is the larger of the two local maximal characteristic
//! speeds. The scheme is conservative (interface fluxes telescope on the
//! periodic grid, so componentwise cell means are preserved to rounding),
//! monotone at first order, and deliberately diffusive: the consumers here
//! compare against pre-shock smooth solutions at modest resolution, where
//! robustness matters more than order.

mod diagnostics;
mod evaluator;
mod initial;

pub use diagnostics::{dual_field_consistency, entropy_functional, DiagnosticsError};
pub use evaluator::{BricklayerClosedFlux, FluxEvaluator, LerouxClosedFlux, ModelFlux};
pub use initial::ProfileSpec;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cell {cell} left the admissible domain at t = {time}")]
    InadmissibleState { cell: usize, time: f64 },
    #[error("non-finite flux or wave speed at cell {cell}, t = {time}")]
    NonFiniteFlux { cell: usize, time: f64 },
    #[error("flux evaluation failed: {detail}")]
    Evaluator { detail: String },
    #[error("profile needs at least 8 cells, got {0}")]
    TooFewCells(usize),
    #[error("profile has {values} values, expected n_cells x n_comp = {expected}")]
    BadShape { values: usize, expected: usize },
    #[error("component count mismatch: profile has {profile}, flux evaluator has {evaluator}")]
    ComponentMismatch { profile: usize, evaluator: usize },
    #[error("snapshot times must be strictly increasing and inside (t0, t_end]")]
    BadSnapshotTimes,
    #[error("cfl must lie in (0, 1), got {0}")]
    BadCfl(f64),
    #[error("initial-profile spec invalid: {0}")]
    BadProfileSpec(String),
}

/// Cell-averaged density fields on the periodic unit interval; cell `j`
/// covers `[j/n, (j+1)/n)` and stores `n_comp` components contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    n_comp: usize,
    values: Vec<f64>,
    pub time: f64,
}

impl Profile {
    /// Profiles as such only require one cell (block averaging legitimately
    /// produces a single cell at the coarsest block size); the solver
    /// additionally demands at least 8 cells.
    pub fn new(
        n_cells: usize,
        n_comp: usize,
        values: Vec<f64>,
        time: f64,
    ) -> Result<Self, SolverError> {
        if n_cells == 0 || n_comp == 0 {
            return Err(SolverError::TooFewCells(n_cells));
        }
        if values.len() != n_cells * n_comp {
            return Err(SolverError::BadShape {
                values: values.len(),
                expected: n_cells * n_comp,
            });
        }
        Ok(Profile {
            n_comp,
            values,
            time,
        })
    }

    /// Builds a profile by evaluating `f` at cell midpoints.
    pub fn from_fn(
        n_cells: usize,
        n_comp: usize,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self, SolverError> {
        let mut values = Vec::with_capacity(n_cells * n_comp);
        for j in 0..n_cells {
            let x = (j as f64 + 0.5) / n_cells as f64;
            let v = f(x);
            assert_eq!(v.len(), n_comp);
            values.extend(v);
        }
        Profile::new(n_cells, n_comp, values, 0.0)
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.n_comp
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells() as f64
    }

    pub fn cell(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_comp..(j + 1) * self.n_comp]
    }

    pub fn cell_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.n_comp..(j + 1) * self.n_comp]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Midpoint of cell `j`.
    pub fn x_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    /// Componentwise cell means, compensated summation so the conservation
    /// diagnostic is not polluted by accumulation error.
    pub fn means(&self) -> Vec<f64> {
        let n = self.n_cells();
        (0..self.n_comp)
            .map(|k| kahan_sum((0..n).map(|j| self.cell(j)[k])) / n as f64)
            .collect()
    }

    /// L1 distance to another profile on the same grid, per component.
    pub fn l1_distance(&self, other: &Profile) -> Vec<f64> {
        assert_eq!(self.n_cells(), other.n_cells());
        assert_eq!(self.n_comp, other.n_comp);
        let n = self.n_cells();
        (0..self.n_comp)
            .map(|k| {
                kahan_sum((0..n).map(|j| (self.cell(j)[k] - other.cell(j)[k]).abs())) / n as f64
            })
            .collect()
    }

    /// Conservative restriction onto a coarser grid of `cells` cells by
    /// overlap-weighted averaging; grids need not be nested.
    pub fn restrict_to(&self, cells: usize) -> Profile {
        let fine = self.n_cells();
        let mut values = vec![0.0; cells * self.n_comp];
        for j in 0..fine {
            let lo = j as f64 / fine as f64;
            let hi = (j + 1) as f64 / fine as f64;
            let mut k = (lo * cells as f64).floor() as usize;
            loop {
                let cell_lo = k as f64 / cells as f64;
                let cell_hi = (k + 1) as f64 / cells as f64;
                let overlap = hi.min(cell_hi) - lo.max(cell_lo);
                if overlap > 0.0 {
                    let idx = (k % cells) * self.n_comp;
                    for c in 0..self.n_comp {
                        values[idx + c] += overlap * cells as f64 * self.cell(j)[c];
                    }
                }
                if cell_hi >= hi - 1e-15 {
                    break;
                }
                k += 1;
            }
        }
        Profile {
            n_comp: self.n_comp,
            values,
            time: self.time,
        }
    }
}

/// Time-ordered solver output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Profile>,
    /// `(time, integral of S - S_ref)` per snapshot; filled by
    /// [`Trajectory::attach_entropy_series`].
    pub entropy_series: Vec<(f64, f64)>,
}

impl Trajectory {
    /// Computes the entropy functional of every snapshot against a
    /// reference density.
    pub fn attach_entropy_series(
        &mut self,
        model: &crate::model::SpinModel,
        reference_u: &[f64],
    ) -> Result<(), DiagnosticsError> {
        self.entropy_series = self
            .snapshots
            .iter()
            .map(|p| Ok((p.time, entropy_functional(model, p, reference_u)?)))
            .collect::<Result<_, DiagnosticsError>>()?;
        Ok(())
    }
}

/// Integrates the conservation law from `initial` to `t_end`, recording the
/// state at the requested snapshot times (which must be strictly increasing
/// and end at or before `t_end`). The initial state is always the first
/// snapshot. Time steps satisfy `dt = cfl dx / max_j a_j` and are clipped so
/// that snapshot times and the horizon are hit exactly.
pub fn solve(
    flux: &dyn FluxEvaluator,
    initial: &Profile,
    t_end: f64,
    cfl: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory, SolverError> {
    if !(0.0 < cfl && cfl < 1.0) {
        return Err(SolverError::BadCfl(cfl));
    }
    if initial.n_cells() < 8 {
        return Err(SolverError::TooFewCells(initial.n_cells()));
    }
    if initial.n_comp() != flux.n_comp() {
        return Err(SolverError::ComponentMismatch {
            profile: initial.n_comp(),
            evaluator: flux.n_comp(),
        });
    }
    let t0 = initial.time;
    let mut last = t0;
    for &t in snapshot_times {
        if t <= last || t > t_end + 1e-12 {
            return Err(SolverError::BadSnapshotTimes);
        }
        last = t;
    }

    let n = initial.n_cells();
    let nc = initial.n_comp();
    let dx = initial.dx();
    let mut state = initial.clone();
    for j in 0..n {
        if !flux.admissible(state.cell(j)) {
            return Err(SolverError::InadmissibleState { cell: j, time: t0 });
        }
    }

    let mut snapshots = vec![state.clone()];
    let mut pending = snapshot_times.iter().copied().peekable();

    let mut phi = vec![0.0; n * nc];
    let mut speed = vec![0.0; n];
    let mut interface = vec![0.0; n * nc];
    let mut t = t0;
    let time_eps = 1e-12 * t_end.abs().max(1.0);

    while t < t_end - time_eps {
        // Cell fluxes and local speeds in one pass.
        let mut alpha: f64 = 0.0;
        for j in 0..n {
            let s = flux.flux_and_speed(state.cell(j), &mut phi[j * nc..(j + 1) * nc])?;
            if !s.is_finite() || phi[j * nc..(j + 1) * nc].iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteFlux { cell: j, time: t });
            }
            speed[j] = s;
            alpha = alpha.max(s);
        }

        let mut dt = if alpha > 0.0 {
            cfl * dx / alpha
        } else {
            t_end - t
        };
        if let Some(&ts) = pending.peek() {
            dt = dt.min(ts - t);
        }
        // Snapshot clamping can leave a rounding-scale negative remainder;
        // a zero step is an identity update and the snapshot check advances.
        dt = dt.min(t_end - t).max(0.0);

        // Rusanov interface fluxes; interface j sits between cells j and j+1.
        for j in 0..n {
            let jn = (j + 1) % n;
            let a = speed[j].max(speed[jn]);
            for c in 0..nc {
                interface[j * nc + c] = 0.5 * (phi[j * nc + c] + phi[jn * nc + c])
                    - 0.5 * a * (state.cell(jn)[c] - state.cell(j)[c]);
            }
        }
        let lambda = dt / dx;
        for j in 0..n {
            let jp = (j + n - 1) % n;
            for c in 0..nc {
                state.cell_mut(j)[c] -= lambda * (interface[j * nc + c] - interface[jp * nc + c]);
            }
        }
        t += dt;
        state.time = t;
        for j in 0..n {
            let cell = state.cell(j);
            if cell.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteFlux { cell: j, time: t });
            }
            if !flux.admissible(cell) {
                return Err(SolverError::InadmissibleState { cell: j, time: t });
            }
        }
        if let Some(&ts) = pending.peek() {
            if (t - ts).abs() <= time_eps {
                state.time = ts;
                snapshots.push(state.clone());
                pending.next();
            }
        }
    }
    // A trailing snapshot exactly at the horizon, if requested and not yet
    // emitted (the loop exits on reaching t_end).
    if let Some(&ts) = pending.peek() {
        if (ts - t_end).abs() <= time_eps && snapshots.last().map(|p| p.time) != Some(ts) {
            state.time = ts;
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        entropy_series: Vec::new(),
    })
}

/// Compensated (Kahan) summation.
pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::leroux_model;

    fn sine_profile(cells: usize) -> Profile {
        let spec = ProfileSpec::parse("sine:0,0,0.4,0.1", 2).unwrap();
        spec.profile(cells).unwrap()
    }

    fn snapshot_times(t_end: f64, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|k| t_end * k as f64 / count as f64)
            .collect()
    }

    #[test]
    fn constant_data_is_exactly_stationary() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let flux = ModelFlux::new(&m);
        let initial = Profile::from_fn(64, 2, |_| vec![0.1, 0.4]).unwrap();
        let traj = solve(&flux, &initial, 0.25, 0.45, &snapshot_times(0.25, 5)).unwrap();
        let last = traj.snapshots.last().unwrap();
        for j in 0..64 {
            assert_eq!(last.cell(j), initial.cell(j));
        }
    }

    #[test]
    fn cell_means_are_conserved() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let flux = ModelFlux::new(&m);
        let initial = sine_profile(256);
        let before = initial.means();
        let traj = solve(&flux, &initial, 0.3, 0.45, &snapshot_times(0.3, 3)).unwrap();
        let after = traj.snapshots.last().unwrap().means();
        for (b, a) in before.iter().zip(&after) {
            assert!((b - a).abs() < 1e-13, "mean drift {b} -> {a}");
        }
    }

    #[test]
    fn closed_form_and_exact_summation_fluxes_agree() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let exact = ModelFlux::new(&m);
        let closed = LerouxClosedFlux;
        let initial = sine_profile(128);
        let times = snapshot_times(0.2, 2);
        let a = solve(&exact, &initial, 0.2, 0.45, &times).unwrap();
        let b = solve(&closed, &initial, 0.2, 0.45, &times).unwrap();
        let diff = a
            .snapshots
            .last()
            .unwrap()
            .l1_distance(b.snapshots.last().unwrap());
        assert!(diff.iter().all(|&d| d < 1e-9), "routes disagree: {diff:?}");
    }

    #[test]
    fn first_order_self_convergence() {
        let closed = LerouxClosedFlux;
        let solve_at = |cells: usize| {
            let initial = sine_profile(cells);
            solve(&closed, &initial, 0.2, 0.45, &[0.2])
                .unwrap()
                .snapshots
                .pop()
                .unwrap()
        };
        let coarse = solve_at(512);
        let mid = solve_at(1024);
        let fine = solve_at(2048);
        let err_coarse = coarse.l1_distance(&mid.restrict_to(512))[1];
        let err_mid = mid.l1_distance(&fine.restrict_to(1024))[1];
        let factor = err_coarse / err_mid;
        assert!(factor >= 1.7, "self-convergence factor {factor}");
    }

    #[test]
    fn translation_equivariance_is_exact() {
        let closed = LerouxClosedFlux;
        let initial = sine_profile(128);
        let k = 37;
        let shifted = Profile::new(
            128,
            2,
            (0..128)
                .flat_map(|j| initial.cell((j + 128 - k) % 128).to_vec())
                .collect(),
            0.0,
        )
        .unwrap();
        let times = [0.15];
        let base = solve(&closed, &initial, 0.15, 0.45, &times).unwrap();
        let moved = solve(&closed, &shifted, 0.15, 0.45, &times).unwrap();
        let a = base.snapshots.last().unwrap();
        let b = moved.snapshots.last().unwrap();
        for j in 0..128 {
            assert_eq!(a.cell(j), b.cell((j + k) % 128), "cell {j}");
        }
    }

    #[test]
    fn left_right_reflection_symmetry() {
        // Evolving the reflected data (rho(-x), -u(-x)) must give the
        // reflection of the evolved data, to machine precision.
        let closed = LerouxClosedFlux;
        let initial = sine_profile(128);
        let reflect = |p: &Profile| {
            Profile::new(
                128,
                2,
                (0..128)
                    .flat_map(|j| {
                        let src = p.cell(127 - j);
                        vec![-src[0], src[1]]
                    })
                    .collect(),
                0.0,
            )
            .unwrap()
        };
        let reflected = reflect(&initial);
        let a = solve(&closed, &initial, 0.18, 0.45, &[0.18]).unwrap();
        let b = solve(&closed, &reflected, 0.18, 0.45, &[0.18]).unwrap();
        let fwd = a.snapshots.last().unwrap();
        let mirrored = b.snapshots.last().unwrap();
        for j in 0..128 {
            let m = mirrored.cell(127 - j);
            assert_eq!(fwd.cell(j)[0], -m[0], "u at cell {j}");
            assert_eq!(fwd.cell(j)[1], m[1], "rho at cell {j}");
        }
    }

    #[test]
    fn inadmissible_initial_data_is_rejected() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let flux = ModelFlux::new(&m);
        let initial = Profile::from_fn(16, 2, |_| vec![0.8, 0.5]).unwrap();
        assert!(matches!(
            solve(&flux, &initial, 0.1, 0.45, &[0.1]),
            Err(SolverError::InadmissibleState { cell: 0, .. })
        ));
    }

    #[test]
    fn restriction_preserves_means() {
        let p = sine_profile(96);
        let r = p.restrict_to(16);
        let pm = p.means();
        let rm = r.means();
        for (a, b) in pm.iter().zip(&rm) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
