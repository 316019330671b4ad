//! Admissible density domain.
//!
//! A density vector `u` is admissible when it can be written as a strictly
//! positive mixture of the per-state charge vectors: `u = sum_w lam_w xi(w)`
//! with `sum_w lam_w = 1` and `lam_w >= floor`. Boundary points correspond
//! to chemical potentials at infinity, so every consumer works on a
//! floor-shrunk interior. The test is a small phase-1 simplex feasibility
//! problem (n + 1 equality constraints, |S| variables).

use crate::model::SpinModel;

/// Weight floor used by the Newton inversion's domain precheck.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// Default shrink used when generating certification grids; residuals of
/// the flux identities degenerate at the domain boundary.
pub const GRID_MARGIN: f64 = 0.02;

/// True when `u = sum_w lam_w xi(w)` has a solution with `lam_w >= floor`
/// and `sum lam = 1`.
pub fn hull_contains(model: &SpinModel, u: &[f64], floor: f64) -> bool {
    assert_eq!(u.len(), model.n_cons());
    let m = model.n_states();
    let k = model.n_cons() + 1;
    // Substitute lam = floor + lam', lam' >= 0.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for w in 0..m {
        let mut col = Vec::with_capacity(k);
        col.push(1.0);
        col.extend(model.xi(w).iter().map(|&v| v as f64));
        cols.push(col);
    }
    let mut b = Vec::with_capacity(k);
    b.push(1.0 - floor * m as f64);
    for (i, &ui) in u.iter().enumerate() {
        let shift: f64 = (0..m).map(|w| model.xi(w)[i] as f64).sum::<f64>() * floor;
        b.push(ui - shift);
    }
    if b[0] < 0.0 {
        return false;
    }
    feasible(&cols, &b)
}

/// Phase-1 simplex: is `{A lam = b, lam >= 0}` nonempty? Columns of `A` are
/// given explicitly; artificial variables start in the basis and Bland's
/// rule guarantees termination.
fn feasible(cols: &[Vec<f64>], b: &[f64]) -> bool {
    let k = b.len();
    let m = cols.len();
    // Flip rows so the right-hand side is nonnegative.
    let mut sign = vec![1.0; k];
    let mut rhs: Vec<f64> = b.to_vec();
    for i in 0..k {
        if rhs[i] < 0.0 {
            sign[i] = -1.0;
            rhs[i] = -rhs[i];
        }
    }
    // Tableau over the m real columns plus k artificials.
    let width = m + k;
    let mut tab = vec![vec![0.0; width + 1]; k];
    for (i, row) in tab.iter_mut().enumerate() {
        for (j, col) in cols.iter().enumerate() {
            row[j] = sign[i] * col[i];
        }
        row[m + i] = 1.0;
        row[width] = rhs[i];
    }
    let mut basis: Vec<usize> = (m..m + k).collect();

    // Reduced costs for minimising the sum of artificials.
    let mut cost = vec![0.0; width + 1];
    for row in &tab {
        for (c, v) in cost.iter_mut().zip(row) {
            *c += v;
        }
    }
    cost[m..width].fill(0.0);

    let scale: f64 = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;
    for _round in 0..10_000 {
        // Bland: entering variable = smallest index with positive reduced cost.
        let Some(enter) = (0..width).find(|&j| cost[j] > tol) else {
            break;
        };
        // Ratio test, again smallest index on ties.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (i, row) in tab.iter().enumerate() {
            if row[enter] > tol {
                let ratio = row[width] / row[enter];
                if ratio < best - tol || (ratio < best + tol && leave.is_none()) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(pivot_row) = leave else {
            // Unbounded phase-1 objective cannot happen; treat as failure.
            return false;
        };
        let pivot = tab[pivot_row][enter];
        tab[pivot_row].iter_mut().for_each(|v| *v /= pivot);
        let prow = tab[pivot_row].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != pivot_row {
                let f = row[enter];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = cost[enter];
        for (c, p) in cost.iter_mut().zip(&prow) {
            *c -= f * p;
        }
        basis[pivot_row] = enter;
    }
    // Feasible iff all artificials can be driven to zero.
    let artificial_mass: f64 = tab
        .iter()
        .enumerate()
        .filter(|(i, _)| basis[*i] >= m)
        .map(|(_, row)| row[width])
        .sum();
    artificial_mass.abs() <= 1e-8 * scale
}

/// Rectangular lattice over the componentwise charge range, shrunk by
/// `margin` per side and intersected with the floor-shrunk hull. Points are
/// emitted in lexicographic order.
pub fn admissible_grid(model: &SpinModel, counts: &[usize], margin: f64) -> Vec<Vec<f64>> {
    assert_eq!(counts.len(), model.n_cons());
    let floor = margin.min(0.5 / model.n_states() as f64);
    let axes: Vec<Vec<f64>> = (0..model.n_cons())
        .map(|i| {
            let (lo, hi) = model.xi_range(i);
            let (lo, hi) = (lo as f64, hi as f64);
            let pad = margin * (hi - lo);
            linspace(lo + pad, hi - pad, counts[i])
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; counts.len()];
    'outer: loop {
        let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
        if hull_contains(model, &point, floor) {
            out.push(point);
        }
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    out
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
