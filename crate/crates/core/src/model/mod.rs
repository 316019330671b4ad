//! Spin systems on the discrete torus with `n` conserved quantities.
//!
//! A [`SpinModel`] is a finite local state set `S`, a table of per-site
//! conserved quantities `xi: S -> Z^n`, a strictly positive base measure on
//! `S`, and a sparse nearest-neighbour jump-rate table
//! `r(w1, w2; w1', w2')`. The validators in [`validate`] check the four
//! structural conditions a model must satisfy for it to admit product
//! stationary measures and a hydrodynamic limit:
//!
//! - (A) every positive-rate jump conserves `xi(w1) + xi(w2)` componentwise,
//! - (B) the dynamics is irreducible on each shell of fixed conserved totals,
//! - (C) pair detailed balance of the base measure against reversed jumps,
//! - (D) the total pair rate `R` satisfies the cyclic triple identity.

mod builtin;
mod io;
mod validate;

pub use builtin::{bricklayer_model, leroux_model, BricklayerParams};
pub use io::{load_model, load_model_str, save_model, save_model_string};
pub use validate::{
    check_irreducibility, validate_conservation, validate_rate_cycle, validate_stationarity,
    Condition, ValidationReport, Witness,
};

use std::collections::BTreeMap;
use thiserror::Error;

/// Relative tolerance for the floating-point identity validators.
pub const IDENTITY_RTOL: f64 = 1e-12;
/// Absolute floor below which identity mismatches are treated as rounding.
pub const IDENTITY_ATOL: f64 = 1e-14;

/// Largest state-space enumeration allowed by [`check_irreducibility`].
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("a model needs at least 3 local states, got {0}")]
    TooFewStates(usize),
    #[error("duplicate state label `{0}`")]
    DuplicateState(String),
    #[error("unknown state label `{0}`")]
    UnknownState(String),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("need at least one conserved quantity")]
    NoConservedQuantity,
    #[error("xi table must have {rows} rows of length {cols}")]
    BadXiShape { rows: usize, cols: usize },
    #[error("base_measure invalid: {0}")]
    BadBaseMeasure(String),
    #[error("negative rate {rate} on ({from1},{from2}) -> ({to1},{to2})")]
    NegativeRate {
        from1: String,
        from2: String,
        to1: String,
        to2: String,
        rate: f64,
    },
    #[error("non-finite rate on ({from1},{from2}) -> ({to1},{to2})")]
    NonFiniteRate {
        from1: String,
        from2: String,
        to1: String,
        to2: String,
    },
    #[error("conserved quantities and the constant function are linearly dependent")]
    DependentConservedQuantities,
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("enumeration of |S|^sites = {size:e} states exceeds the limit {limit:e}")]
    SizeExceeded { size: f64, limit: f64 },
    #[error("too few lattice sites: need at least {min}, got {got}")]
    TooFewSites { min: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error in field `{field}`: {detail}")]
    Schema { field: String, detail: String },
}

/// Constructor form of one rate entry: (from pair, to pair, rate).
pub type JumpRate = ((usize, usize), (usize, usize), f64);

/// One allowed jump of a nearest-neighbour pair, stored by state indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub to: (usize, usize),
    pub rate: f64,
}

/// A translation-invariant nearest-neighbour spin system with `n_cons`
/// conserved quantities. Immutable after construction; validators and all
/// downstream consumers treat it as shared read-only data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    states: Vec<String>,
    n_cons: usize,
    xi: Vec<Vec<i64>>,
    base_measure: Vec<f64>,
    rates: BTreeMap<(usize, usize), Vec<Transition>>,
}

impl SpinModel {
    /// Builds a model and checks the structural invariants: positive
    /// normalised base measure, finite nonnegative rates, and linear
    /// independence of the conserved quantities together with the constant
    /// function. Zero-rate entries are dropped (the table is sparse in the
    /// positive rates). The dynamical conditions (A)-(D) are *not* checked
    /// here; run the validators for those.
    pub fn new(
        states: Vec<String>,
        n_cons: usize,
        xi: Vec<Vec<i64>>,
        base_measure: Vec<f64>,
        rates: Vec<JumpRate>,
    ) -> Result<Self, ModelError> {
        let n_states = states.len();
        if n_states < 3 {
            return Err(ModelError::TooFewStates(n_states));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(ModelError::DuplicateState(s.clone()));
            }
        }
        if n_cons == 0 {
            return Err(ModelError::NoConservedQuantity);
        }
        if xi.len() != n_states || xi.iter().any(|row| row.len() != n_cons) {
            return Err(ModelError::BadXiShape {
                rows: n_states,
                cols: n_cons,
            });
        }
        if base_measure.len() != n_states {
            return Err(ModelError::BadBaseMeasure(format!(
                "expected {} entries, got {}",
                n_states,
                base_measure.len()
            )));
        }
        for &p in &base_measure {
            if !(p.is_finite() && p > 0.0) {
                return Err(ModelError::BadBaseMeasure(format!(
                    "entries must be strictly positive, got {p}"
                )));
            }
        }
        let total: f64 = base_measure.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::BadBaseMeasure(format!(
                "sums to {total}, expected 1"
            )));
        }

        // The functions xi_1, ..., xi_n and 1 must be linearly independent
        // as vectors over S.
        let mut mat = Vec::with_capacity(n_cons + 1);
        for k in 0..n_cons {
            mat.push(xi.iter().map(|row| row[k] as f64).collect::<Vec<_>>());
        }
        mat.push(vec![1.0; n_states]);
        if rank(&mat) != n_cons + 1 {
            return Err(ModelError::DependentConservedQuantities);
        }

        let mut model = SpinModel {
            states,
            n_cons,
            xi,
            base_measure,
            rates: BTreeMap::new(),
        };
        for (from, to, rate) in rates {
            model.add_transition(from, to, rate)?;
        }
        Ok(model)
    }

    /// Inserts one jump into the rate table. Only structural checks are
    /// performed, so a transition that breaks condition (A) can be injected;
    /// the validators exist to detect exactly that.
    pub fn add_transition(
        &mut self,
        from: (usize, usize),
        to: (usize, usize),
        rate: f64,
    ) -> Result<(), ModelError> {
        let n = self.states.len();
        for idx in [from.0, from.1, to.0, to.1] {
            if idx >= n {
                return Err(ModelError::StateOutOfRange(idx));
            }
        }
        if !rate.is_finite() {
            return Err(ModelError::NonFiniteRate {
                from1: self.states[from.0].clone(),
                from2: self.states[from.1].clone(),
                to1: self.states[to.0].clone(),
                to2: self.states[to.1].clone(),
            });
        }
        if rate < 0.0 {
            return Err(ModelError::NegativeRate {
                from1: self.states[from.0].clone(),
                from2: self.states[from.1].clone(),
                to1: self.states[to.0].clone(),
                to2: self.states[to.1].clone(),
                rate,
            });
        }
        if rate > 0.0 {
            let list = self.rates.entry(from).or_default();
            match list.iter_mut().find(|t| t.to == to) {
                Some(t) => t.rate += rate,
                None => list.push(Transition { to, rate }),
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_cons(&self) -> usize {
        self.n_cons
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_label(&self, idx: usize) -> &str {
        &self.states[idx]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Conserved-quantity vector of one local state.
    pub fn xi(&self, state: usize) -> &[i64] {
        &self.xi[state]
    }

    pub fn base_measure(&self) -> &[f64] {
        &self.base_measure
    }

    /// Positive-rate transitions out of an ordered pair (empty if none).
    pub fn transitions_from(&self, pair: (usize, usize)) -> &[Transition] {
        self.rates.get(&pair).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Iterates all stored (from, to, rate) entries in deterministic order.
    pub fn transitions(&self) -> impl Iterator<Item = JumpRate> + '_ {
        self.rates
            .iter()
            .flat_map(|(&from, list)| list.iter().map(move |t| (from, t.to, t.rate)))
    }

    /// Rate of one specific jump (0 when absent).
    pub fn rate(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        self.transitions_from(from)
            .iter()
            .find(|t| t.to == to)
            .map(|t| t.rate)
            .unwrap_or(0.0)
    }

    /// Total jump rate `R(w1, w2)` of an ordered pair.
    pub fn total_rate(&self, pair: (usize, usize)) -> f64 {
        self.transitions_from(pair).iter().map(|t| t.rate).sum()
    }

    /// Componentwise range of the conserved quantities over S.
    pub fn xi_range(&self, component: usize) -> (i64, i64) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for row in &self.xi {
            lo = lo.min(row[component]);
            hi = hi.max(row[component]);
        }
        (lo, hi)
    }

    /// Returns a copy with the states listed in permuted order; `perm[k]`
    /// is the old index of the new state `k`. Used to check that validator
    /// verdicts do not depend on the state ordering.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        if perm.len() != self.n_states() {
            return Err(ModelError::BadXiShape {
                rows: self.n_states(),
                cols: self.n_cons,
            });
        }
        let mut inv = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if old >= perm.len() || inv[old] != usize::MAX {
                return Err(ModelError::StateOutOfRange(old));
            }
            inv[old] = new;
        }
        let rates = self
            .transitions()
            .map(|(from, to, r)| ((inv[from.0], inv[from.1]), (inv[to.0], inv[to.1]), r))
            .collect();
        SpinModel::new(
            perm.iter().map(|&old| self.states[old].clone()).collect(),
            self.n_cons,
            perm.iter().map(|&old| self.xi[old].clone()).collect(),
            perm.iter().map(|&old| self.base_measure[old]).collect(),
            rates,
        )
    }
}

/// Rank of a small dense matrix given as rows, by Gaussian elimination with
/// partial pivoting. The inputs here are integer-valued, so the fixed
/// tolerance is safe.
fn rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let ncols = m[0].len();
    let mut r = 0;
    for col in 0..ncols {
        if r == m.len() {
            break;
        }
        let (pivot, val) = (r..m.len())
            .map(|i| (i, m[i][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if val < 1e-9 {
            continue;
        }
        m.swap(r, pivot);
        let (top, below) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in below {
            let f = row[col] / pivot_row[col];
            for (v, p) in row[col..ncols].iter_mut().zip(&pivot_row[col..ncols]) {
                *v -= f * p;
            }
        }
        r += 1;
    }
    r
}

/// `|a - b|` within relative tolerance [`IDENTITY_RTOL`] and absolute floor
/// [`IDENTITY_ATOL`]; used by every identity validator.
pub(crate) fn identity_close(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= IDENTITY_ATOL + IDENTITY_RTOL * a.abs().max(b.abs())
}
