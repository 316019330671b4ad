//! Mechanical checks of the four rate-function conditions.
//!
//! Conditions (A), (C) and (D) are finite systems of identities over the
//! local state set and are verified exhaustively. Condition (B) is verified
//! by exhaustive strong-connectivity on a small torus; the result is a
//! finite certificate for that lattice size, not a proof for all N.

use super::{identity_close, ModelError, SpinModel, ENUMERATION_LIMIT};
use serde::Serialize;
use std::collections::HashMap;

/// Which of the four rate conditions a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// (A) pairwise conservation of every charge.
    Conservation,
    /// (B) irreducibility on shells of fixed conserved totals.
    Irreducibility,
    /// (C) pair detailed balance of the base measure.
    Stationarity,
    /// (D) cyclic identity of the total pair rate.
    RateCycle,
}

/// One counterexample: the states involved and the numeric mismatch.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub states: Vec<String>,
    pub detail: String,
    pub mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub condition: Condition,
    pub passed: bool,
    pub witnesses: Vec<Witness>,
}

impl ValidationReport {
    fn from_witnesses(condition: Condition, witnesses: Vec<Witness>) -> Self {
        ValidationReport {
            condition,
            passed: witnesses.is_empty(),
            witnesses,
        }
    }
}

/// Condition (A): every stored positive-rate jump must conserve the charge
/// sum of the pair, componentwise and exactly (integer arithmetic).
pub fn validate_conservation(model: &SpinModel) -> ValidationReport {
    let mut witnesses = Vec::new();
    for (from, to, rate) in model.transitions() {
        for k in 0..model.n_cons() {
            let before = model.xi(from.0)[k] + model.xi(from.1)[k];
            let after = model.xi(to.0)[k] + model.xi(to.1)[k];
            if before != after {
                witnesses.push(Witness {
                    states: pair_labels(model, from, to),
                    detail: format!("rate {rate}: component {k} changes {before} -> {after}"),
                    mismatch: (after - before) as f64,
                });
            }
        }
    }
    ValidationReport::from_witnesses(Condition::Conservation, witnesses)
}

/// Condition (C): `pi(w1) pi(w2) r(w1,w2;w1',w2') = pi(w2') pi(w1')
/// r(w2',w1';w2,w1)` for every quadruple. Quadruples where both sides
/// vanish hold trivially, so it suffices to test the stored transitions
/// and their mirrors.
pub fn validate_stationarity(model: &SpinModel) -> ValidationReport {
    let pi = model.base_measure();
    let mut witnesses = Vec::new();
    let mut seen: HashMap<[usize; 4], ()> = HashMap::new();
    for (from, to, _) in model.transitions() {
        let quad = [from.0, from.1, to.0, to.1];
        let mirror = [to.1, to.0, from.1, from.0];
        let key = quad.min(mirror);
        if seen.insert(key, ()).is_some() {
            continue;
        }
        let lhs = pi[from.0] * pi[from.1] * model.rate(from, to);
        let rhs = pi[to.1] * pi[to.0] * model.rate((to.1, to.0), (from.1, from.0));
        if !identity_close(lhs, rhs) {
            witnesses.push(Witness {
                states: pair_labels(model, from, to),
                detail: format!("pi-weighted forward rate {lhs} vs reversed {rhs}"),
                mismatch: (lhs - rhs).abs(),
            });
        }
    }
    ValidationReport::from_witnesses(Condition::Stationarity, witnesses)
}

/// Condition (D): with `R(w1,w2)` the total pair rate, the cyclic sums
/// `R(w1,w2)+R(w2,w3)+R(w3,w1)` and `R(w1,w3)+R(w3,w2)+R(w2,w1)` must agree
/// for every triple of states.
pub fn validate_rate_cycle(model: &SpinModel) -> ValidationReport {
    let s = model.n_states();
    let mut r = vec![0.0; s * s];
    for w1 in 0..s {
        for w2 in 0..s {
            r[w1 * s + w2] = model.total_rate((w1, w2));
        }
    }
    let mut witnesses = Vec::new();
    for w1 in 0..s {
        // The identity is invariant under cyclic rotation and reverses sides
        // under reflection, so each unordered cycle is tested once.
        for w2 in w1..s {
            for w3 in w2..s {
                let lhs = r[w1 * s + w2] + r[w2 * s + w3] + r[w3 * s + w1];
                let rhs = r[w1 * s + w3] + r[w3 * s + w2] + r[w2 * s + w1];
                if !identity_close(lhs, rhs) {
                    witnesses.push(Witness {
                        states: vec![
                            model.state_label(w1).to_string(),
                            model.state_label(w2).to_string(),
                            model.state_label(w3).to_string(),
                        ],
                        detail: format!("cycle sums {lhs} vs {rhs}"),
                        mismatch: (lhs - rhs).abs(),
                    });
                }
            }
        }
    }
    ValidationReport::from_witnesses(Condition::RateCycle, witnesses)
}

/// Condition (B), checked exhaustively on the periodic lattice with
/// `n_sites` sites: the configurations are partitioned by their conserved
/// totals and every class must be strongly connected under positive-rate
/// elementary jumps. Classes of size one pass trivially.
///
/// Fails with `SizeExceeded` when `|S|^n_sites` would exceed
/// [`ENUMERATION_LIMIT`].
pub fn check_irreducibility(
    model: &SpinModel,
    n_sites: usize,
) -> Result<ValidationReport, ModelError> {
    if n_sites < 3 {
        return Err(ModelError::TooFewSites {
            min: 3,
            got: n_sites,
        });
    }
    let s = model.n_states();
    let size = (s as f64).powi(n_sites as i32);
    if size > ENUMERATION_LIMIT as f64 {
        return Err(ModelError::SizeExceeded {
            size,
            limit: ENUMERATION_LIMIT as f64,
        });
    }
    let total = (s as u64).pow(n_sites as u32) as usize;

    // Partition configurations by conserved totals.
    let mut class_of: Vec<u32> = vec![0; total];
    let mut classes: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut totals_of_class: Vec<Vec<i64>> = Vec::new();
    let mut config = vec![0usize; n_sites];
    for (code, slot) in class_of.iter_mut().enumerate() {
        decode(code, s, &mut config);
        let mut totals = vec![0i64; model.n_cons()];
        for &w in &config {
            for (t, &x) in totals.iter_mut().zip(model.xi(w)) {
                *t += x;
            }
        }
        let next_id = members.len() as u32;
        let id = *classes.entry(totals.clone()).or_insert_with(|| {
            members.push(Vec::new());
            totals_of_class.push(totals);
            next_id
        });
        *slot = id;
        members[id as usize].push(code);
    }

    // Forward and reverse jump tables keyed by the ordered pair.
    let mut fwd: Vec<Vec<(usize, usize)>> = vec![Vec::new(); s * s];
    let mut rev: Vec<Vec<(usize, usize)>> = vec![Vec::new(); s * s];
    for (from, to, _) in model.transitions() {
        fwd[from.0 * s + from.1].push(to);
        rev[to.0 * s + to.1].push(from);
    }

    let mut scratch = vec![0usize; n_sites];

    let mut witnesses = Vec::new();
    let mut mark = vec![u32::MAX; total];
    let mut stack: Vec<usize> = Vec::new();
    let mut nbuf: Vec<usize> = Vec::new();
    for (id, mem) in members.iter().enumerate() {
        if mem.len() < 2 {
            continue;
        }
        let id = id as u32;
        let root = mem[0];
        // A class is strongly connected iff every member is reachable from
        // the root both forward and backward.
        for (pass, table) in [(2 * id, &fwd), (2 * id + 1, &rev)] {
            let tag = pass;
            let mut reached = 1usize;
            mark[root] = tag;
            stack.push(root);
            while let Some(code) = stack.pop() {
                expand(code, s, table, &mut scratch, &mut nbuf);
                for &next in &nbuf {
                    if class_of[next] == id && mark[next] != tag {
                        mark[next] = tag;
                        reached += 1;
                        stack.push(next);
                    }
                }
            }
            if reached != mem.len() {
                let missing = mem.iter().copied().find(|&c| mark[c] != tag).unwrap();
                decode(missing, s, &mut scratch);
                let cfg: Vec<String> = scratch
                    .iter()
                    .map(|&w| model.state_label(w).to_string())
                    .collect();
                decode(root, s, &mut scratch);
                let root_cfg: Vec<String> = scratch
                    .iter()
                    .map(|&w| model.state_label(w).to_string())
                    .collect();
                witnesses.push(Witness {
                    states: cfg,
                    detail: format!(
                        "class with totals {:?} ({} configurations) is not strongly \
                         connected: no {} path between ({}) and the listed configuration",
                        totals_of_class[id as usize],
                        mem.len(),
                        if tag % 2 == 0 { "forward" } else { "backward" },
                        root_cfg.join(",")
                    ),
                    mismatch: (mem.len() - reached) as f64,
                });
                break;
            }
        }
    }
    Ok(ValidationReport::from_witnesses(
        Condition::Irreducibility,
        witnesses,
    ))
}

fn pair_labels(model: &SpinModel, from: (usize, usize), to: (usize, usize)) -> Vec<String> {
    vec![
        model.state_label(from.0).to_string(),
        model.state_label(from.1).to_string(),
        model.state_label(to.0).to_string(),
        model.state_label(to.1).to_string(),
    ]
}

/// All configurations reachable from `code` by one elementary jump from the
/// given transition table (forward or reverse), written into `out`.
fn expand(
    code: usize,
    s: usize,
    table: &[Vec<(usize, usize)>],
    scratch: &mut [usize],
    out: &mut Vec<usize>,
) {
    out.clear();
    decode(code, s, scratch);
    let n_sites = scratch.len();
    for j in 0..n_sites {
        let jn = (j + 1) % n_sites;
        let pair = scratch[j] * s + scratch[jn];
        for &(a, b) in &table[pair] {
            let (old_j, old_jn) = (scratch[j], scratch[jn]);
            scratch[j] = a;
            scratch[jn] = b;
            out.push(encode(scratch, s));
            scratch[j] = old_j;
            scratch[jn] = old_jn;
        }
    }
}

fn decode(mut code: usize, s: usize, out: &mut [usize]) {
    for slot in out.iter_mut() {
        *slot = code % s;
        code /= s;
    }
}

fn encode(config: &[usize], s: usize) -> usize {
    let mut code = 0;
    for &w in config.iter().rev() {
        code = code * s + w;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::leroux_model;

    #[test]
    fn encode_decode_roundtrip() {
        let mut buf = vec![0usize; 4];
        for code in 0..81 {
            decode(code, 3, &mut buf);
            assert_eq!(encode(&buf, 3), code);
        }
    }

    #[test]
    fn conservation_passes_for_exchange_dynamics() {
        let m = leroux_model(1.0, 1.0).unwrap();
        assert!(validate_conservation(&m).passed);
    }

    #[test]
    fn conservation_flags_injected_violation() {
        // (+1, -1) -> (0, -1) destroys one unit of spin.
        let mut m = leroux_model(1.0, 1.0).unwrap();
        let plus = m.state_index("+1").unwrap();
        let minus = m.state_index("-1").unwrap();
        let zero = m.state_index("0").unwrap();
        m.add_transition((plus, minus), (zero, minus), 1.0).unwrap();
        let report = validate_conservation(&m);
        assert!(!report.passed);
        assert_eq!(report.witnesses.len(), 2); // both charges break
        assert_eq!(report.witnesses[0].states, vec!["+1", "-1", "0", "-1"]);
    }

    #[test]
    fn stationarity_trivial_for_zero_rates() {
        let m = crate::model::SpinModel::new(
            vec!["a".into(), "b".into(), "c".into()],
            1,
            vec![vec![-1], vec![0], vec![1]],
            vec![1.0 / 3.0; 3],
            vec![],
        )
        .unwrap();
        assert!(validate_stationarity(&m).passed);
    }

    #[test]
    fn rate_cycle_trivial_for_symmetric_totals() {
        // R(x, y) = R(y, x) by construction: symmetric exchange rates.
        let m = crate::model::SpinModel::new(
            vec!["a".into(), "b".into(), "c".into()],
            1,
            vec![vec![-1], vec![0], vec![1]],
            vec![1.0 / 3.0; 3],
            vec![
                ((0, 1), (1, 0), 0.7),
                ((1, 0), (0, 1), 0.7),
                ((0, 2), (2, 0), 1.3),
                ((2, 0), (0, 2), 1.3),
            ],
        )
        .unwrap();
        assert!(validate_rate_cycle(&m).passed);
    }

    #[test]
    fn irreducibility_fails_without_any_rates() {
        let m = crate::model::SpinModel::new(
            vec!["-1".into(), "0".into(), "+1".into()],
            2,
            vec![vec![-1, 0], vec![0, 1], vec![1, 0]],
            vec![1.0 / 3.0; 3],
            vec![],
        )
        .unwrap();
        let report = check_irreducibility(&m, 3).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn irreducibility_fails_when_zeros_cannot_move() {
        // Exchange model with only the (+1, -1) exchanges active: the zero
        // state is frozen in place, so mixed shells split.
        let m = crate::model::SpinModel::new(
            vec!["-1".into(), "0".into(), "+1".into()],
            2,
            vec![vec![-1, 0], vec![0, 1], vec![1, 0]],
            vec![1.0 / 3.0; 3],
            vec![((2, 0), (0, 2), 1.0), ((0, 2), (2, 0), 1.0)],
        )
        .unwrap();
        let report = check_irreducibility(&m, 3).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn irreducibility_rejects_oversized_enumeration() {
        let m = leroux_model(0.0, 0.0).unwrap();
        let err = check_irreducibility(&m, 20).unwrap_err();
        assert!(matches!(err, ModelError::SizeExceeded { .. }));
    }

    #[test]
    fn singleton_classes_pass_trivially() {
        // All-equal configurations are alone in their class for Leroux.
        let m = leroux_model(0.0, 0.0).unwrap();
        let report = check_irreducibility(&m, 3).unwrap();
        assert!(report.passed);
    }
}
