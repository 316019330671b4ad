//! Continuous-time Markov simulation of the lattice dynamics on the
//! periodic lattice, under Eulerian scaling: a macroscopic duration `t`
//! corresponds to microscopic time `N t`.
//!
//! The engine is the direct method: draw an exponential waiting time from
//! the total rate, pick the bond proportionally to its pair rate through a
//! binary indexed tree (O(log N) per event), pick the target pair state
//! proportionally to the individual rates, apply, and update the three
//! affected bond rates. Conserved totals are integer bookkeeping and are
//! preserved exactly; the tree is refreshed from exact recomputation every
//! 10^7 events so rounding drift cannot build up on long runs.

mod event_tree;

pub use event_tree::EventTree;

use crate::model::SpinModel;
use crate::pde::{Profile, ProfileSpec};
use crate::thermo::{invert_densities, ThermoError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KmcError {
    #[error("initial profile at site {site} (x = {x}): {source}")]
    OutsideDomain {
        site: usize,
        x: f64,
        source: ThermoError,
    },
    #[error("dynamics stalled: total rate reached zero with {remaining_macro} macro time left")]
    StalledDynamics { remaining_macro: f64 },
    #[error("block size {block} does not divide the lattice size {n_sites}")]
    BadBlockSize { block: usize, n_sites: usize },
    #[error("lattice needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("profile spec has {spec} components, model has {model}")]
    ComponentMismatch { spec: usize, model: usize },
}

/// Microscopic configuration plus the exactly-tracked conserved totals.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub omega: Vec<u16>,
    pub totals: Vec<i64>,
    /// Microscopic time; divide by the lattice size for macroscopic time.
    pub micro_time: f64,
}

impl LatticeConfig {
    pub fn n_sites(&self) -> usize {
        self.omega.len()
    }

    pub fn macro_time(&self) -> f64 {
        self.micro_time / self.omega.len() as f64
    }

    /// Recomputes the conserved totals from scratch.
    pub fn recompute_totals(&self, model: &SpinModel) -> Vec<i64> {
        let mut totals = vec![0i64; model.n_cons()];
        for &w in &self.omega {
            for (k, &x) in model.xi(w as usize).iter().enumerate() {
                totals[k] += x;
            }
        }
        totals
    }
}

/// Samples the local-equilibrium product measure: site `j` is drawn from
/// the single-site canonical measure at density `u(j / N)`. Deterministic
/// given the seed.
pub fn sample_local_equilibrium(
    model: &SpinModel,
    profile: &ProfileSpec,
    n_sites: usize,
    seed: u64,
) -> Result<LatticeConfig, KmcError> {
    if n_sites < 2 {
        return Err(KmcError::TooFewSites(n_sites));
    }
    if profile.n_comp() != model.n_cons() {
        return Err(KmcError::ComponentMismatch {
            spec: profile.n_comp(),
            model: model.n_cons(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Vec::with_capacity(n_sites);
    let mut totals = vec![0i64; model.n_cons()];

    // Constant profiles need one inversion; general profiles one per site.
    let mut cached: Option<Vec<f64>> = None;
    for j in 0..n_sites {
        let x = j as f64 / n_sites as f64;
        let cumulative =
            match (&cached, profile) {
                (Some(c), ProfileSpec::Const(_)) => c.clone(),
                _ => {
                    let u = profile.eval(x);
                    let dp = invert_densities(model, &u)
                        .map_err(|source| KmcError::OutsideDomain { site: j, x, source })?;
                    let weights = crate::thermo::canonical_point(model, dp.theta.as_slice())
                        .map_err(|source| KmcError::OutsideDomain { site: j, x, source })?
                        .single_site_weights;
                    let mut acc = 0.0;
                    let c: Vec<f64> = weights
                        .iter()
                        .map(|&w| {
                            acc += w;
                            acc
                        })
                        .collect();
                    if matches!(profile, ProfileSpec::Const(_)) {
                        cached = Some(c.clone());
                    }
                    c
                }
            };
        let draw: f64 = rng.random();
        let w = cumulative
            .iter()
            .position(|&c| draw < c)
            .unwrap_or(model.n_states() - 1);
        omega.push(w as u16);
        for (k, &x) in model.xi(w).iter().enumerate() {
            totals[k] += x;
        }
    }
    Ok(LatticeConfig {
        omega,
        totals,
        micro_time: 0.0,
    })
}

/// Flattened per-pair jump data extracted from a model; targets are stored
/// contiguously with an offset table so the hot loop does one indirection.
struct PairDynamics {
    n_states: usize,
    /// Total rate per ordered pair state, `pair = w1 * |S| + w2`.
    total: Vec<f64>,
    /// `targets[offsets[pair]..offsets[pair + 1]]` are the (to1, to2,
    /// cumulative rate) triples of one pair state.
    offsets: Vec<u32>,
    targets: Vec<(u16, u16, f64)>,
}

impl PairDynamics {
    fn new(model: &SpinModel) -> Self {
        let s = model.n_states();
        let mut total = vec![0.0; s * s];
        let mut offsets = Vec::with_capacity(s * s + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for w1 in 0..s {
            for w2 in 0..s {
                let mut acc = 0.0;
                for t in model.transitions_from((w1, w2)) {
                    acc += t.rate;
                    targets.push((t.to.0 as u16, t.to.1 as u16, acc));
                }
                total[w1 * s + w2] = acc;
                offsets.push(targets.len() as u32);
            }
        }
        PairDynamics {
            n_states: s,
            total,
            offsets,
            targets,
        }
    }

    #[inline]
    fn pair_rate(&self, w1: u16, w2: u16) -> f64 {
        self.total[w1 as usize * self.n_states + w2 as usize]
    }

    #[inline]
    fn pick_target(&self, w1: u16, w2: u16, draw: f64) -> (u16, u16) {
        let pair = w1 as usize * self.n_states + w2 as usize;
        let lo = self.offsets[pair] as usize;
        let hi = self.offsets[pair + 1] as usize;
        debug_assert!(hi > lo, "sampled bond has no transitions");
        for &(a, b, cum) in &self.targets[lo..hi - 1] {
            if draw < cum {
                return (a, b);
            }
        }
        let (a, b, _) = self.targets[hi - 1];
        (a, b)
    }
}

/// Events between tree refreshes (power of two so the check is a mask).
const REFRESH_EVERY: u64 = 1 << 23;
/// Events between debug-mode totals audits.
#[cfg(debug_assertions)]
const AUDIT_EVERY: u64 = 1 << 20;

/// Runs the dynamics for macroscopic duration `macro_duration`
/// (microscopic `N * macro_duration`). The returned configuration is the
/// state at the horizon: the last event time does not overshoot it, the
/// clock does. Deterministic given the seed.
pub fn evolve(
    model: &SpinModel,
    config: LatticeConfig,
    macro_duration: f64,
    seed: u64,
) -> Result<LatticeConfig, KmcError> {
    evolve_counted(model, config, macro_duration, seed).map(|(config, _)| config)
}

/// [`evolve`] plus the number of executed events, for rate accounting.
pub fn evolve_counted(
    model: &SpinModel,
    mut config: LatticeConfig,
    macro_duration: f64,
    seed: u64,
) -> Result<(LatticeConfig, u64), KmcError> {
    debug_assert_eq!(config.totals, config.recompute_totals(model));
    if macro_duration <= 0.0 {
        return Ok((config, 0));
    }
    let n = config.omega.len();
    let dyn_ = PairDynamics::new(model);
    let horizon = config.micro_time + n as f64 * macro_duration;

    let rates: Vec<f64> = (0..n)
        .map(|j| dyn_.pair_rate(config.omega[j], config.omega[(j + 1) % n]))
        .collect();
    let mut tree = EventTree::new(rates);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: u64 = 0;

    loop {
        let total = tree.total();
        if total <= 0.0 {
            return Err(KmcError::StalledDynamics {
                remaining_macro: (horizon - config.micro_time) / n as f64,
            });
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        if config.micro_time + wait > horizon {
            config.micro_time = horizon;
            return Ok((config, events));
        }
        config.micro_time += wait;

        // Bond selection. Rounding at interval boundaries can land the
        // descent on a dead bond; rebuild, retry, and as a last resort walk
        // to the nearest active bond (one must exist while total > 0).
        let mut j = tree.sample(rng.random::<f64>() * total);
        if tree.value(j) <= 0.0 {
            tree.rebuild();
            let fresh_total = tree.total();
            if fresh_total <= 0.0 {
                return Err(KmcError::StalledDynamics {
                    remaining_macro: (horizon - config.micro_time) / n as f64,
                });
            }
            j = tree.sample(rng.random::<f64>() * fresh_total);
            if tree.value(j) <= 0.0 {
                j = (0..n)
                    .map(|k| (j + k) % n)
                    .find(|&k| tree.value(k) > 0.0)
                    .expect("positive total rate implies an active bond");
            }
        }

        let jn = if j + 1 == n { 0 } else { j + 1 };
        let (w1, w2) = (config.omega[j], config.omega[jn]);
        let draw = rng.random::<f64>() * dyn_.pair_rate(w1, w2);
        let (a, b) = dyn_.pick_target(w1, w2, draw);

        config.omega[j] = a;
        config.omega[jn] = b;
        // Condition (A) keeps the totals invariant; nothing to update.

        let jp = if j == 0 { n - 1 } else { j - 1 };
        tree.set(jp, dyn_.pair_rate(config.omega[jp], a));
        tree.set(j, dyn_.pair_rate(a, b));
        let jnn = if jn + 1 == n { 0 } else { jn + 1 };
        tree.set(jn, dyn_.pair_rate(b, config.omega[jnn]));

        events += 1;
        if events & (REFRESH_EVERY - 1) == 0 || tree.drift_check_due(events) {
            tree.rebuild();
        }
        #[cfg(debug_assertions)]
        if events & (AUDIT_EVERY - 1) == 0 {
            assert_eq!(
                config.totals,
                config.recompute_totals(model),
                "conserved totals drifted after {events} events"
            );
        }
    }
}

impl EventTree {
    /// Cheap periodic drift audit: every 2^20 events compare the cached
    /// total against an exact leaf sum and ask for a rebuild beyond 1e-9
    /// relative drift.
    fn drift_check_due(&self, events: u64) -> bool {
        events & ((1 << 20) - 1) == 0 && self.drift() > 1e-9
    }
}

/// Block-averaged charge densities: cell `k` of the result is the mean of
/// `xi(omega_j)` over sites `j` in the k-th block of length `block`.
pub fn block_average(
    model: &SpinModel,
    config: &LatticeConfig,
    block: usize,
) -> Result<Profile, KmcError> {
    let n = config.omega.len();
    if block == 0 || !n.is_multiple_of(block) {
        return Err(KmcError::BadBlockSize { block, n_sites: n });
    }
    let cells = n / block;
    let nc = model.n_cons();
    let mut values = vec![0.0; cells * nc];
    for (j, &w) in config.omega.iter().enumerate() {
        let cell = j / block;
        for (k, &x) in model.xi(w as usize).iter().enumerate() {
            values[cell * nc + k] += x as f64;
        }
    }
    for v in &mut values {
        *v /= block as f64;
    }
    Ok(Profile::new(cells, nc, values, config.macro_time())
        .expect("block profile shape is consistent by construction"))
}

/// Mean total jump rate per site under the product measure with the given
/// single-site weights; `N x` this is the expected total lattice rate.
pub fn mean_pair_rate(model: &SpinModel, weights: &[f64]) -> f64 {
    let s = model.n_states();
    let mut acc = 0.0;
    for w1 in 0..s {
        for w2 in 0..s {
            acc += weights[w1] * weights[w2] * model.total_rate((w1, w2));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::leroux_model;

    fn spec(text: &str) -> ProfileSpec {
        ProfileSpec::parse(text, 2).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let p = spec("const:0,0.5");
        let a = sample_local_equilibrium(&m, &p, 4096, 7).unwrap();
        let b = sample_local_equilibrium(&m, &p, 4096, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_local_equilibrium(&m, &p, 4096, 8).unwrap();
        assert_ne!(a.omega, c.omega);
    }

    #[test]
    fn sampling_matches_marginals_at_base_point() {
        // theta = 0 profile: frequencies must match the base measure within
        // four standard errors.
        let m = leroux_model(1.0, 1.0).unwrap();
        let n = 1_000_000usize;
        let cfg = sample_local_equilibrium(&m, &spec("const:0,0.333333333333333"), n, 42).unwrap();
        let mut counts = [0usize; 3];
        for &w in &cfg.omega {
            counts[w as usize] += 1;
        }
        for (w, &count) in counts.iter().enumerate() {
            let p = m.base_measure()[w];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = count as f64 / n as f64;
            assert!(
                (freq - p).abs() < 4.0 * se,
                "state {w}: freq {freq} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn sampling_fraction_of_zeros_tracks_rho() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let n = 100_000usize;
        let cfg = sample_local_equilibrium(&m, &spec("const:0,0.5"), n, 11).unwrap();
        let zero = m.state_index("0").unwrap() as u16;
        let frac = cfg.omega.iter().filter(|&&w| w == zero).count() as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * se, "fraction {frac}");
    }

    #[test]
    fn rejects_inadmissible_profile() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let err = sample_local_equilibrium(&m, &spec("const:0.9,0.5"), 64, 1).unwrap_err();
        assert!(matches!(err, KmcError::OutsideDomain { site: 0, .. }));
    }

    #[test]
    fn zero_duration_is_identity() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let cfg = sample_local_equilibrium(&m, &spec("const:0,0.5"), 512, 3).unwrap();
        let out = evolve(&m, cfg.clone(), 0.0, 99).unwrap();
        assert_eq!(out, cfg);
    }

    #[test]
    fn evolution_preserves_totals_exactly() {
        let m = leroux_model(1.0, 0.5).unwrap();
        let cfg = sample_local_equilibrium(&m, &spec("sine:0,0.2,0.4,0.1"), 2048, 5).unwrap();
        let totals = cfg.totals.clone();
        let out = evolve(&m, cfg, 0.5, 17).unwrap();
        assert_eq!(out.totals, totals);
        assert_eq!(out.recompute_totals(&m), totals);
    }

    #[test]
    fn evolution_is_deterministic_in_the_seed() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let cfg = sample_local_equilibrium(&m, &spec("const:0,0.5"), 1024, 5).unwrap();
        let a = evolve(&m, cfg.clone(), 0.2, 21).unwrap();
        let b = evolve(&m, cfg.clone(), 0.2, 21).unwrap();
        assert_eq!(a, b);
        let c = evolve(&m, cfg, 0.2, 22).unwrap();
        assert_ne!(a.omega, c.omega);
    }

    #[test]
    fn stalled_dynamics_is_reported() {
        // A model with a single one-directional transition starves quickly:
        // start from the all-target configuration so no bond can fire.
        let m = crate::model::SpinModel::new(
            vec!["a".into(), "b".into(), "c".into()],
            1,
            vec![vec![-1], vec![0], vec![1]],
            vec![1.0 / 3.0; 3],
            vec![((0, 2), (2, 0), 1.0)],
        )
        .unwrap();
        let cfg = LatticeConfig {
            omega: vec![1; 64],
            totals: vec![0],
            micro_time: 0.0,
        };
        let err = evolve(&m, cfg, 1.0, 1).unwrap_err();
        assert!(matches!(err, KmcError::StalledDynamics { .. }));
    }

    #[test]
    fn block_average_extremes() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let cfg = sample_local_equilibrium(&m, &spec("sine:0,0.2,0.4,0.1"), 256, 9).unwrap();
        // l = N: a single cell carrying totals / N.
        let whole = block_average(&m, &cfg, 256).unwrap();
        assert_eq!(whole.n_cells(), 1);
        for k in 0..2 {
            assert!((whole.cell(0)[k] - cfg.totals[k] as f64 / 256.0).abs() < 1e-12);
        }
        // l = 1: raw charge values.
        let raw = block_average(&m, &cfg, 1).unwrap();
        assert_eq!(raw.n_cells(), 256);
        for (j, &w) in cfg.omega.iter().enumerate() {
            assert_eq!(raw.cell(j)[0], m.xi(w as usize)[0] as f64);
            assert_eq!(raw.cell(j)[1], m.xi(w as usize)[1] as f64);
        }
        // Non-divisor block size is rejected.
        assert!(matches!(
            block_average(&m, &cfg, 100),
            Err(KmcError::BadBlockSize { .. })
        ));
    }

    #[test]
    fn block_average_of_uniform_configuration() {
        let m = leroux_model(1.0, 1.0).unwrap();
        let zero = m.state_index("0").unwrap() as u16;
        let cfg = LatticeConfig {
            omega: vec![zero; 128],
            totals: vec![0, 128],
            micro_time: 0.0,
        };
        let p = block_average(&m, &cfg, 16).unwrap();
        for j in 0..p.n_cells() {
            assert_eq!(p.cell(j), &[0.0, 1.0]);
        }
    }

    #[test]
    fn expected_event_count_matches_duration_times_rate() {
        // Expected events = micro duration x expected total lattice rate;
        // on an equilibrium run the rate is stationary, so the count must
        // land within 10% (the Poisson fluctuation is far smaller).
        let m = leroux_model(1.0, 1.0).unwrap();
        let n = 10_000usize;
        let cfg = sample_local_equilibrium(&m, &spec("const:0,0.5"), n, 23).unwrap();
        let t = 0.1;
        let (_, events) = evolve_counted(&m, cfg, t, 29).unwrap();
        let weights = crate::thermo::invert_densities(&m, &[0.0, 0.5])
            .map(|dp| {
                crate::thermo::canonical_point(&m, dp.theta.as_slice())
                    .unwrap()
                    .single_site_weights
            })
            .unwrap();
        let expected = (n as f64 * t) * (n as f64 * mean_pair_rate(&m, &weights));
        assert!(
            (events as f64 - expected).abs() < 0.1 * expected,
            "events {events} vs expected {expected}"
        );
    }
}
