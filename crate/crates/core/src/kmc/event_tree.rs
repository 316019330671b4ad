//! Binary indexed tree over the per-bond jump rates.
//!
//! Supports the three operations the event loop needs in O(log N): total
//! rate, point update, and sampling the bond whose cumulative-rate interval
//! contains a uniform draw. Leaf values are kept alongside the tree so the
//! structure can be rebuilt from exact recomputation, which the engine does
//! periodically to stop floating-point drift from accumulating over
//! billions of incremental updates.

#[derive(Debug, Clone)]
pub struct EventTree {
    /// 1-based Fenwick array, padded to a power of two for the descent.
    tree: Vec<f64>,
    /// Current leaf values (source of truth for rebuilds).
    values: Vec<f64>,
    /// Smallest power of two >= values.len().
    cap: usize,
    total: f64,
}

impl EventTree {
    pub fn new(values: Vec<f64>) -> Self {
        let cap = values.len().next_power_of_two().max(1);
        let mut t = EventTree {
            tree: Vec::new(),
            values,
            cap,
            total: 0.0,
        };
        t.rebuild();
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Recomputes every node and the cached total from the leaf values.
    pub fn rebuild(&mut self) {
        self.tree = vec![0.0; self.cap + 1];
        for (i, &v) in self.values.iter().enumerate() {
            let mut pos = i + 1;
            while pos <= self.cap {
                self.tree[pos] += v;
                pos += pos & pos.wrapping_neg();
            }
        }
        self.total = exact_sum(&self.values);
    }

    /// Relative drift between the cached total and an exact leaf sum.
    pub fn drift(&self) -> f64 {
        let exact = exact_sum(&self.values);
        (self.total - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
    }

    /// Sets leaf `idx` to `value`.
    pub fn set(&mut self, idx: usize, value: f64) {
        let delta = value - self.values[idx];
        if delta == 0.0 {
            return;
        }
        self.values[idx] = value;
        self.total += delta;
        let mut pos = idx + 1;
        while pos <= self.cap {
            self.tree[pos] += delta;
            pos += pos & pos.wrapping_neg();
        }
    }

    /// Index of the leaf whose cumulative interval contains `target`,
    /// assuming `0 <= target < total()`. Rounding can land the descent on a
    /// zero-rate leaf; callers must treat that as a resample signal.
    ///
    /// The descent starts at `cap / 2`: taking the root step would require
    /// `target >= total`, which the contract excludes, and skipping it keeps
    /// `idx + step <= cap` so the body stays branch-free (the comparison
    /// compiles to a conditional move, which matters at these event rates).
    pub fn sample(&self, mut target: f64) -> usize {
        let mut idx = 0usize;
        let mut step = self.cap >> 1;
        while step > 0 {
            let node = self.tree[idx + step];
            let take = (node <= target) as usize;
            target -= if take == 1 { node } else { 0.0 };
            idx += step * take;
            step >>= 1;
        }
        idx.min(self.values.len() - 1)
    }
}

fn exact_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
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
    use proptest::prelude::*;

    #[test]
    fn total_and_point_updates() {
        let mut t = EventTree::new(vec![2.0, 4.0, 1.0, 0.0, 1.5]);
        assert_eq!(t.total(), 8.5);
        t.set(1, 0.5);
        assert_eq!(t.total(), 5.0);
        t.set(3, 2.0);
        assert_eq!(t.total(), 7.0);
        assert!(t.drift() < 1e-15);
    }

    #[test]
    fn sample_picks_the_covering_leaf() {
        let t = EventTree::new(vec![2.0, 0.0, 3.0, 5.0]);
        assert_eq!(t.sample(0.0), 0);
        assert_eq!(t.sample(1.999), 0);
        assert_eq!(t.sample(2.0), 2);
        assert_eq!(t.sample(4.999), 2);
        assert_eq!(t.sample(5.0), 3);
        assert_eq!(t.sample(9.999), 3);
    }

    proptest! {
        #[test]
        fn sampling_matches_linear_scan(
            values in proptest::collection::vec(0.0f64..10.0, 1..200),
            fraction in 0.0f64..1.0,
        ) {
            let tree = EventTree::new(values.clone());
            let total: f64 = values.iter().sum();
            prop_assume!(total > 0.0);
            let target = fraction * total * (1.0 - 1e-12);
            let picked = tree.sample(target);
            // Linear-scan reference.
            let mut acc = 0.0;
            let mut expect = values.len() - 1;
            for (i, &v) in values.iter().enumerate() {
                acc += v;
                if target < acc {
                    expect = i;
                    break;
                }
            }
            // Tree prefix sums and the scan accumulate in different orders;
            // accept a one-slot discrepancy only across zero-rate leaves.
            if picked != expect {
                let (lo, hi) = (picked.min(expect), picked.max(expect));
                let inbetween: f64 = values[lo..hi].iter().sum();
                prop_assert!(inbetween <= 1e-9 * total);
            }
        }

        #[test]
        fn updates_preserve_prefix_sums(
            values in proptest::collection::vec(0.0f64..10.0, 1..100),
            updates in proptest::collection::vec((0usize..100, 0.0f64..10.0), 0..20),
        ) {
            let mut tree = EventTree::new(values.clone());
            let mut reference = values;
            for (idx, v) in updates {
                let idx = idx % reference.len();
                tree.set(idx, v);
                reference[idx] = v;
            }
            let exact: f64 = reference.iter().sum();
            prop_assert!((tree.total() - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }
    }
}
