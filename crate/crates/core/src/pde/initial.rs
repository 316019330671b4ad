//! Initial-profile mini-language shared by the solver and simulator CLIs.
//!
//! Two forms, with one value list sized by the number of components:
//!
//! - `const:v1,...,vn` — constant data;
//! - `sine:mean1,amp1,...,meann,ampn` — `mean_k + amp_k sin(2 pi x)` per
//!   component.

use super::{Profile, SolverError};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Const(Vec<f64>),
    Sine { mean: Vec<f64>, amp: Vec<f64> },
}

impl ProfileSpec {
    pub fn parse(text: &str, n_comp: usize) -> Result<Self, SolverError> {
        let (kind, rest) = text.split_once(':').ok_or_else(|| {
            SolverError::BadProfileSpec(format!("missing `kind:` prefix in `{text}`"))
        })?;
        let values: Vec<f64> = rest
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| SolverError::BadProfileSpec(format!("bad number `{tok}`")))
            })
            .collect::<Result<_, _>>()?;
        match kind {
            "const" => {
                if values.len() != n_comp {
                    return Err(SolverError::BadProfileSpec(format!(
                        "const needs {n_comp} values, got {}",
                        values.len()
                    )));
                }
                Ok(ProfileSpec::Const(values))
            }
            "sine" => {
                if values.len() != 2 * n_comp {
                    return Err(SolverError::BadProfileSpec(format!(
                        "sine needs {} values (mean, amplitude per component), got {}",
                        2 * n_comp,
                        values.len()
                    )));
                }
                let mean = values.iter().step_by(2).copied().collect();
                let amp = values.iter().skip(1).step_by(2).copied().collect();
                Ok(ProfileSpec::Sine { mean, amp })
            }
            other => Err(SolverError::BadProfileSpec(format!(
                "unknown profile kind `{other}`"
            ))),
        }
    }

    pub fn n_comp(&self) -> usize {
        match self {
            ProfileSpec::Const(v) => v.len(),
            ProfileSpec::Sine { mean, .. } => mean.len(),
        }
    }

    /// Pointwise evaluation at `x` on the unit torus.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        match self {
            ProfileSpec::Const(v) => v.clone(),
            ProfileSpec::Sine { mean, amp } => {
                let s = (TAU * x).sin();
                mean.iter().zip(amp).map(|(&m, &a)| m + a * s).collect()
            }
        }
    }

    /// Cell-midpoint sampling on an `n_cells` grid.
    pub fn profile(&self, n_cells: usize) -> Result<Profile, SolverError> {
        Profile::from_fn(n_cells, self.n_comp(), |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        let c = ProfileSpec::parse("const:0.1,0.4", 2).unwrap();
        assert_eq!(c.eval(0.3), vec![0.1, 0.4]);
        let s = ProfileSpec::parse("sine:0,0,0.4,0.1", 2).unwrap();
        assert_eq!(s.eval(0.0), vec![0.0, 0.4]);
        let v = s.eval(0.25);
        assert!((v[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(ProfileSpec::parse("sine:1,2,3", 2).is_err());
        assert!(ProfileSpec::parse("const:1", 2).is_err());
        assert!(ProfileSpec::parse("step:1,2", 2).is_err());
        assert!(ProfileSpec::parse("const:one,two", 2).is_err());
    }
}
