//! Model file format.
//!
//! A model is a single UTF-8 JSON document:
//!
//! ```json
//! {
//!   "states": ["-1", "0", "+1"],
//!   "n_cons": 2,
//!   "xi": [[-1, 0], [0, 1], [1, 0]],
//!   "base_measure": [0.3333, 0.3333, 0.3334],
//!   "rates": [
//!     {"from": ["-1", "+1"], "to": ["+1", "-1"], "rate": 3.0}
//!   ]
//! }
//! ```
//!
//! State references in `rates` are by label. Unknown fields are rejected.
//! Loading runs the structural invariants of [`SpinModel::new`] but does
//! not run the dynamical validators; that is an explicit step.

use super::{ModelError, SpinModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    states: Vec<String>,
    n_cons: usize,
    xi: Vec<Vec<i64>>,
    base_measure: Vec<f64>,
    rates: Vec<RateEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateEntry {
    from: [String; 2],
    to: [String; 2],
    rate: f64,
}

/// Parses a model from a JSON string.
pub fn load_model_str(document: &str) -> Result<SpinModel, ModelError> {
    let file: ModelFile = serde_json::from_str(document)
        .map_err(|e| ModelError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let lookup = |label: &str| {
        file.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| ModelError::Schema {
                field: "rates".into(),
                detail: format!("unknown state label `{label}`"),
            })
    };
    let mut rates = Vec::with_capacity(file.rates.len());
    for entry in &file.rates {
        rates.push((
            (lookup(&entry.from[0])?, lookup(&entry.from[1])?),
            (lookup(&entry.to[0])?, lookup(&entry.to[1])?),
            entry.rate,
        ));
    }
    SpinModel::new(file.states, file.n_cons, file.xi, file.base_measure, rates).map_err(schema_wrap)
}

/// Loads a model from a file path.
pub fn load_model(path: &Path) -> Result<SpinModel, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
    load_model_str(&text)
}

/// Serialises a model to the canonical JSON document. The rate list is
/// emitted in the deterministic storage order, so save/load round-trips
/// byte-identically.
pub fn save_model_string(model: &SpinModel) -> String {
    let file = ModelFile {
        states: model.states().to_vec(),
        n_cons: model.n_cons(),
        xi: (0..model.n_states())
            .map(|w| model.xi(w).to_vec())
            .collect(),
        base_measure: model.base_measure().to_vec(),
        rates: model
            .transitions()
            .map(|(from, to, rate)| RateEntry {
                from: [
                    model.state_label(from.0).to_string(),
                    model.state_label(from.1).to_string(),
                ],
                to: [
                    model.state_label(to.0).to_string(),
                    model.state_label(to.1).to_string(),
                ],
                rate,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("model serialisation cannot fail");
    out.push('\n');
    out
}

/// Writes the canonical JSON document to a file.
pub fn save_model(model: &SpinModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, save_model_string(model))
        .map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))
}

/// Structural failures during load are schema errors; keep parse errors
/// (malformed JSON) distinct.
fn schema_wrap(err: ModelError) -> ModelError {
    match err {
        e @ (ModelError::Parse(_) | ModelError::Schema { .. }) => e,
        other => ModelError::Schema {
            field: "model".into(),
            detail: other.to_string(),
        },
    }
}
