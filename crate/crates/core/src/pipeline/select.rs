use std::collections::BTreeMap;

use super::{PipelineError, Result, Setup};

/// Setup constraint for a test language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// The language has training data; any setup may be selected on dev.
    Unconstrained,
    /// No training data: the multilingual model, chosen on multilingual
    /// validation, serves it.
    ForcedMulti,
}

pub fn route_language<S: AsRef<str>>(language: &str, known_languages: &[S]) -> Route {
    if known_languages.iter().any(|k| k.as_ref() == language) {
        Route::Unconstrained
    } else {
        Route::ForcedMulti
    }
}

/// The setup with the highest dev score; ties follow [`Setup::TIE_ORDER`].
pub fn select_setup(dev_scores: &BTreeMap<Setup, f64>) -> Result<Setup> {
    if dev_scores.is_empty() {
        return Err(PipelineError::Selection("no setup was scored on dev".into()));
    }
    if let Some((s, v)) = dev_scores.iter().find(|(_, v)| !v.is_finite()) {
        return Err(PipelineError::Selection(format!("dev score of {s} is {v}")));
    }
    let mut best: Option<(Setup, f64)> = None;
    for setup in Setup::TIE_ORDER {
        if let Some(&score) = dev_scores.get(&setup) {
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((setup, score));
            }
        }
    }
    Ok(best.expect("non-empty").0)
}
