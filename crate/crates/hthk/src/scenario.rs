//! Scenario files: a flat TOML document carrying the initial state and run
//! options.
//!
//! ```toml
//! x0 = [0.0, 0.6, 1.0]
//! r = [0.5, 1.0, 0.25]   # or a single number broadcast to every agent
//! # optional, with these defaults:
//! n = 3
//! tie_tol = 0.0
//! convergence_tol = 1e-12
//! max_steps = 100000
//! stability_window = 100
//! mode = "free"           # or "frozen"
//! ```

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::OpinionState;
use crate::sim::Mode;

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
pub const DEFAULT_STABILITY_WINDOW: usize = 100;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    n: Option<usize>,
    x0: Vec<f64>,
    r: ScalarOrVec,
    tie_tol: Option<f64>,
    convergence_tol: Option<f64>,
    max_steps: Option<usize>,
    stability_window: Option<usize>,
    mode: Option<Mode>,
}

/// A validated scenario with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioFile {
    pub state: OpinionState,
    pub tie_tol: f64,
    pub convergence_tol: f64,
    pub max_steps: usize,
    pub stability_window: usize,
    pub mode: Mode,
}

pub fn load_scenario(text: &str) -> Result<ScenarioFile, Error> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    let n = raw.x0.len();
    if let Some(declared) = raw.n {
        if declared != n {
            return Err(Error::Scenario(format!(
                "field 'n' = {declared} does not match x0 length {n}"
            )));
        }
    }
    let bounds = match raw.r {
        ScalarOrVec::Scalar(v) => vec![v; n],
        ScalarOrVec::Vec(v) => {
            if v.len() != n {
                return Err(Error::Scenario(format!(
                    "field 'r' has length {} but x0 has length {n}",
                    v.len()
                )));
            }
            v
        }
    };
    let state = OpinionState::new(raw.x0, bounds)
        .map_err(|e| Error::Scenario(format!("invalid state: {e}")))?;

    let tie_tol = raw.tie_tol.unwrap_or(0.0);
    if !(tie_tol >= 0.0 && tie_tol.is_finite()) {
        return Err(Error::Scenario(format!(
            "field 'tie_tol' must be finite and >= 0 (got {tie_tol})"
        )));
    }
    let convergence_tol = raw.convergence_tol.unwrap_or(DEFAULT_CONVERGENCE_TOL);
    if !(convergence_tol >= 0.0 && convergence_tol.is_finite()) {
        return Err(Error::Scenario(format!(
            "field 'convergence_tol' must be finite and >= 0 (got {convergence_tol})"
        )));
    }
    let max_steps = raw.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
    if max_steps == 0 {
        return Err(Error::Scenario("field 'max_steps' must be >= 1".into()));
    }
    let stability_window = raw.stability_window.unwrap_or(DEFAULT_STABILITY_WINDOW);
    if stability_window == 0 {
        return Err(Error::Scenario("field 'stability_window' must be >= 1".into()));
    }

    Ok(ScenarioFile {
        state,
        tie_tol,
        convergence_tol,
        max_steps,
        stability_window,
        mode: raw.mode.unwrap_or(Mode::Free),
    })
}

impl ScenarioFile {
    /// Normalized serialization: scalar bounds expanded, defaults explicit.
    /// Loading the output reproduces the same scenario.
    pub fn to_normalized_toml(&self) -> String {
        let fmt_vec = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", items.join(", "))
        };
        format!(
            "n = {}\nx0 = {}\nr = {}\ntie_tol = {:?}\nconvergence_tol = {:?}\n\
             max_steps = {}\nstability_window = {}\nmode = \"{}\"\n",
            self.state.n(),
            fmt_vec(self.state.opinions()),
            fmt_vec(self.state.bounds()),
            self.tie_tol,
            self.convergence_tol,
            self.max_steps,
            self.stability_window,
            match self.mode {
                Mode::Free => "free",
                Mode::Frozen => "frozen",
            },
        )
    }
}
