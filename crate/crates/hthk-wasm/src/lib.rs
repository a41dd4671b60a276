//! Browser bindings: thin JSON-in / JSON-out wrappers around the library so
//! the demo page needs no generated TypeScript glue beyond wasm-bindgen's.
//!
//! Build with `wasm-pack build --target web crates/hthk-wasm`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use hthk::{
    analyze_structure, build_digraph, build_matrix, detect_tau, leader_report, simulate,
    MindClass, Mode, OpinionState,
};

#[derive(Deserialize)]
struct Request {
    x0: Vec<f64>,
    r: Vec<f64>,
    #[serde(default)]
    frozen: bool,
    #[serde(default = "default_max_steps")]
    max_steps: usize,
}

fn default_max_steps() -> usize {
    20_000
}

fn parse(request_json: &str) -> Result<(Request, OpinionState), String> {
    let req: Request = serde_json::from_str(request_json).map_err(|e| e.to_string())?;
    let state = OpinionState::new(req.x0.clone(), req.r.clone()).map_err(|e| e.to_string())?;
    Ok((req, state))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Runs the dynamics and returns the dense trajectory plus convergence data.
/// Request: `{"x0": [...], "r": [...], "frozen": false, "max_steps": 20000}`.
#[wasm_bindgen]
pub fn demo_simulate(request_json: &str) -> Result<String, String> {
    let (req, state) = parse(request_json)?;
    let mode = if req.frozen { Mode::Frozen } else { Mode::Free };
    let report =
        simulate(&state, req.max_steps, 1e-12, mode, 0.0).map_err(|e| e.to_string())?;

    // dense replay for plotting (the report thins long runs)
    let frozen_digraph = build_digraph(&state, 0.0);
    let mut cur = state.clone();
    let mut rows = vec![cur.opinions().to_vec()];
    for _ in 0..report.steps_run {
        let digraph = match mode {
            Mode::Free => build_digraph(&cur, 0.0),
            Mode::Frozen => frozen_digraph.clone(),
        };
        cur = hthk::step_with_digraph(&cur, &digraph);
        rows.push(cur.opinions().to_vec());
    }

    #[derive(Serialize)]
    struct Out {
        rows: Vec<Vec<f64>>,
        steps_run: usize,
        converged: bool,
        tau: Option<usize>,
        topology_changes: Vec<usize>,
    }
    to_json(&Out {
        rows,
        steps_run: report.steps_run,
        converged: report.converged,
        tau: detect_tau(&report, 100)
            .or(if report.converged { report.tau_candidate } else { None }),
        topology_changes: report.topology_changes.clone(),
    })
}

/// Classifies agents at the initial state: per-agent class plus the digraph
/// edges, both 0-based for direct canvas use.
#[wasm_bindgen]
pub fn demo_classify(request_json: &str) -> Result<String, String> {
    let (_, state) = parse(request_json)?;
    let digraph = build_digraph(&state, 0.0);
    let st = analyze_structure(&digraph);

    #[derive(Serialize)]
    struct Out {
        classes: Vec<&'static str>,
        sccs: Vec<Vec<usize>>,
        edges: Vec<(usize, usize)>,
    }
    to_json(&Out {
        classes: (0..state.n())
            .map(|i| match st.class_of_node(i) {
                MindClass::ClosedMinded => "closed",
                MindClass::ModerateMinded => "moderate",
                MindClass::OpenMinded => "open",
            })
            .collect(),
        sccs: st.sccs.clone(),
        edges: digraph.edges().collect(),
    })
}

/// Per-component spectral radii and leader assignment at the initial state.
#[wasm_bindgen]
pub fn demo_leaders(request_json: &str) -> Result<String, String> {
    let (_, state) = parse(request_json)?;
    let digraph = build_digraph(&state, 0.0);
    let st = analyze_structure(&digraph);
    let report = leader_report(&build_matrix(&digraph), &st).map_err(|e| e.to_string())?;
    to_json(&report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_round_trip() {
        let out = demo_simulate(r#"{"x0": [0.0, 0.6, 1.0], "r": [0.5, 1.0, 0.25]}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["tau"], 0);
        assert_eq!(v["converged"], true);
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), v["steps_run"].as_u64().unwrap() as usize + 1);
        let last = rows.last().unwrap().as_array().unwrap();
        assert!((last[1].as_f64().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn classify_reports_classes_and_edges() {
        let out = demo_classify(r#"{"x0": [0.0, 0.6, 1.0], "r": [0.5, 1.0, 0.25]}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["classes"], serde_json::json!(["closed", "open", "closed"]));
        assert_eq!(v["edges"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn leaders_exposes_rho() {
        let out = demo_leaders(r#"{"x0": [0.0, 0.6, 1.0], "r": [0.5, 1.0, 0.25]}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let entries = v["entries"].as_array().unwrap();
        assert_eq!(entries.len(), 1);
        assert!((entries[0]["rho"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_input_is_an_error_not_a_panic() {
        assert!(demo_simulate("not json").is_err());
        assert!(demo_simulate(r#"{"x0": [0.1], "r": [0.0]}"#).is_err());
    }
}
