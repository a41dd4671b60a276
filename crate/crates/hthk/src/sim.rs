//! Trajectory driver: free (state-dependent) and frozen-topology runs with
//! topology-change bookkeeping and constant-topology-time detection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{build_digraph, step_with_digraph, OpinionState, ProximityDigraph};
use crate::structure::analyze_structure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Rebuild the proximity digraph from the current state every step.
    Free,
    /// Keep updating with the digraph of the initial state.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub opinions: Vec<f64>,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// Retained states: every step up to the dense limit, then powers of two
    /// plus a rolling tail. `topology_changes` is always exact regardless.
    pub snapshots: Vec<Snapshot>,
    /// Steps `t >= 1` at which the free digraph differs from step `t - 1`.
    pub topology_changes: Vec<usize>,
    /// Steps `t >= 1` at which the strongly connected component partition of
    /// the free digraph differs from step `t - 1`. Individual cross-component
    /// edges keep flickering long after the component structure has settled,
    /// so this is a subset of `topology_changes`.
    pub structure_changes: Vec<usize>,
    /// Step after the last recorded component-structure change; 0 when the
    /// partition never moved.
    pub tau_candidate: Option<usize>,
    pub converged: bool,
    /// Infinity norm of the last step delta.
    pub final_residual: f64,
    pub steps_run: usize,
    pub mode: Mode,
}

impl TrajectoryReport {
    pub fn final_opinions(&self) -> &[f64] {
        &self.snapshots.last().expect("at least the initial snapshot").opinions
    }
}

const DENSE_SNAPSHOT_LIMIT: usize = 10_000;
const TAIL_LEN: usize = 128;

/// SCC partition as a label vector: `labels[i] == labels[j]` iff `i` and `j`
/// share an SCC, with labels normalized by first occurrence so equal
/// partitions compare equal.
fn scc_partition(digraph: &ProximityDigraph) -> Vec<usize> {
    let scc_of = analyze_structure(digraph).scc_of;
    let mut relabel = vec![usize::MAX; scc_of.len()];
    let mut next = 0;
    scc_of
        .iter()
        .map(|&s| {
            if relabel[s] == usize::MAX {
                relabel[s] = next;
                next += 1;
            }
            relabel[s]
        })
        .collect()
}

pub fn simulate(
    initial: &OpinionState,
    max_steps: usize,
    convergence_tol: f64,
    mode: Mode,
    tie_tol: f64,
) -> Result<TrajectoryReport, Error> {
    assert!(convergence_tol >= 0.0);
    assert!(max_steps > 0);

    let mut current = initial.clone();
    let mut digraph = build_digraph(&current, tie_tol);
    let frozen = digraph.clone();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut tail: VecDeque<Snapshot> = VecDeque::new();
    let mut topology_changes = Vec::new();
    let mut structure_changes = Vec::new();
    let mut partition = scc_partition(&digraph);
    let mut converged = false;
    let mut final_residual = f64::INFINITY;
    let mut steps_run = 0;

    let record = |snaps: &mut Vec<Snapshot>, tail: &mut VecDeque<Snapshot>, snap: Snapshot| {
        if snap.t <= DENSE_SNAPSHOT_LIMIT || snap.t.is_power_of_two() {
            snaps.push(snap.clone());
        }
        tail.push_back(snap);
        if tail.len() > TAIL_LEN {
            tail.pop_front();
        }
    };

    record(
        &mut snapshots,
        &mut tail,
        Snapshot { t: 0, opinions: current.opinions().to_vec(), fingerprint: digraph.fingerprint() },
    );

    for t in 1..=max_steps {
        let update_digraph = match mode {
            Mode::Free => &digraph,
            Mode::Frozen => &frozen,
        };
        let next = step_with_digraph(&current, update_digraph);
        if next.opinions().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "opinion", agent: 0 });
        }
        final_residual = next
            .opinions()
            .iter()
            .zip(current.opinions())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        steps_run = t;

        let next_digraph = build_digraph(&current, tie_tol);
        if mode == Mode::Free && next_digraph != digraph {
            topology_changes.push(t);
            let next_partition = scc_partition(&next_digraph);
            if next_partition != partition {
                structure_changes.push(t);
            }
            partition = next_partition;
        }
        digraph = next_digraph;

        record(
            &mut snapshots,
            &mut tail,
            Snapshot {
                t,
                opinions: current.opinions().to_vec(),
                fingerprint: digraph.fingerprint(),
            },
        );

        if final_residual <= convergence_tol {
            converged = true;
            break;
        }
    }

    // merge the rolling tail into the retained snapshots
    for snap in tail {
        if snapshots.last().map_or(true, |s| s.t < snap.t) {
            snapshots.push(snap);
        }
    }

    let tau_candidate = Some(structure_changes.last().map_or(0, |&t| t + 1));
    Ok(TrajectoryReport {
        snapshots,
        topology_changes,
        structure_changes,
        tau_candidate,
        converged,
        final_residual,
        steps_run,
        mode,
    })
}

/// Certifies a constant-topology time candidate: the run must have converged
/// and then held the final component structure for at least
/// `stability_window` steps.
/// A run that froze outright (final residual exactly zero) certifies its
/// candidate regardless of the window, since the state no longer moves.
/// A finite run can only ever certify a candidate, never prove one.
pub fn detect_tau(report: &TrajectoryReport, stability_window: usize) -> Option<usize> {
    assert!(stability_window > 0);
    if !report.converged {
        return None;
    }
    let tau = report.tau_candidate?;
    if report.steps_run - tau >= stability_window || report.final_residual == 0.0 {
        Some(tau)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(y: &[f64], r: &[f64]) -> OpinionState {
        OpinionState::new(y.to_vec(), r.to_vec()).unwrap()
    }

    #[test]
    fn example_converges_with_constant_topology() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let report = simulate(&s, 10_000, 1e-12, Mode::Free, 0.0).unwrap();
        assert!(report.converged);
        assert_eq!(report.tau_candidate, Some(0));
        assert!(report.topology_changes.is_empty());
        let last = report.final_opinions();
        assert!((last[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let s = state(&[0.0, 0.5, 1.0], &[0.4, 1.0, 0.25]);
        let report = simulate(&s, 100, 1e-12, Mode::Free, 0.0).unwrap();
        assert!(report.converged);
        assert_eq!(report.steps_run, 1);
        assert_eq!(report.final_residual, 0.0);
    }

    #[test]
    fn free_and_frozen_agree_while_topology_constant() {
        let s = state(&[0.0, 0.6, 1.0], &[0.4, 1.0, 0.25]);
        let free = simulate(&s, 50, 0.0, Mode::Free, 0.0).unwrap();
        let frozen = simulate(&s, 50, 0.0, Mode::Frozen, 0.0).unwrap();
        for (a, b) in free.snapshots.iter().zip(&frozen.snapshots) {
            assert_eq!(a.opinions, b.opinions);
        }
    }

    #[test]
    fn range_is_nonincreasing() {
        let s = state(&[0.1, 0.35, 0.2, 0.8, 0.86, 0.5], &[0.2, 0.15, 0.3, 0.12, 0.1, 0.4]);
        let report = simulate(&s, 500, 1e-12, Mode::Free, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for snap in &report.snapshots {
            let lo = snap.opinions.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            let hi = snap.opinions.iter().fold(f64::NEG_INFINITY, |m: f64, &v| m.max(v));
            assert!(hi - lo <= prev + 1e-15);
            prev = hi - lo;
        }
    }

    #[test]
    fn determinism() {
        let s = state(&[0.3, 0.7, 0.52, 0.1], &[0.25, 0.2, 0.3, 0.15]);
        let a = simulate(&s, 300, 1e-12, Mode::Free, 0.0).unwrap();
        let b = simulate(&s, 300, 1e-12, Mode::Free, 0.0).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.topology_changes, b.topology_changes);
    }

    #[test]
    fn detect_tau_contract() {
        // limit is [0, 0.5, 1] and no distance lands on a radius boundary
        let s = state(&[0.0, 0.6, 1.0], &[0.4, 1.0, 0.25]);
        // tol 0 runs to the exact floating-point fixed state
        let report = simulate(&s, 10_000, 0.0, Mode::Free, 0.0).unwrap();
        assert!(report.converged);
        assert_eq!(report.final_residual, 0.0);
        assert_eq!(detect_tau(&report, 100), Some(0));

        let short = simulate(&s, 3, 1e-12, Mode::Free, 0.0).unwrap();
        assert!(!short.converged);
        assert_eq!(detect_tau(&short, 100), None);
    }
}
