//! Equi-topology neighborhoods of an opinion vector and the associated
//! constant-topology sufficient condition.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fixed_topology::{fvct, is_equilibrium, DEFAULT_EQUILIBRIUM_TOL};
use crate::model::{build_digraph, step, OpinionState, ProximityDigraph};
use crate::structure::{analyze_structure, MindClass};

/// The vectors `epsilon(z)` and `delta(z)` around a reference vector `z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub center: OpinionState,
    /// `epsilon_i = 0.5 min_{j != i, R in {r_i, r_j}} ||z_i - z_j| - R|`
    pub epsilon: Vec<f64>,
    /// `delta_i = min { epsilon_j : j is a predecessor of i in G_r(z) }`,
    /// where every node is its own predecessor via its self-loop.
    pub delta: Vec<f64>,
}

/// Node sets reaching each node: `predecessors[i]` holds every `j` with a
/// directed path `j -> ... -> i` (including `i` itself).
fn predecessor_sets(g: &ProximityDigraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in g.edges() {
        reverse[j].push(i);
    }
    (0..n)
        .map(|i| {
            let mut seen = vec![false; n];
            let mut queue = vec![i];
            seen[i] = true;
            while let Some(v) = queue.pop() {
                for &w in &reverse[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            (0..n).filter(|&j| seen[j]).collect()
        })
        .collect()
}

pub fn neighborhood_spec(center: &OpinionState, tie_tol: f64) -> Result<NeighborhoodSpec, Error> {
    let n = center.n();
    if n < 2 {
        return Err(Error::SingleAgent);
    }
    let z = center.opinions();
    let r = center.bounds();
    let epsilon: Vec<f64> = (0..n)
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let gap = (z[i] - z[j]).abs();
                for radius in [r[i], r[j]] {
                    best = best.min((gap - radius).abs());
                }
            }
            0.5 * best
        })
        .collect();
    let digraph = build_digraph(center, tie_tol);
    let preds = predecessor_sets(&digraph);
    let delta = (0..n)
        .map(|i| preds[i].iter().map(|&j| epsilon[j]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(NeighborhoodSpec { center: center.clone(), epsilon, delta })
}

fn in_box(spec_center: &[f64], radii: &[f64], y: &OpinionState) -> Result<bool, Error> {
    if y.n() != spec_center.len() {
        return Err(Error::Dimension { expected: spec_center.len(), got: y.n() });
    }
    Ok(y.opinions().iter().zip(spec_center).zip(radii).all(|((&yi, &zi), &rad)| {
        let dev = (yi - zi).abs();
        if rad > 0.0 {
            dev < rad
        } else {
            dev == 0.0
        }
    }))
}

/// Membership in the equi-topology neighborhood: strict inequality against
/// `epsilon_i > 0`, exact equality where `epsilon_i = 0`.
pub fn in_equi_topology(spec: &NeighborhoodSpec, y: &OpinionState) -> Result<bool, Error> {
    in_box(spec.center.opinions(), &spec.epsilon, y)
}

pub fn in_invariant_equi_topology(spec: &NeighborhoodSpec, y: &OpinionState) -> Result<bool, Error> {
    in_box(spec.center.opinions(), &spec.delta, y)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// True iff `z` is an equilibrium and `y0` lies in its invariant
    /// equi-topology neighborhood.
    pub applicable: bool,
    pub conclusions_verified: bool,
    pub first_violation: Option<usize>,
}

/// Simulates `y0` for `horizon` steps and verifies the constant-topology
/// conclusions: containment in the equi-topology neighborhood of `z`, a
/// digraph equal to `G_r(z)`, no moderate-minded component, and a
/// non-increasing sup-distance to `fvct(y0)`.
pub fn check_theorem1(
    z: &OpinionState,
    y0: &OpinionState,
    horizon: usize,
    tie_tol: f64,
) -> Result<Theorem1Report, Error> {
    assert!(horizon > 0);
    let spec = neighborhood_spec(z, tie_tol)?;
    let applicable = is_equilibrium(z, DEFAULT_EQUILIBRIUM_TOL, tie_tol)
        && in_invariant_equi_topology(&spec, y0)?;
    if !applicable {
        return Ok(Theorem1Report {
            applicable: false,
            conclusions_verified: false,
            first_violation: None,
        });
    }

    let z_digraph = build_digraph(z, tie_tol);
    let target = fvct(y0, tie_tol)?.fvct;
    let dist =
        |s: &OpinionState| -> f64 {
            s.opinions().iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };

    let mut current = y0.clone();
    let mut prev_dist = dist(&current);
    for t in 0..=horizon {
        let digraph = build_digraph(&current, tie_tol);
        let ok_step = in_equi_topology(&spec, &current)?
            && digraph == z_digraph
            && !analyze_structure(&digraph)
                .class_of
                .contains(&MindClass::ModerateMinded)
            && dist(&current) <= prev_dist + 1e-12;
        if !ok_step {
            return Ok(Theorem1Report {
                applicable: true,
                conclusions_verified: false,
                first_violation: Some(t),
            });
        }
        prev_dist = dist(&current);
        if t < horizon {
            current = step(&current, tie_tol);
        }
    }
    Ok(Theorem1Report { applicable: true, conclusions_verified: true, first_violation: None })
}
