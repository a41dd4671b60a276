//! Leader SCCs of the open-minded subgraph and the fixed-topology
//! rate/direction analysis.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fixed_topology::fvct_frozen;
use crate::linalg::{spectral_radius, Mat};
use crate::model::{
    build_digraph, build_matrix, step_with_digraph, AveragingMatrix, OpinionState,
};
use crate::structure::{analyze_structure, MindClass, StructureReport};

pub const LEADER_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeaderEntry {
    /// SCC index in the structure report.
    pub scc: usize,
    pub members: Vec<usize>,
    /// Spectral radius of this SCC's adjacency block.
    pub rho: f64,
    /// Open-minded successor SCCs (transitive, including this one).
    pub open_successors: Vec<usize>,
    /// SCC index of the leader: maximal rho among the open successors, ties
    /// resolved toward the SCC itself, else the smallest SCC index.
    pub leader: usize,
    pub leader_rho: f64,
    /// Another successor's rho ties with the leader's at resolution 1e-10.
    pub tie: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeaderReport {
    pub entries: Vec<LeaderEntry>,
}

impl LeaderReport {
    pub fn entry_for_scc(&self, scc: usize) -> Option<&LeaderEntry> {
        self.entries.iter().find(|e| e.scc == scc)
    }
}

fn scc_block(matrix: &AveragingMatrix, members: &[usize]) -> Mat {
    let mut block = Mat::zeros(members.len(), members.len());
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            block[(a, b)] = matrix.entry(i, j);
        }
    }
    block
}

/// Transitive successor sets in the condensation.
fn condensation_reachability(structure: &StructureReport) -> Vec<Vec<usize>> {
    let m = structure.sccs.len();
    (0..m)
        .map(|k| {
            let mut seen = vec![false; m];
            let mut queue = vec![k];
            seen[k] = true;
            while let Some(v) = queue.pop() {
                for &w in &structure.condensation[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            (0..m).filter(|&x| seen[x]).collect()
        })
        .collect()
}

pub fn leader_report(
    matrix: &AveragingMatrix,
    structure: &StructureReport,
) -> Result<LeaderReport, Error> {
    let reach = condensation_reachability(structure);
    let m = structure.sccs.len();
    let rho: Vec<Option<f64>> = (0..m)
        .map(|k| {
            if structure.class_of[k] == MindClass::OpenMinded {
                spectral_radius(&scc_block(matrix, &structure.sccs[k])).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, _>>()?;

    let mut entries = Vec::new();
    for k in 0..m {
        let Some(self_rho) = rho[k] else { continue };
        let open_successors: Vec<usize> = reach[k]
            .iter()
            .copied()
            .filter(|&s| structure.class_of[s] == MindClass::OpenMinded)
            .collect();
        let best = open_successors
            .iter()
            .map(|&s| rho[s].unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let near: Vec<usize> = open_successors
            .iter()
            .copied()
            .filter(|&s| rho[s].unwrap() >= best - LEADER_TIE_TOL)
            .collect();
        let leader = if near.contains(&k) {
            k
        } else {
            *near.iter().min_by_key(|&&s| structure.sccs[s][0]).unwrap()
        };
        entries.push(LeaderEntry {
            scc: k,
            members: structure.sccs[k].clone(),
            rho: self_rho,
            open_successors,
            leader,
            leader_rho: rho[leader].unwrap(),
            tie: near.len() > 1,
        });
    }
    Ok(LeaderReport { entries })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KLimit {
    pub agent: usize,
    pub target_rho: f64,
    /// Last defined factor along the frozen trajectory.
    pub final_k: Option<f64>,
    pub achieved: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem3Report {
    /// `fvct` under the frozen matrix is constant along the trajectory.
    pub fvct_constant: bool,
    pub no_moderate: bool,
    /// One entry per open-minded agent starting more than 1e-12 from its
    /// final value.
    pub k_limits: Vec<KLimit>,
    pub direction_entrained: bool,
    /// The free dynamics left the initial topology at some step; the
    /// analysis still ran in frozen mode.
    pub topology_drifted: bool,
    /// The horizon was too short to settle a direction verdict.
    pub direction_inconclusive: bool,
    pub leaders: LeaderReport,
}

const K_LIMIT_TOL: f64 = 1e-6;
/// Residuals at or below this count as converged: near the subnormal range
/// quotients of successive residuals quantize and stop meaning anything.
const RESIDUAL_FLOOR: f64 = 1e-280;
/// Initial distances at or below this are treated as already at the final
/// value (the fvct solve itself is only accurate to machine precision).
const DEGENERATE_TOL: f64 = 1e-12;
const FVCT_CONSTANT_TOL: f64 = 1e-9;
const SIGN_LOOKAHEAD: usize = 10;

/// Runs the dynamics with the matrix frozen at `A(x(0))` and verifies the
/// constant-topology conclusions: invariant final value, factor convergence
/// to the leader's spectral radius, and direction entrainment of follower
/// SCCs.
///
/// The residual `x(t) - fvct` is iterated directly through the frozen matrix
/// (the exact linear recursion) so factors stay accurate long after the
/// opinions themselves have agreed to machine precision.
pub fn check_theorem3(
    state: &OpinionState,
    horizon: usize,
    tie_tol: f64,
) -> Result<Theorem3Report, Error> {
    assert!(horizon > 0);
    let digraph = build_digraph(state, tie_tol);
    let matrix = build_matrix(&digraph);
    let structure = analyze_structure(&digraph);
    let leaders = leader_report(&matrix, &structure)?;
    let no_moderate = !structure.class_of.contains(&MindClass::ModerateMinded);
    let f0 = fvct_frozen(&matrix, &structure, state.opinions())?.fvct;
    let n = state.n();

    // residual trajectory d(t+1) = A d(t)
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    residuals.push(state.opinions().iter().zip(&f0).map(|(a, b)| a - b).collect());
    // In exact arithmetic the residual converges to zero, but the float
    // iteration stalls at an ulp-level fixed point (closed blocks cannot
    // average to exactly zero, and the fvct solve itself is off by an ulp),
    // which would drag every downstream factor toward 1. Coordinates that
    // reach that dead zone are snapped to exact zero.
    let d0_sup = residuals[0].iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let snap = 1e-13 * d0_sup;
    for _ in 0..horizon {
        let mut next = matrix.apply(residuals.last().unwrap());
        for v in &mut next {
            if v.abs() <= snap {
                *v = 0.0;
            }
        }
        residuals.push(next);
    }

    // opinion trajectory, for topology-drift detection and fvct sampling
    let mut topology_drifted = false;
    let mut fvct_constant = true;
    let mut current = state.clone();
    let mut check_step = 1usize;
    for t in 1..=horizon {
        current = step_with_digraph(&current, &digraph);
        if t == check_step || t == horizon {
            if build_digraph(&current, tie_tol) != digraph {
                topology_drifted = true;
            }
            let ft = fvct_frozen(&matrix, &structure, current.opinions())?.fvct;
            let dev = ft.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dev > FVCT_CONSTANT_TOL {
                fvct_constant = false;
            }
            check_step *= 2;
        }
    }

    let mut k_limits = Vec::new();
    for i in 0..n {
        if !structure.is_open(i) || residuals[0][i].abs() <= DEGENERATE_TOL {
            continue;
        }
        let entry = leaders.entry_for_scc(structure.scc_of[i]).unwrap();
        let target = entry.leader_rho;
        let mut final_k = None;
        let mut vanished = false;
        for t in 0..horizon {
            let d = residuals[t][i];
            let d_next = residuals[t + 1][i];
            if d.abs() <= RESIDUAL_FLOOR || d_next == 0.0 {
                vanished = true;
                break;
            }
            final_k = Some(d_next / d);
        }
        // a residual that died out converged at least as fast as any rate
        let achieved = vanished
            || matches!(final_k, Some(k) if (k - target).abs() <= K_LIMIT_TOL);
        k_limits.push(KLimit { agent: i, target_rho: target, final_k, achieved });
    }

    // direction entrainment for follower SCCs with strictly smaller rho
    let sup_residual: Vec<f64> = residuals
        .iter()
        .map(|d| d.iter().fold(0.0, |m: f64, &v| m.max(v.abs())))
        .collect();
    let mut direction_entrained = true;
    let mut direction_inconclusive = false;
    for entry in &leaders.entries {
        if entry.leader == entry.scc || entry.leader_rho <= entry.rho + LEADER_TIE_TOL {
            continue;
        }
        let leader_members = &structure.sccs[entry.leader];
        // t_1: first step from which every leader member keeps a fixed sign
        // over the lookahead window
        let mut t1 = None;
        'scan: for t in 0..horizon.saturating_sub(SIGN_LOOKAHEAD) {
            for &j in leader_members {
                let s0 = residuals[t][j].signum();
                if residuals[t][j] == 0.0 {
                    continue;
                }
                for dt in 1..=SIGN_LOOKAHEAD {
                    let v = residuals[t + dt][j];
                    if v != 0.0 && v.signum() != s0 {
                        continue 'scan;
                    }
                }
            }
            t1 = Some(t);
            break;
        }
        let Some(t1) = t1 else {
            direction_inconclusive = true;
            continue;
        };
        for &j in leader_members {
            let dj = residuals[t1][j];
            if dj == 0.0 {
                continue;
            }
            for &i in &entry.members {
                for t in t1..=horizon {
                    let slack = 1e-12 * sup_residual[t].max(1e-300);
                    let ok = if dj < 0.0 {
                        residuals[t][i] <= slack
                    } else {
                        residuals[t][i] >= -slack
                    };
                    if !ok {
                        direction_entrained = false;
                    }
                }
            }
        }
    }

    Ok(Theorem3Report {
        fvct_constant,
        no_moderate,
        k_limits,
        direction_entrained,
        topology_drifted,
        direction_inconclusive,
        leaders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(y: &[f64], r: &[f64]) -> OpinionState {
        OpinionState::new(y.to_vec(), r.to_vec()).unwrap()
    }

    fn analyze(s: &OpinionState) -> (AveragingMatrix, StructureReport) {
        let g = build_digraph(s, 0.0);
        (build_matrix(&g), analyze_structure(&g))
    }

    #[test]
    fn example_single_open_agent_leads_itself() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let (a, st) = analyze(&s);
        let report = leader_report(&a, &st).unwrap();
        assert_eq!(report.entries.len(), 1);
        let entry = &report.entries[0];
        assert_eq!(entry.members, vec![1]);
        assert_eq!(entry.leader, entry.scc);
        assert!((entry.rho - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_rho_is_inverse_degree() {
        // agent 3 listens to everyone: rho = 1/4
        let s = state(&[0.0, 0.2, 0.5, 0.9], &[0.05, 0.05, 0.6, 0.05]);
        let (a, st) = analyze(&s);
        let report = leader_report(&a, &st).unwrap();
        let entry = report.entries.iter().find(|e| e.members == vec![2]).unwrap();
        assert!((entry.rho - 0.25).abs() < 1e-12);
    }

    #[test]
    fn theorem3_on_example_tracks_own_rho() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let report = check_theorem3(&s, 2000, 0.0).unwrap();
        assert!(report.fvct_constant);
        assert!(report.no_moderate);
        assert_eq!(report.k_limits.len(), 1);
        let kl = &report.k_limits[0];
        assert_eq!(kl.agent, 1);
        assert!((kl.target_rho - 1.0 / 3.0).abs() < 1e-12);
        assert!(kl.achieved, "final_k = {:?}", kl.final_k);
    }

    #[test]
    fn theorem3_on_equilibrium_is_vacuous() {
        let s = state(&[0.0, 0.5, 1.0], &[0.4, 1.0, 0.25]);
        let report = check_theorem3(&s, 100, 0.0).unwrap();
        assert!(report.fvct_constant);
        assert!(report.k_limits.is_empty());
        assert!(report.direction_entrained);
    }
}
