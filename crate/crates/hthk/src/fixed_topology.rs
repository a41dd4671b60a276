//! The final value at constant topology and related equilibrium tests.
//!
//! `fvct(y) = lim_{t->inf} A(y)^t y` is computed in closed form from the
//! canonical decomposition: closed components collapse to their mean,
//! moderate components to the stationary distribution of their block, and
//! open-minded entries solve the resolvent system `(I - Theta) v = rhs`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{solve, Mat};
use crate::model::{build_digraph, build_matrix, AveragingMatrix, OpinionState};
use crate::structure::{analyze_structure, MindClass, StructureReport};

pub const DEFAULT_EQUILIBRIUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalValueResult {
    /// The limit vector, in original agent order.
    pub fvct: Vec<f64>,
    /// Per moderate SCC: members and the rank-1 limit block `M* = 1 pi^T`.
    pub m_star: Vec<(Vec<usize>, Mat)>,
    /// Solution of the open-minded resolvent system, one entry per
    /// open-minded node in canonical order.
    pub open_solution: Vec<f64>,
    /// Whether the input vector was already an equilibrium.
    pub is_equilibrium_input: bool,
}

/// Stationary distribution of an irreducible aperiodic row-stochastic block:
/// solves `pi^T M = pi^T` with `sum(pi) = 1` as a direct linear system.
fn stationary_distribution(block: &Mat) -> Result<Vec<f64>, Error> {
    let n = block.rows;
    let mut sys = Mat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    // rows 0..n-1: (M^T - I) pi = 0, with the last equation replaced by the
    // normalization sum(pi) = 1
    for i in 0..n - 1 {
        for j in 0..n {
            sys[(i, j)] = block[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    solve(&sys, &rhs)
}

/// `fvct` for a fixed matrix/structure pair applied to an arbitrary opinion
/// vector of matching length. This is the frozen-topology route used by the
/// constant-topology analyses; [`fvct`] wraps it with digraph construction.
pub fn fvct_frozen(
    matrix: &AveragingMatrix,
    structure: &StructureReport,
    opinions: &[f64],
) -> Result<FinalValueResult, Error> {
    let n = matrix.n();
    if opinions.len() != n {
        return Err(Error::Dimension { expected: n, got: opinions.len() });
    }
    let mut f = vec![0.0; n];

    for (k, comp) in structure.sccs.iter().enumerate() {
        match structure.class_of[k] {
            MindClass::ClosedMinded => {
                let mean = comp.iter().map(|&i| opinions[i]).sum::<f64>() / comp.len() as f64;
                for &i in comp {
                    f[i] = mean;
                }
            }
            MindClass::ModerateMinded | MindClass::OpenMinded => {}
        }
    }

    let mut m_star = Vec::new();
    for (k, comp) in structure.sccs.iter().enumerate() {
        if structure.class_of[k] != MindClass::ModerateMinded {
            continue;
        }
        let mut block = Mat::zeros(comp.len(), comp.len());
        for (a, &i) in comp.iter().enumerate() {
            for (b, &j) in comp.iter().enumerate() {
                block[(a, b)] = matrix.entry(i, j);
            }
        }
        let pi = stationary_distribution(&block)
            .map_err(|e| Error::Structural(format!("moderate block stationary solve: {e}")))?;
        let value: f64 = pi.iter().zip(comp.iter()).map(|(&p, &i)| p * opinions[i]).sum();
        for &i in comp {
            f[i] = value;
        }
        let mut limit = Mat::zeros(comp.len(), comp.len());
        for a in 0..comp.len() {
            for b in 0..comp.len() {
                limit[(a, b)] = pi[b];
            }
        }
        m_star.push((comp.clone(), limit));
    }

    // open-minded entries: (I - Theta) v = Theta_C (C y_C) + Theta_M (M* y_M),
    // assembled directly as the per-row sum of a_ij * f_j over non-open j
    let open_nodes: Vec<usize> = structure
        .canonical_perm
        .iter()
        .copied()
        .filter(|&i| structure.is_open(i))
        .collect();
    let mut open_solution = Vec::new();
    if !open_nodes.is_empty() {
        let no = open_nodes.len();
        let mut sys = Mat::zeros(no, no);
        let mut rhs = vec![0.0; no];
        for (a, &i) in open_nodes.iter().enumerate() {
            for (b, &j) in open_nodes.iter().enumerate() {
                sys[(a, b)] = (if a == b { 1.0 } else { 0.0 }) - matrix.entry(i, j);
            }
            rhs[a] = (0..n)
                .filter(|&j| !structure.is_open(j))
                .map(|j| matrix.entry(i, j) * f[j])
                .sum();
        }
        open_solution = solve(&sys, &rhs).map_err(|e| {
            Error::Structural(format!(
                "open-minded resolvent solve failed (rho(Theta) >= 1?): {e}"
            ))
        })?;
        for (a, &i) in open_nodes.iter().enumerate() {
            f[i] = open_solution[a];
        }
    }

    let applied = matrix.apply(opinions);
    let residual = applied
        .iter()
        .zip(opinions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(FinalValueResult {
        fvct: f,
        m_star,
        open_solution,
        is_equilibrium_input: residual <= DEFAULT_EQUILIBRIUM_TOL,
    })
}

/// Final value at constant topology of `state`.
pub fn fvct(state: &OpinionState, tie_tol: f64) -> Result<FinalValueResult, Error> {
    let digraph = build_digraph(state, tie_tol);
    let matrix = build_matrix(&digraph);
    let structure = analyze_structure(&digraph);
    fvct_frozen(&matrix, &structure, state.opinions())
}

/// True iff `||A(y) y - y||_inf <= tol`.
pub fn is_equilibrium(state: &OpinionState, tol: f64, tie_tol: f64) -> bool {
    assert!(tol > 0.0);
    let matrix = build_matrix(&build_digraph(state, tie_tol));
    let applied = matrix.apply(state.opinions());
    applied
        .iter()
        .zip(state.opinions())
        .all(|(a, b)| (a - b).abs() <= tol)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prop1Part2Report {
    /// `G_r(y) == G_r(fvct(y))` as exact edge-set equality.
    pub same_topology: bool,
    pub fvct_is_equilibrium: bool,
    pub no_moderate: bool,
    /// Per-WCC extremes of `fvct(y)` attained inside closed components.
    pub extremes_closed_minded: bool,
}

/// Evaluates the four properties of Proposition-style part 2 independently,
/// so tests can assert the implication `same_topology => rest`.
pub fn check_prop1_part2(state: &OpinionState, tie_tol: f64) -> Result<Prop1Part2Report, Error> {
    let digraph = build_digraph(state, tie_tol);
    let structure = analyze_structure(&digraph);
    let result = fvct(state, tie_tol)?;
    let f_state = state.with_opinions(result.fvct.clone())?;
    let f_digraph = build_digraph(&f_state, tie_tol);
    let f_structure = analyze_structure(&f_digraph);

    let same_topology = digraph == f_digraph;
    let fvct_is_equilibrium = is_equilibrium(&f_state, 1e-9, tie_tol);
    let no_moderate = !structure.class_of.contains(&MindClass::ModerateMinded);

    let f = &result.fvct;
    let extremes_closed_minded = f_structure.wccs.iter().all(|members| {
        let lo = members.iter().map(|&i| f[i]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&i| f[i]).fold(f64::NEG_INFINITY, f64::max);
        let attained_in_closed = |target: f64| {
            members.iter().any(|&i| {
                (f[i] - target).abs() <= 1e-12
                    && f_structure.class_of_node(i) == MindClass::ClosedMinded
            })
        };
        attained_in_closed(lo) && attained_in_closed(hi)
    });

    Ok(Prop1Part2Report {
        same_topology,
        fvct_is_equilibrium,
        no_moderate,
        extremes_closed_minded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(y: &[f64], r: &[f64]) -> OpinionState {
        OpinionState::new(y.to_vec(), r.to_vec()).unwrap()
    }

    #[test]
    fn fvct_of_open_minded_middle_agent() {
        // agent 2 solves (1 - 1/3) v = 1/3 * 0 + 1/3 * 1
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let result = fvct(&s, 0.0).unwrap();
        assert!((result.fvct[0] - 0.0).abs() < 1e-14);
        assert!((result.fvct[1] - 0.5).abs() < 1e-14);
        assert!((result.fvct[2] - 1.0).abs() < 1e-14);
        assert!(!result.is_equilibrium_input);
    }

    #[test]
    fn fvct_of_moderate_triangle_is_stationary_mean() {
        // M = [[1/2,1/2,0],[1/3,1/3,1/3],[0,1/2,1/2]], pi = (2/7, 3/7, 2/7)
        let s = state(&[0.0, 0.5, 1.0], &[0.6, 0.6, 0.6]);
        let result = fvct(&s, 0.0).unwrap();
        for v in &result.fvct {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let (members, m_star) = &result.m_star[0];
        assert_eq!(members, &vec![0, 1, 2]);
        let pi = [2.0 / 7.0, 3.0 / 7.0, 2.0 / 7.0];
        for a in 0..3 {
            for b in 0..3 {
                assert!((m_star[(a, b)] - pi[b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fvct_of_equilibrium_is_itself() {
        let s = state(&[0.0, 0.5, 1.0], &[0.4, 1.0, 0.25]);
        let result = fvct(&s, 0.0).unwrap();
        assert!(result.is_equilibrium_input);
        for (a, b) in result.fvct.iter().zip(s.opinions()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fvct_is_fixed_point_of_frozen_matrix() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let digraph = build_digraph(&s, 0.0);
        let matrix = build_matrix(&digraph);
        let result = fvct(&s, 0.0).unwrap();
        let applied = matrix.apply(&result.fvct);
        for (a, b) in applied.iter().zip(&result.fvct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn equilibrium_detection() {
        let consensus = state(&[0.3, 0.3, 0.3], &[0.1, 0.2, 0.3]);
        assert!(is_equilibrium(&consensus, 1e-12, 0.0));

        // boundary edge |0 - 0.5| = 0.5 = r_1 pulls agent 1 off its value
        let tight = state(&[0.0, 0.5, 1.0], &[0.5, 1.0, 0.25]);
        assert!(!is_equilibrium(&tight, 1e-12, 0.0));

        let loose = state(&[0.0, 0.5, 1.0], &[0.4, 1.0, 0.25]);
        assert!(is_equilibrium(&loose, 1e-12, 0.0));
    }

    #[test]
    fn prop1_part2_on_equilibrium() {
        let s = state(&[0.0, 0.5, 1.0], &[0.4, 1.0, 0.25]);
        let report = check_prop1_part2(&s, 0.0).unwrap();
        assert!(report.same_topology);
        assert!(report.fvct_is_equilibrium);
        assert!(report.no_moderate);
        assert!(report.extremes_closed_minded);
    }

    #[test]
    fn prop1_part2_on_moderate_triangle() {
        let s = state(&[0.0, 0.5, 1.0], &[0.6, 0.6, 0.6]);
        let report = check_prop1_part2(&s, 0.0).unwrap();
        // fvct is consensus, whose digraph is complete, unlike the original
        assert!(!report.same_topology);
        assert!(!report.no_moderate);
    }

    #[test]
    fn prop1_part2_on_consensus() {
        let s = state(&[0.4, 0.4], &[0.1, 0.1]);
        let report = check_prop1_part2(&s, 0.0).unwrap();
        assert!(report.same_topology);
        assert!(report.fvct_is_equilibrium);
        assert!(report.no_moderate);
        assert!(report.extremes_closed_minded);
    }
}
