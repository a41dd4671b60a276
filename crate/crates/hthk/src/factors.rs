//! Per-step convergence factors, the convex-hull bound, and the full
//! monotonic-convergence condition suite.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fixed_topology::fvct;
use crate::model::{build_digraph, step_with_digraph, OpinionState, ProximityDigraph};
use crate::structure::{analyze_structure, MindClass};

/// Distances below this are treated as "already at the final value" and the
/// convergence factor is left undefined.
pub const DEFAULT_DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceFactors {
    /// `Delta(y) = y - fvct(y)`.
    pub delta: Vec<f64>,
    /// `k_i = (y+_i - fvct_i) / (y_i - fvct_i)` where `|Delta_i|` exceeds
    /// the degenerate tolerance, `None` otherwise.
    pub k: Vec<Option<f64>>,
    /// Extrema of `k` over each open-minded agent's open-minded successors
    /// (transitive, including itself) with nonzero distance to final value.
    pub k_min: Vec<Option<f64>>,
    pub k_max: Vec<Option<f64>>,
    /// Open-minded out-neighbors of each agent (the agent's "open children").
    pub open_children: Vec<Vec<usize>>,
    pub fvct: Vec<f64>,
    pub next: Vec<f64>,
    pub is_open: Vec<bool>,
    pub wcc_of: Vec<usize>,
}

impl ConvergenceFactors {
    /// `k_max_{i,j}` and `k_min_{i,j}`, the pairwise combinations.
    pub fn pair_bounds(&self, i: usize, j: usize) -> Result<(f64, f64), Error> {
        let get = |v: &Vec<Option<f64>>, agent: usize| {
            v[agent].ok_or(Error::UndefinedFactor { agent: agent + 1 })
        };
        let lo = get(&self.k_min, i)?.min(get(&self.k_min, j)?);
        let hi = get(&self.k_max, i)?.max(get(&self.k_max, j)?);
        Ok((lo, hi))
    }
}

fn successor_sets(g: &ProximityDigraph) -> Vec<Vec<usize>> {
    let n = g.n();
    (0..n)
        .map(|i| {
            let mut seen = vec![false; n];
            let mut queue = vec![i];
            seen[i] = true;
            while let Some(v) = queue.pop() {
                for &w in g.out_neighbors(v) {
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

pub fn convergence_factors(
    state: &OpinionState,
    tie_tol: f64,
    degenerate_tol: f64,
) -> Result<ConvergenceFactors, Error> {
    let digraph = build_digraph(state, tie_tol);
    let structure = analyze_structure(&digraph);
    let f = fvct(state, tie_tol)?.fvct;
    let next = step_with_digraph(state, &digraph);
    let y = state.opinions();
    let n = state.n();

    let delta: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
    let k: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if delta[i].abs() > degenerate_tol {
                Some((next.opinions()[i] - f[i]) / delta[i])
            } else {
                None
            }
        })
        .collect();

    let is_open: Vec<bool> = (0..n).map(|i| structure.is_open(i)).collect();
    let successors = successor_sets(&digraph);
    let mut k_min = vec![None; n];
    let mut k_max = vec![None; n];
    for i in 0..n {
        if !is_open[i] {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &j in &successors[i] {
            if is_open[j] {
                if let Some(kj) = k[j] {
                    lo = lo.min(kj);
                    hi = hi.max(kj);
                }
            }
        }
        if lo.is_finite() {
            k_min[i] = Some(lo);
            k_max[i] = Some(hi);
        }
    }

    let open_children: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            digraph
                .out_neighbors(i)
                .iter()
                .copied()
                .filter(|&j| is_open[j])
                .collect()
        })
        .collect();

    Ok(ConvergenceFactors {
        delta,
        k,
        k_min,
        k_max,
        open_children,
        fvct: f,
        next: next.opinions().to_vec(),
        is_open,
        wcc_of: structure.wcc_of.clone(),
    })
}

/// True iff every agent satisfies one of the three per-agent monotonicity
/// cases: moving toward the final value without overshoot, or at rest on it.
pub fn check_monotone_step(state: &OpinionState, tie_tol: f64) -> Result<bool, Error> {
    let cf = convergence_factors(state, tie_tol, DEFAULT_DEGENERATE_TOL)?;
    Ok((0..state.n()).all(|i| match cf.k[i] {
        Some(k) => (-1e-12..=1.0 + 1e-12).contains(&k),
        None => (cf.next[i] - cf.fvct[i]).abs() <= DEFAULT_DEGENERATE_TOL,
    }))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// No moderate-minded component, and aligned `Delta` signs between every
    /// open-minded agent and each of its open-minded children.
    pub applicable: bool,
    pub hull_respected: bool,
}

fn zeroed(v: f64) -> f64 {
    if v.abs() <= DEFAULT_DEGENERATE_TOL {
        0.0
    } else {
        v
    }
}

/// Verifies that after one step each open-minded agent's factor lies in the
/// convex hull of its children's factors. Factors of the stepped vector are
/// evaluated under the topology of `y` (the lemma's fixed-topology setting).
pub fn check_lemma1(state: &OpinionState, tie_tol: f64) -> Result<Lemma1Report, Error> {
    let digraph = build_digraph(state, tie_tol);
    let structure = analyze_structure(&digraph);
    let cf = convergence_factors(state, tie_tol, DEFAULT_DEGENERATE_TOL)?;

    let no_moderate = !structure.class_of.contains(&MindClass::ModerateMinded);
    // Alignment must cover closed-minded children too: a closed cluster that
    // has not yet collapsed to its mean carries a nonzero displacement with
    // factor 0, and it enters the stepped factor's weighted mean like any
    // other child.
    let aligned = (0..state.n()).all(|i| {
        !cf.is_open[i]
            || digraph
                .out_neighbors(i)
                .iter()
                .all(|&j| zeroed(cf.delta[i]) * zeroed(cf.delta[j]) >= 0.0)
    });
    if !(no_moderate && aligned) {
        return Ok(Lemma1Report { applicable: false, hull_respected: false });
    }

    // one more frozen-topology step to evaluate k(y+)
    let plus = state.with_opinions(cf.next.clone())?;
    let plus2 = step_with_digraph(&plus, &digraph);
    let mut hull_respected = true;
    for i in 0..state.n() {
        if !cf.is_open[i] {
            continue;
        }
        let dplus = cf.next[i] - cf.fvct[i];
        if dplus.abs() <= DEFAULT_DEGENERATE_TOL {
            continue;
        }
        let k_plus = (plus2.opinions()[i] - cf.fvct[i]) / dplus;
        let child_ks: Vec<f64> =
            digraph.out_neighbors(i).iter().filter_map(|&j| cf.k[j]).collect();
        if child_ks.is_empty() {
            continue;
        }
        let lo = child_ks.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = child_ks.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if k_plus < lo - 1e-10 || k_plus > hi + 1e-10 {
            hull_respected = false;
        }
    }
    Ok(Lemma1Report { applicable: true, hull_respected })
}

const CONDITION5_M_CAP: usize = 100_000;
const CONDITION5_NEGLIGIBLE: f64 = 1e-9;

/// Right-hand side of the pairwise boundary condition:
/// `min{1 - k_max_{i,j}, k_min_{i,j}} * min_m,alpha,beta |1 - alpha^m Delta_j / (beta^m Delta_i)|`.
///
/// For each `m` the ratio ranges over a closed interval determined by the
/// alpha/beta interval endpoints; the per-m minimum is the distance from 1 to
/// that interval. The scan stops once the interval magnitude falls below a
/// negligibility threshold, at which point the asymptotic value 1 is folded
/// in.
pub fn theorem2_condition5_bound(
    i: usize,
    j: usize,
    factors: &ConvergenceFactors,
) -> Result<f64, Error> {
    let (kmin_ij, kmax_ij) = factors.pair_bounds(i, j)?;
    let outer = (1.0 - kmax_ij).min(kmin_ij);

    let a_lo = factors.k_min[j].ok_or(Error::UndefinedFactor { agent: j + 1 })?;
    let a_hi = factors.k_max[j].ok_or(Error::UndefinedFactor { agent: j + 1 })?;
    let b_lo = factors.k_min[i].ok_or(Error::UndefinedFactor { agent: i + 1 })?;
    let b_hi = factors.k_max[i].ok_or(Error::UndefinedFactor { agent: i + 1 })?;
    let (di, dj) = (factors.delta[i], factors.delta[j]);
    if di.abs() <= DEFAULT_DEGENERATE_TOL || dj.abs() <= DEFAULT_DEGENERATE_TOL {
        return Err(Error::UndefinedFactor { agent: if di.abs() <= dj.abs() { i + 1 } else { j + 1 } });
    }
    let q = dj / di;

    let mut inner = 1.0_f64; // the m -> infinity asymptote
    let mut converged = false;
    for m in 0..CONDITION5_M_CAP {
        let e = m as i32;
        let candidates = [
            a_lo.powi(e) / b_lo.powi(e),
            a_lo.powi(e) / b_hi.powi(e),
            a_hi.powi(e) / b_lo.powi(e),
            a_hi.powi(e) / b_hi.powi(e),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in candidates {
            let v = c * q;
            if v.is_nan() {
                continue;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() && !hi.is_finite() {
            break;
        }
        let dist = if lo <= 1.0 && 1.0 <= hi {
            0.0
        } else {
            (1.0 - lo).abs().min((1.0 - hi).abs())
        };
        inner = inner.min(dist);
        if inner == 0.0 || lo.abs().max(hi.abs()) < CONDITION5_NEGLIGIBLE {
            converged = true;
            break;
        }
    }
    if !converged && inner > 0.0 {
        return Err(Error::NonConvergence {
            what: "condition-5 ratio scan",
            max_iter: CONDITION5_M_CAP,
        });
    }
    Ok(outer * inner)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    /// Conditions 1..5 in order: same topology as fvct, order preservation,
    /// per-agent monotone step, aligned neighbor deltas, pairwise factor
    /// bound.
    pub cond: [bool; 5],
    pub all_hold: bool,
    /// Pairs where the ordering assumption had to fall back to `|Delta|`
    /// because the raw deltas have opposite signs.
    pub ambiguous_pairs: usize,
}

pub fn check_theorem2(state: &OpinionState, tie_tol: f64) -> Result<Theorem2Report, Error> {
    let digraph = build_digraph(state, tie_tol);
    let cf = convergence_factors(state, tie_tol, DEFAULT_DEGENERATE_TOL)?;
    let y = state.opinions();
    let n = state.n();
    let f = &cf.fvct;

    let f_state = state.with_opinions(f.clone())?;
    let cond1 = build_digraph(&f_state, tie_tol) == digraph;

    let cond2 = (0..n).all(|i| {
        (0..n).all(|j| y[i] < y[j] || f[i] >= f[j] - 1e-12)
    });

    let cond3 = (0..n).all(|i| match cf.k[i] {
        Some(k) => (-1e-12..=1.0 + 1e-12).contains(&k),
        None => (cf.next[i] - f[i]).abs() <= DEFAULT_DEGENERATE_TOL,
    });

    let cond4 = (0..n).all(|i| {
        (i + 1..n).all(|j| {
            !(cf.is_open[i] && cf.is_open[j])
                || !(digraph.has_edge(i, j) || digraph.has_edge(j, i))
                || zeroed(cf.delta[i]) * zeroed(cf.delta[j]) >= 0.0
        })
    });

    let mut cond5 = true;
    let mut ambiguous_pairs = 0;
    for i in 0..n {
        for j in i + 1..n {
            if !(cf.is_open[i] && cf.is_open[j]) || cf.wcc_of[i] != cf.wcc_of[j] {
                continue;
            }
            if cf.delta[i].abs() <= DEFAULT_DEGENERATE_TOL
                || cf.delta[j].abs() <= DEFAULT_DEGENERATE_TOL
            {
                continue;
            }
            if cf.open_children[i] == cf.open_children[j] {
                // part (a): identical open-minded children force equal factors
                let (ki, kj) = (cf.k[i].unwrap(), cf.k[j].unwrap());
                if (ki - kj).abs() > 1e-9 {
                    cond5 = false;
                }
                continue;
            }
            // part (b), the larger |Delta| takes the role of i
            if cf.delta[i] * cf.delta[j] < 0.0 {
                ambiguous_pairs += 1;
            }
            let (a, b) = if cf.delta[i].abs() >= cf.delta[j].abs() { (i, j) } else { (j, i) };
            let (kmin_ab, kmax_ab) = cf.pair_bounds(a, b)?;
            let bound = theorem2_condition5_bound(a, b, &cf)?;
            if kmax_ab - kmin_ab > bound + 1e-12 {
                cond5 = false;
            }
        }
    }

    let cond = [cond1, cond2, cond3, cond4, cond5];
    Ok(Theorem2Report { cond, all_hold: cond.iter().all(|&c| c), ambiguous_pairs })
}
