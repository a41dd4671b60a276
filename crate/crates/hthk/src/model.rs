//! System state, proximity digraph, and the one-step averaging update.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Opinion vector paired with the per-agent confidence radii.
///
/// Agents are stored 0-based internally; all serialized reports use 1-based
/// agent indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionState {
    opinions: Vec<f64>,
    bounds: Vec<f64>,
}

impl OpinionState {
    pub fn new(opinions: Vec<f64>, bounds: Vec<f64>) -> Result<Self, Error> {
        if opinions.is_empty() {
            return Err(Error::Empty);
        }
        if opinions.len() != bounds.len() {
            return Err(Error::LengthMismatch {
                opinions: opinions.len(),
                bounds: bounds.len(),
            });
        }
        for (i, &x) in opinions.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { what: "opinion", agent: i + 1 });
            }
        }
        for (i, &r) in bounds.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::NonFinite { what: "bound", agent: i + 1 });
            }
            if r <= 0.0 {
                return Err(Error::NonPositiveBound { agent: i + 1, value: r });
            }
        }
        Ok(Self { opinions, bounds })
    }

    pub fn n(&self) -> usize {
        self.opinions.len()
    }

    pub fn opinions(&self) -> &[f64] {
        &self.opinions
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Same bounds, different opinion vector. Lengths must agree.
    pub fn with_opinions(&self, opinions: Vec<f64>) -> Result<Self, Error> {
        Self::new(opinions, self.bounds.clone())
    }
}

/// Out-neighbor sets of the proximity digraph `G_r(y)`.
///
/// Edge `i -> j` exists iff `|y_i - y_j| <= r_i + tie_tol`, with a few ulps
/// of slack on the comparison (see [`build_digraph`]). The self-loop
/// `i -> i` is always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximityDigraph {
    n: usize,
    out_neighbors: Vec<Vec<usize>>,
}

impl ProximityDigraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted out-neighbor set of node `i` (0-based).
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().map(move |&j| (i, j)))
    }

    /// Hash of the sorted adjacency lists. Equal digraphs hash equal; a hash
    /// match is always confirmed by full comparison before being trusted.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.out_neighbors.hash(&mut h);
        h.finish()
    }
}

/// Distances within this many ulps of the bound count as ties. Decimal data
/// regularly produces distances *exactly* equal to a bound in real
/// arithmetic; after rounding to binary the equality is missed by an ulp or
/// two, which flips edges that exact arithmetic keeps. The allowance makes
/// the neighbor rule agree with exact rational evaluation on such inputs
/// while staying far below any opinion dynamics of interest.
const TIE_ULPS: f64 = 4.0;

/// Builds the proximity digraph of `state` with boundary tolerance `tie_tol`.
///
/// Edge `i -> j` exists iff `|y_i - y_j| <= r_i + tie_tol` up to a few ulps
/// of representation slack (see [`struct@ProximityDigraph`]); `tie_tol = 0`
/// keeps the slack only.
pub fn build_digraph(state: &OpinionState, tie_tol: f64) -> ProximityDigraph {
    let y = state.opinions();
    let r = state.bounds();
    let n = state.n();
    let out_neighbors = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    let scale = y[i].abs().max(y[j].abs()).max(r[i]);
                    let slack = TIE_ULPS * f64::EPSILON * scale;
                    (y[i] - y[j]).abs() <= r[i] + tie_tol + slack
                })
                .collect()
        })
        .collect();
    ProximityDigraph { n, out_neighbors }
}

/// Row-stochastic averaging matrix `A(y)` with `a_ij = 1/|N_i|` on edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingMatrix {
    n: usize,
    data: Vec<f64>, // row-major
}

impl AveragingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Matrix-vector product `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, v)| a * v).sum())
            .collect()
    }
}

pub fn build_matrix(digraph: &ProximityDigraph) -> AveragingMatrix {
    let n = digraph.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let ns = digraph.out_neighbors(i);
        let w = 1.0 / ns.len() as f64;
        for &j in ns {
            data[i * n + j] = w;
        }
    }
    AveragingMatrix { n, data }
}

/// One synchronous update `x(t+1) = A(x(t)) x(t)`.
///
/// Each new opinion is clamped into the closed interval spanned by the
/// agent's neighbor opinions, so the convexity postcondition holds exactly
/// even when the floating-point average rounds outside it by an ulp.
pub fn step(state: &OpinionState, tie_tol: f64) -> OpinionState {
    let digraph = build_digraph(state, tie_tol);
    step_with_digraph(state, &digraph)
}

/// The update with an externally supplied (possibly frozen) digraph.
pub fn step_with_digraph(state: &OpinionState, digraph: &ProximityDigraph) -> OpinionState {
    let y = state.opinions();
    let next = (0..state.n())
        .map(|i| {
            let ns = digraph.out_neighbors(i);
            let sum: f64 = ns.iter().map(|&j| y[j]).sum();
            let mean = sum / ns.len() as f64;
            let lo = ns.iter().map(|&j| y[j]).fold(f64::INFINITY, f64::min);
            let hi = ns.iter().map(|&j| y[j]).fold(f64::NEG_INFINITY, f64::max);
            mean.clamp(lo, hi)
        })
        .collect();
    state
        .with_opinions(next)
        .expect("averaging a finite state stays finite")
}
