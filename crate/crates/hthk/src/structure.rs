//! SCC/WCC decomposition of the proximity digraph, component classification,
//! and the canonical block form of the averaging matrix.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{spectral_radius, Mat};
use crate::model::{AveragingMatrix, OpinionState, ProximityDigraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MindClass {
    /// Sink SCC of the condensation that is a complete subgraph.
    ClosedMinded,
    /// Sink SCC that is not complete.
    ModerateMinded,
    /// Any non-sink SCC.
    OpenMinded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    /// SCCs with sorted members, listed by smallest member index.
    pub sccs: Vec<Vec<usize>>,
    /// SCC index of each node.
    pub scc_of: Vec<usize>,
    /// WCCs of the full digraph, same ordering convention.
    pub wccs: Vec<Vec<usize>>,
    pub wcc_of: Vec<usize>,
    /// Condensation adjacency: edges between distinct SCC indices.
    pub condensation: Vec<Vec<usize>>,
    pub class_of: Vec<MindClass>,
    /// WCCs of the subgraph induced by open-minded nodes.
    pub open_wccs: Vec<Vec<usize>>,
    /// `canonical_perm[k]` is the original node at canonical position `k`:
    /// closed nodes first, then moderate, then open-minded nodes ordered so
    /// that the open block is lower-block-triangular.
    pub canonical_perm: Vec<usize>,
}

impl StructureReport {
    pub fn class_of_node(&self, i: usize) -> MindClass {
        self.class_of[self.scc_of[i]]
    }

    pub fn is_open(&self, i: usize) -> bool {
        self.class_of_node(i) == MindClass::OpenMinded
    }

    pub fn nodes_of_class(&self, class: MindClass) -> Vec<usize> {
        self.canonical_perm
            .iter()
            .copied()
            .filter(|&i| self.class_of_node(i) == class)
            .collect()
    }
}

/// Iterative Tarjan SCC. Components come out in reverse topological order
/// (every SCC before its predecessors); we re-sort by smallest member for
/// the report and keep the topological information via the condensation.
fn tarjan_sccs(g: &ProximityDigraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut sccs: Vec<Vec<usize>> = Vec::new();

    // explicit DFS stack: (node, neighbor cursor)
    let mut call_stack: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call_stack.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut cursor)) = call_stack.last_mut() {
            let ns = g.out_neighbors(v);
            if *cursor < ns.len() {
                let w = ns[*cursor];
                *cursor += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call_stack.pop();
                if let Some(&(parent, _)) = call_stack.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    sccs.push(comp);
                }
            }
        }
    }
    sccs.sort_by_key(|c| c[0]);
    sccs
}

fn weak_components(n: usize, undirected_adj: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut comp_of = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut queue = vec![start];
        comp_of[start] = id;
        let mut members = vec![start];
        while let Some(v) = queue.pop() {
            for &w in &undirected_adj[v] {
                if comp_of[w] == usize::MAX {
                    comp_of[w] = id;
                    members.push(w);
                    queue.push(w);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    (comps, comp_of)
}

pub fn analyze_structure(digraph: &ProximityDigraph) -> StructureReport {
    let n = digraph.n();
    let sccs = tarjan_sccs(digraph);
    let mut scc_of = vec![0usize; n];
    for (k, comp) in sccs.iter().enumerate() {
        for &v in comp {
            scc_of[v] = k;
        }
    }

    // condensation edges between distinct SCCs
    let m = sccs.len();
    let mut condensation: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, j) in digraph.edges() {
        let (a, b) = (scc_of[i], scc_of[j]);
        if a != b && !condensation[a].contains(&b) {
            condensation[a].push(b);
        }
    }
    for adj in &mut condensation {
        adj.sort_unstable();
    }

    // WCCs of the full digraph
    let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in digraph.edges() {
        if i != j {
            undirected[i].push(j);
            undirected[j].push(i);
        }
    }
    let (wccs, wcc_of) = weak_components(n, &undirected);

    // classification: sinks of the condensation are closed or moderate
    let class_of: Vec<MindClass> = (0..m)
        .map(|k| {
            if !condensation[k].is_empty() {
                MindClass::OpenMinded
            } else {
                let comp = &sccs[k];
                let complete = comp
                    .iter()
                    .all(|&i| comp.iter().all(|&j| digraph.has_edge(i, j)));
                if complete {
                    MindClass::ClosedMinded
                } else {
                    MindClass::ModerateMinded
                }
            }
        })
        .collect();

    // WCCs of the open-minded subgraph
    let open_nodes: Vec<usize> =
        (0..n).filter(|&i| class_of[scc_of[i]] == MindClass::OpenMinded).collect();
    let open_pos: Vec<Option<usize>> = {
        let mut pos = vec![None; n];
        for (p, &i) in open_nodes.iter().enumerate() {
            pos[i] = Some(p);
        }
        pos
    };
    let mut open_undirected: Vec<Vec<usize>> = vec![Vec::new(); open_nodes.len()];
    for (i, j) in digraph.edges() {
        if let (Some(a), Some(b)) = (open_pos[i], open_pos[j]) {
            if a != b {
                open_undirected[a].push(b);
                open_undirected[b].push(a);
            }
        }
    }
    let (open_wcc_local, _) = weak_components(open_nodes.len(), &open_undirected);
    let open_wccs: Vec<Vec<usize>> = open_wcc_local
        .into_iter()
        .map(|c| c.into_iter().map(|p| open_nodes[p]).collect())
        .collect();

    // canonical permutation: closed, moderate, then open-minded SCCs in an
    // order that places every open SCC after all of its open successors,
    // ties broken by smallest member. This makes the open block
    // lower-block-triangular.
    let mut perm = Vec::with_capacity(n);
    for class in [MindClass::ClosedMinded, MindClass::ModerateMinded] {
        for (k, comp) in sccs.iter().enumerate() {
            if class_of[k] == class {
                perm.extend_from_slice(comp);
            }
        }
    }
    let open_sccs: Vec<usize> =
        (0..m).filter(|&k| class_of[k] == MindClass::OpenMinded).collect();
    // count, per open SCC, the unplaced open successors
    let mut remaining: Vec<usize> = open_sccs
        .iter()
        .map(|&k| {
            condensation[k]
                .iter()
                .filter(|&&b| class_of[b] == MindClass::OpenMinded)
                .count()
        })
        .collect();
    let mut placed = vec![false; open_sccs.len()];
    for _ in 0..open_sccs.len() {
        let next = open_sccs
            .iter()
            .enumerate()
            .filter(|&(idx, _)| !placed[idx] && remaining[idx] == 0)
            .min_by_key(|&(_, &k)| sccs[k][0])
            .map(|(idx, _)| idx)
            .expect("open-SCC subgraph of a condensation is acyclic");
        placed[next] = true;
        let k = open_sccs[next];
        perm.extend_from_slice(&sccs[k]);
        for (idx, &a) in open_sccs.iter().enumerate() {
            if !placed[idx] && condensation[a].contains(&k) {
                remaining[idx] -= 1;
            }
        }
    }

    StructureReport {
        sccs,
        scc_of,
        wccs,
        wcc_of,
        condensation,
        class_of,
        open_wccs,
        canonical_perm: perm,
    }
}

/// Blocks of the canonical form `P A P^T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalBlocks {
    /// Original node indices backing each block, in canonical order.
    pub closed_nodes: Vec<usize>,
    pub moderate_nodes: Vec<usize>,
    pub open_nodes: Vec<usize>,
    /// Block-diagonal complete-averaging matrix over the closed nodes.
    pub c: Mat,
    /// Block-diagonal matrix over the moderate nodes.
    pub m: Mat,
    /// Lower-block-triangular matrix over the open nodes.
    pub theta: Mat,
    /// Coupling from open rows into closed columns.
    pub theta_c: Mat,
    /// Coupling from open rows into moderate columns.
    pub theta_m: Mat,
}

impl CanonicalBlocks {
    /// Reassembles the canonical form for verification against `P A P^T`.
    pub fn assemble(&self) -> Mat {
        let nc = self.closed_nodes.len();
        let nm = self.moderate_nodes.len();
        let no = self.open_nodes.len();
        let n = nc + nm + no;
        let mut out = Mat::zeros(n, n);
        for i in 0..nc {
            for j in 0..nc {
                out[(i, j)] = self.c[(i, j)];
            }
        }
        for i in 0..nm {
            for j in 0..nm {
                out[(nc + i, nc + j)] = self.m[(i, j)];
            }
        }
        for i in 0..no {
            for j in 0..nc {
                out[(nc + nm + i, j)] = self.theta_c[(i, j)];
            }
            for j in 0..nm {
                out[(nc + nm + i, nc + j)] = self.theta_m[(i, j)];
            }
            for j in 0..no {
                out[(nc + nm + i, nc + nm + j)] = self.theta[(i, j)];
            }
        }
        out
    }

    /// Verifies `rho(Theta) < 1`, the condition for the open-minded
    /// resolvent solve to be well posed.
    pub fn theta_is_substochastic(&self) -> Result<bool, Error> {
        if self.open_nodes.is_empty() {
            return Ok(true);
        }
        Ok(spectral_radius(&self.theta)? < 1.0 - 1e-9)
    }
}

pub fn canonical_decomposition(
    matrix: &AveragingMatrix,
    structure: &StructureReport,
) -> CanonicalBlocks {
    let closed_nodes = structure.nodes_of_class(MindClass::ClosedMinded);
    let moderate_nodes = structure.nodes_of_class(MindClass::ModerateMinded);
    let open_nodes = structure.nodes_of_class(MindClass::OpenMinded);
    let sub = |rows: &[usize], cols: &[usize]| {
        let mut out = Mat::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = matrix.entry(i, j);
            }
        }
        out
    };
    CanonicalBlocks {
        c: sub(&closed_nodes, &closed_nodes),
        m: sub(&moderate_nodes, &moderate_nodes),
        theta: sub(&open_nodes, &open_nodes),
        theta_c: sub(&open_nodes, &closed_nodes),
        theta_m: sub(&open_nodes, &moderate_nodes),
        closed_nodes,
        moderate_nodes,
        open_nodes,
    }
}

/// Opinion range and sensing range of one WCC of the proximity digraph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WccRanges {
    pub members: Vec<usize>,
    /// `[min, max]` of the member opinions.
    pub opinion_range: (f64, f64),
    /// Union of `[y_i - r_i, y_i + r_i]` over members, normalized to
    /// disjoint closed intervals in increasing order.
    pub sensing_range: Vec<(f64, f64)>,
}

pub fn wcc_ranges(state: &OpinionState, structure: &StructureReport) -> Vec<WccRanges> {
    let y = state.opinions();
    let r = state.bounds();
    structure
        .wccs
        .iter()
        .map(|members| {
            let lo = members.iter().map(|&i| y[i]).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|&i| y[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut intervals: Vec<(f64, f64)> =
                members.iter().map(|&i| (y[i] - r[i], y[i] + r[i])).collect();
            intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (a, b) in intervals {
                match merged.last_mut() {
                    Some(last) if a <= last.1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            WccRanges {
                members: members.clone(),
                opinion_range: (lo, hi),
                sensing_range: merged,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_digraph, build_matrix, OpinionState};

    fn state(y: &[f64], r: &[f64]) -> OpinionState {
        OpinionState::new(y.to_vec(), r.to_vec()).unwrap()
    }

    #[test]
    fn example_digraph_classification() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let g = build_digraph(&s, 0.0);
        let st = analyze_structure(&g);
        assert_eq!(st.sccs, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(st.class_of[0], MindClass::ClosedMinded);
        assert_eq!(st.class_of[1], MindClass::OpenMinded);
        assert_eq!(st.class_of[2], MindClass::ClosedMinded);
        assert_eq!(st.wccs.len(), 1);
        assert_eq!(st.open_wccs, vec![vec![1]]);
    }

    #[test]
    fn complete_digraph_is_one_closed_scc() {
        let s = state(&[0.2, 0.25, 0.3], &[1.0, 1.0, 1.0]);
        let st = analyze_structure(&build_digraph(&s, 0.0));
        assert_eq!(st.sccs.len(), 1);
        assert_eq!(st.class_of[0], MindClass::ClosedMinded);
    }

    #[test]
    fn disjoint_cliques_are_two_closed_blocks() {
        let s = state(&[0.0, 0.01, 1.0, 1.01], &[0.05, 0.05, 0.05, 0.05]);
        let g = build_digraph(&s, 0.0);
        let st = analyze_structure(&g);
        assert_eq!(st.sccs.len(), 2);
        assert!(st.class_of.iter().all(|&c| c == MindClass::ClosedMinded));
        let blocks = canonical_decomposition(&build_matrix(&g), &st);
        assert!(blocks.open_nodes.is_empty());
        assert_eq!(blocks.c[(0, 1)], 0.5);
        assert_eq!(blocks.c[(0, 2)], 0.0);
    }

    #[test]
    fn moderate_triangle() {
        let s = state(&[0.0, 0.5, 1.0], &[0.6, 0.6, 0.6]);
        let st = analyze_structure(&build_digraph(&s, 0.0));
        assert_eq!(st.sccs.len(), 1);
        assert_eq!(st.class_of[0], MindClass::ModerateMinded);
    }

    #[test]
    fn example_canonical_blocks() {
        let s = state(&[0.0, 0.6, 1.0], &[0.5, 1.0, 0.25]);
        let g = build_digraph(&s, 0.0);
        let st = analyze_structure(&g);
        let blocks = canonical_decomposition(&build_matrix(&g), &st);
        assert_eq!(blocks.closed_nodes, vec![0, 2]);
        assert!(blocks.moderate_nodes.is_empty());
        assert_eq!(blocks.open_nodes, vec![1]);
        assert_eq!(blocks.theta[(0, 0)], 1.0 / 3.0);
        assert_eq!(blocks.theta_c.row(0), &[1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(blocks.c[(0, 0)], 1.0);
        assert_eq!(blocks.c[(0, 1)], 0.0);
    }

    #[test]
    fn assembled_canonical_form_matches_permuted_matrix() {
        let s = state(&[0.0, 0.3, 0.55, 1.0, 1.4], &[0.35, 0.3, 0.3, 0.45, 0.5]);
        let g = build_digraph(&s, 0.0);
        let st = analyze_structure(&g);
        let a = build_matrix(&g);
        let blocks = canonical_decomposition(&a, &st);
        let assembled = blocks.assemble();
        let perm = &st.canonical_perm;
        for bi in 0..perm.len() {
            for bj in 0..perm.len() {
                assert_eq!(assembled[(bi, bj)], a.entry(perm[bi], perm[bj]));
            }
        }
    }

    #[test]
    fn wcc_ranges_two_components() {
        let s = state(&[0.0, 1.0], &[0.2, 0.2]);
        let st = analyze_structure(&build_digraph(&s, 0.0));
        let ranges = wcc_ranges(&s, &st);
        assert_eq!(ranges.len(), 2);
        assert_eq!(ranges[0].opinion_range, (0.0, 0.0));
        assert_eq!(ranges[0].sensing_range, vec![(-0.2, 0.2)]);
        assert_eq!(ranges[1].opinion_range, (1.0, 1.0));
        assert_eq!(ranges[1].sensing_range, vec![(0.8, 1.2)]);
    }

    #[test]
    fn singleton_ranges() {
        let s = state(&[0.25], &[0.125]);
        let st = analyze_structure(&build_digraph(&s, 0.0));
        let ranges = wcc_ranges(&s, &st);
        assert_eq!(ranges[0].opinion_range, (0.25, 0.25));
        assert_eq!(ranges[0].sensing_range, vec![(0.125, 0.375)]);
    }
}
