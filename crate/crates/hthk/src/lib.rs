//! Heterogeneous Hegselmann-Krause (htHK) opinion dynamics.
//!
//! Agents hold scalar opinions and individual confidence radii. At every step
//! each agent moves to the average of all opinions within its radius, which
//! couples the dynamics to a state-dependent proximity digraph. This crate
//! implements the update map together with the structural analysis built on
//! top of it: component classification, the final value at constant topology,
//! equi-topology neighborhoods, per-step convergence factors, leader SCCs,
//! and a trajectory simulator with constant-topology-time detection.

pub mod error;
pub mod factors;
pub mod fixed_topology;
pub mod leaders;
pub mod linalg;
pub mod model;
pub mod neighborhoods;
pub mod scenario;
pub mod sim;
pub mod structure;

pub use error::Error;
pub use factors::{
    check_lemma1, check_monotone_step, check_theorem2, convergence_factors,
    theorem2_condition5_bound, ConvergenceFactors, Lemma1Report, Theorem2Report,
};
pub use fixed_topology::{
    check_prop1_part2, fvct, fvct_frozen, is_equilibrium, FinalValueResult, Prop1Part2Report,
    DEFAULT_EQUILIBRIUM_TOL,
};
pub use leaders::{check_theorem3, leader_report, LeaderReport, Theorem3Report};
pub use model::{
    build_digraph, build_matrix, step, step_with_digraph, AveragingMatrix, OpinionState,
    ProximityDigraph,
};
pub use neighborhoods::{
    check_theorem1, in_equi_topology, in_invariant_equi_topology, neighborhood_spec,
    NeighborhoodSpec, Theorem1Report,
};
pub use scenario::{load_scenario, ScenarioFile};
pub use sim::{detect_tau, simulate, Mode, TrajectoryReport};
pub use structure::{
    analyze_structure, canonical_decomposition, wcc_ranges, CanonicalBlocks, MindClass,
    StructureReport, WccRanges,
};
