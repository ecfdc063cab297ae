//! Opinion dynamics on signed trust networks.
//!
//! Every node holds a fixed internal opinion `s_i` in `[-1, 1]` and
//! expresses `z_i`, trading off its own view (weight `alpha_i`) against
//! agreement with (or, on distrust edges, opposition to) the nodes it
//! follows. The crate computes the Nash equilibrium of that game, the
//! contribution of each internal opinion to the total expressed opinion,
//! and the best way to spend an L1 budget changing internal opinions,
//! both greedily and with ADMM.
//!
//! The numeric core is generic over [`Scalar`] (`f32`, `f64`); the aliases
//! below fix the working precision used by the experiment harness.

pub mod admm;
pub mod confidence;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod greedy;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod scalar;

pub use admm::{admm_allocate_budget, admm_solve, calibrate_lambda, coordinate_oracle, soft_threshold, AdmmParams, AdmmState};
pub use confidence::{confidence_adjusted, confidence_fixed, mean_evaluation, pagerank, ConfidenceVector, PageRankParams};
pub use dynamics::{overall_opinion, EquilibriumResult, GodmSystem, SolverOptions};
pub use error::{Error, Result};
pub use graph::{build_graph, SignedDigraph, TrustSum};
pub use greedy::{baseline_allocate, benefit, greedy_allocate, rank_nodes, AllocationPlan, Method, Objective, Ranking};
pub use harness::{compare_models, run_experiment, sweep_budget, ExperimentConfig, ExperimentReport};
pub use ingest::{EdgeRecord, InitKind, InitScheme};
pub use scalar::Scalar;

pub type Digraph = SignedDigraph<f64>;
pub type Digraph32 = SignedDigraph<f32>;
pub type Confidence = ConfidenceVector<f64>;
pub type Confidence32 = ConfidenceVector<f32>;
pub type System<'g> = GodmSystem<'g, f64>;
pub type System32<'g> = GodmSystem<'g, f32>;
pub type Plan = AllocationPlan<f64>;
pub type Plan32 = AllocationPlan<f32>;
pub type Equilibrium = EquilibriumResult<f64>;
