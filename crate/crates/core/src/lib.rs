//! Probabilistic cascading-failure analysis of interdependent lifeline
//! networks.
//!
//! Networks are modelled as stacks of mutually exclusive supply layers
//! ([`graph`]). Hazard intensities and depleting autonomy turn into
//! self-failure probabilities ([`hazard`]), which propagate along supply
//! chains and across network dependencies ([`cascade`]). The [`engine`]
//! steps a scenario through time and produces a [`ProbabilityReport`].
//! [`classic`] holds the deterministic inoperability model used as a
//! baseline, and [`pra`] the fault and event trees used as oracles.

pub mod cascade;
pub mod classic;
pub mod engine;
pub mod error;
pub mod graph;
pub mod hazard;
pub mod pra;
pub mod report;
pub mod scenario;

pub use cascade::{
    configuration_occurrence, couple_layers_prob, node_importance, propagate_layer, solve_system, CascadeSolver,
    ConfigurationState, LayerOutcome, NetworkState, NodeProbabilities, SystemState,
};
pub use engine::{
    autonomy_clock_advance, combine_reports, importance_series, run_ensemble, run_timeline, run_timeline_with, AutonomyMode,
    Intervention, RunOptions, Timeline,
};
pub use error::{Error, Result};
pub use graph::{
    enumerate_chains, validate_topology, Adjacency, AutonomySpec, Chain, Configuration, Exposure, InterNetworkDependency,
    Network, Node, NodeKind, Rule, SystemModel, ValidationReport, Violation,
};
pub use hazard::{
    combine_independent, eval_fragility, joint_redundant_failure, self_failure, AutonomyCurve, CurveLibrary, EventVector,
    FragilityCurve, FragilityForm, HazardIntensity, HazardKind, IntensityUnit,
};
pub use report::ProbabilityReport;
pub use scenario::{load_bundled, load_scenario, parse_scenario, Scenario, ScenarioDocument, ScenarioError};
