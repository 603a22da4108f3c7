//! Generalized semi-Markov processes with fixed-delay and variable-delay
//! events: modelling, exact region-graph analysis, simulation of the
//! configuration chain, and estimation of long-run frequencies.

pub mod analysis;
pub mod delay;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod format;
pub mod library;
pub mod model;
pub mod regions;
pub mod rng;
pub mod simulator;

pub use analysis::{
    causes_relation, classify, is_delta_separated, single_ticking_check, AnalysisReport,
    CausesRelation, TickingVerdict, Witness,
};
pub use delay::{mean_delay, residual_density, residual_quantile, residual_sample, residual_survival};
pub use error::{DelayError, EstimateError, FormatError, ModelError, RegionError, SimError};
pub use estimate::{
    estimate_bscc_frequencies, estimate_reach_probabilities, expected_waiting_time,
    fit_geometric_rate, grid_invariant_measure, FrequencyEstimate, GridSpec, Method,
};
pub use format::{parse_model, serialize_model};
pub use library::{get_model, NamedModel};
pub use model::{
    validate_model, DelayKind, DelayLaw, EventId, EventSet, EventSpec, GsmpModel, Rational,
    StateId, UpperBound, ValidationReport, Violation,
};
pub use regions::{
    bscc_decompose, build_region_graph, canonical_representative, region_of, successor_regions,
    Region, RegionGraph,
};
pub use rng::{derive_seed, task_rng};
pub use simulator::{
    event_distance, initial_configuration, simulate_run, step, Budget, CheckpointSchedule,
    Configuration, RunStats, StepOutcome, TargetSet,
};
