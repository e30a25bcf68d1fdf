//! Pattern-level differential privacy for event streams.
//!
//! Complex event processing turns raw data streams into pattern streams;
//! some pattern types are private and must not be inferable from query
//! answers. Instead of perturbing the whole stream, the mechanisms here
//! apply randomized response only to events that belong to detected
//! instances of the declared private patterns, which keeps the rest of the
//! stream intact and the answers useful.
//!
//! The crate provides:
//!
//! - an event stream model and a windowed pattern matcher ([`stream`],
//!   [`matcher`]),
//! - randomized response with per-element privacy budgets, budget
//!   composition, and an exact enumeration-based verifier of the resulting
//!   pattern-level guarantee ([`ppm`]),
//! - uniform and adaptive (bidirectional stepwise) budget distribution
//!   ([`ppm`], [`adaptive`]),
//! - stream-level baselines (budget division, budget absorption, landmark)
//!   calibrated to the same pattern-level budget ([`baselines`]),
//! - dataset generators and GPS ingestion ([`datasets`]), and a
//!   reproducible experiment runner with CSV output ([`eval`]).
//!
//! Every stochastic step is driven by explicit seeds; identical seeds give
//! identical results on any platform and any degree of parallelism. The
//! `examples/` directory walks through each capability; a thin `pattern-dp`
//! binary exposes dataset synthesis, ingestion, budget allocation, and
//! experiment runs as subcommands.

pub mod adaptive;
pub mod baselines;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod matcher;
pub mod ppm;
pub mod rng;
pub mod stream;

pub use adaptive::{estimate_quality, optimize, OptimizerConfig, QualityEstimate};
pub use baselines::{
    allocate_baseline, calibrate, pattern_level_epsilon_of, BaselineConfig, BaselineKind,
};
pub use datasets::{
    assign_areas, ingest_tdrive_dir, ingest_tdrive_file, synthesize, AreaAssignment, GridSpec,
    SynthConfig,
};
pub use error::{Error, Result};
pub use eval::{
    confusion, mre, quality, run_experiment, ConfusionCounts, ExperimentPlan, Mechanism,
    QualityReport, Scorer,
};
pub use matcher::{
    detect, overlapping, ElementPredicate, MatchMode, PatternInstance, PatternQuery,
    PatternStream, PrivacyRole, PrivateEventIndex,
};
pub use ppm::{
    apply_ppm, composed_epsilon, epsilon_to_p, p_to_epsilon, randomize, uniform_allocate,
    verify_pattern_level_dp, BinaryResponse, BudgetAllocation, PerturbedTable,
};
pub use rng::SeededRng;
pub use stream::{extract_events, merge_streams, Event, EventId, EventKind, EventStream};
