//! Push rumor spreading on complete graphs and stars under lossy
//! transmissions: fully random, quasirandom and feedback-retry protocols,
//! lazy/busy phase schedules, analytic bounds and exact small-n oracles.

pub mod bounds;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod lists;
pub mod oracle;
pub mod phase;
pub mod protocol;
pub mod rng;
pub mod stats;
pub mod topology;

pub use bounds::{lossy_bound, BoundReport, TheoremConstants};
pub use engine::{Engine, EngineState, TrialResult, NEVER};
pub use error::{Error, Result};
pub use experiment::{
    check_bounds, compare, run_coupled, run_experiment, ConfigBuilder, CoupledRecord, Experiment, ExperimentConfig, ListSource, StartPolicy,
    TrialRecord,
};
pub use lists::{realize_lists, CyclicLists, ListAssignment, ListStrategy};
pub use oracle::{exact_fully_random, exact_quasirandom, ExactDistribution};
pub use phase::{coupled_run, run_delayed, Phase, PhaseKind, PhaseSchedule};
pub use protocol::{FailureModel, FeedbackRetry, FullyRandom, PushProtocol, Quasirandom};
pub use rng::TrialStream;
pub use stats::SummaryStats;
pub use topology::{Topology, TopologyKind};
