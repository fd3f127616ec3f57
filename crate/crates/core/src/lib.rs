//! Uncertainty-aware value modelling and selection for step-level search.
//!
//! - [`uvm_head`]: the dual-branch value head (mean branch plus index-driven
//!   uncertainty branch with a frozen random prior).
//! - [`training`]: value datasets, the signed-coordinate training objective and its gradient.
//! - [`selection`]: Group Thompson Sampling and the UCB, top-1 ranking and greedy baselines.
//! - [`search`]: step-level beam search driven by any selector.
//! - [`simworld`]: a synthetic reasoning world with controllable distribution shift.
//! - [`harness`]: metrics and the end-to-end experiment runner.

pub mod error;
pub mod harness;
pub mod path;
pub mod rng;
pub mod search;
pub mod selection;
pub mod simworld;
pub mod training;
pub mod uvm_head;

pub use error::{Error, Result};
pub use harness::{coverage, precision_majority_vote, run_experiment, BeamSetting, ExperimentConfig, RunReport};
pub use path::{
    Answer, AnswerChecker, EncodedHead, Generator, PartialPath, PrefixEncoder, QuestionId, SolutionPath, Step,
    ValueModel,
};
pub use search::{step_beam_search, SearchConfig, SearchOutcome};
pub use selection::{CandidateSet, Coupling, SelectionResult, SelectorSpec};
pub use simworld::{ShiftTag, SyntheticProblem, World, WorldSpec};
pub use training::{derive_ovm, train_uvm, TrainConfig, ValueExample};
pub use uvm_head::{
    HeadConfig, IndexDistribution, IndexVector, Representation, UvmHead, ValueDistributionSummary, ValuePosterior,
};
