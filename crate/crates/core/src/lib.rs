//! Multi-objective linear contextual bandits: posterior sampling with optimistic
//! multi-sample evaluation, Pareto and effective-Pareto fronts, baseline policies, and an
//! experiment harness.

pub mod env;
pub mod error;
pub mod harness;
pub mod lp;
pub mod pareto;
pub mod policy;
pub mod rls;
pub mod rng;

pub use env::{gen_contexts, gen_env, ContextMatrix, ContextMode, EnvSpec, RoundOutcome};
pub use error::{Error, Result};
pub use harness::{
    aggregate, emit_csv, emit_plots, parse_csv, run_experiment, run_instance, write_outputs,
    AlgorithmSpec, ExperimentConfig, ExperimentOutcome, RegretLedger, Summary,
};
pub use pareto::{
    dominates, effective_front, effective_gap, pareto_front, pareto_gap, FrontKind, FrontSet,
    GapProfile, RewardTable,
};
pub use policy::{Algorithm, Decision, PolicyConfig, SampleCount, ScaleMode};
pub use rls::{PosteriorSampler, RlsState, SampleBlock};
