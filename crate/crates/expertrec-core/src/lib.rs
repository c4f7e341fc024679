//! Expert-guided recommendation in a simulated video platform: expert
//! demonstration generation, maximum-entropy inverse reinforcement learning
//! over an abstract session MDP, a state-matching recommender serving the
//! learned policy, and a five-arm comparison harness with quality and
//! engagement metrics.

pub mod baselines;
pub mod choice;
pub mod config;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod expert_env;
pub mod harness;
mod io_util;
pub mod irl;
pub mod recommender;
pub mod rng;
pub mod user_env;

pub use config::{ExperimentConfig, Profile};
pub use dataset::{DatasetShape, ExpertStateRecord};
pub use domain::{Response, Slate, Topic, Video, VideoId};
pub use error::{Error, Result};
pub use harness::{ArmResult, ExperimentInputs, MetricsRow};
pub use irl::{Discretizer, LearnedModel, Policy, QTable};
pub use user_env::{Agent, CorpusItem, Observation, Recommendation, SessionLog, UserProfile};
