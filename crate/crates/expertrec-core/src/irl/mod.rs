//! Maximum-entropy inverse reinforcement learning over a finite MDP.
//!
//! The submodules split the pipeline into: state/action abstraction
//! (`abstraction`), transition estimation from demonstrations
//! (`transitions`), reward features and the linear reward model
//! (`features`), soft-greedy planning (`value_iteration`), occupancy
//! computation (`visitation`), the training loop itself (`maxent`), and
//! model persistence (`model_io`).

pub mod abstraction;
pub mod features;
pub mod maxent;
pub mod model_io;
pub mod transitions;
pub mod value_iteration;
pub mod visitation;

pub use abstraction::{AbstractAction, AbstractState, Descriptor, Discretizer};
pub use features::{FeatureKind, FeatureMap, RewardModel};
pub use maxent::{maxent_irl, MaxEntOutcome, MaxEntParams, TraceRow};
pub use model_io::LearnedModel;
pub use transitions::{estimate_transitions, initial_distribution, TransitionModel};
pub use value_iteration::{
    policy_evaluation, value_iteration, Policy, QTable, ValueIterationOutcome,
};
pub use visitation::{state_visitation_frequencies, visitation_steps};

/// A demonstration reduced to the abstract MDP: the state *before* each
/// action, the action taken, and the state reached after the final action.
/// Training consumes only this view, so any environment that can discretize
/// its episodes can drive the learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub end_state: usize,
}

impl AbstractTrajectory {
    pub fn new(states: Vec<usize>, actions: Vec<usize>, end_state: usize) -> Self {
        assert_eq!(
            states.len(),
            actions.len(),
            "one action per visited state"
        );
        Self {
            states,
            actions,
            end_state,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Consecutive (state, action, next_state) transitions, including the
    /// final step into `end_state`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.states.len()).map(move |i| {
            let next = if i + 1 < self.states.len() {
                self.states[i + 1]
            } else {
                self.end_state
            };
            (self.states[i], self.actions[i], next)
        })
    }
}
