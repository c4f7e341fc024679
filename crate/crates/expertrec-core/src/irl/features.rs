//! State features and the linear reward model r(s) = theta . phi(s).

use std::fmt;
use std::str::FromStr;

use crate::domain::Topic;
use crate::error::{Error, Result};
use crate::irl::abstraction::Discretizer;
use crate::irl::AbstractTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// One indicator per state; the reward table is learned directly.
    OneHot,
    /// Compact features: bias, no-click flag, topic one-hot, quality and
    /// engagement bin centers. Ties rewards of related states together.
    Factored,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onehot" => Ok(Self::OneHot),
            "factored" => Ok(Self::Factored),
            other => Err(Error::config(format!(
                "unknown feature map `{other}` (expected `onehot` or `factored`)"
            ))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OneHot => write!(f, "onehot"),
            Self::Factored => write!(f, "factored"),
        }
    }
}

/// Dense per-state feature matrix, n_states rows of n_features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    n_states: usize,
    n_features: usize,
    matrix: Vec<f64>,
}

impl FeatureMap {
    pub fn one_hot(n_states: usize) -> Self {
        let mut matrix = vec![0.0; n_states * n_states];
        for s in 0..n_states {
            matrix[s * n_states + s] = 1.0;
        }
        Self {
            kind: FeatureKind::OneHot,
            n_states,
            n_features: n_states,
            matrix,
        }
    }

    pub fn factored(discretizer: &Discretizer) -> Self {
        let n_states = discretizer.n_states();
        let n_features = 4 + discretizer.n_topics;
        let mut matrix = vec![0.0; n_states * n_features];
        for state in 0..n_states {
            let row = &mut matrix[state * n_features..(state + 1) * n_features];
            row[0] = 1.0;
            match discretizer.decode_state(state) {
                None => row[1] = 1.0,
                Some((Topic(topic), quality_bin, engagement_bin)) => {
                    row[2 + topic as usize] = 1.0;
                    row[2 + discretizer.n_topics] = discretizer.quality_bin_center(quality_bin);
                    row[3 + discretizer.n_topics] =
                        (engagement_bin as f64 + 0.5) / discretizer.engagement_bins as f64;
                }
            }
        }
        Self {
            kind: FeatureKind::Factored,
            n_states,
            n_features,
            matrix,
        }
    }

    pub fn for_domain(kind: FeatureKind, discretizer: &Discretizer) -> Self {
        match kind {
            FeatureKind::OneHot => Self::one_hot(discretizer.n_states()),
            FeatureKind::Factored => Self::factored(discretizer),
        }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature(&self, state: usize) -> &[f64] {
        &self.matrix[state * self.n_features..(state + 1) * self.n_features]
    }

    /// r[s] = theta . phi(s) for every state.
    pub fn state_rewards(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.n_features);
        (0..self.n_states)
            .map(|s| dot(self.feature(s), theta))
            .collect()
    }

    /// Sum of phi(s) weighted by a per-state weight vector.
    pub fn weighted_feature_sum(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_states);
        let mut out = vec![0.0; self.n_features];
        for (state, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &f) in out.iter_mut().zip(self.feature(state)) {
                *o += w * f;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A trained reward: feature map plus learned weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub map: FeatureMap,
    pub theta: Vec<f64>,
}

impl RewardModel {
    pub fn new(map: FeatureMap, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != map.n_features() {
            return Err(Error::invalid(format!(
                "theta has {} entries but the feature map has {}",
                theta.len(),
                map.n_features()
            )));
        }
        Ok(Self { map, theta })
    }

    pub fn reward(&self, state: usize) -> f64 {
        dot(self.map.feature(state), &self.theta)
    }

    pub fn state_rewards(&self) -> Vec<f64> {
        self.map.state_rewards(&self.theta)
    }
}

/// Summed features of one demonstration: phi_traj = sum over visited
/// (pre-action) states of phi(s). End states are not counted; the forward
/// occupancy computation matches that convention. The linear-reward
/// identity theta . phi_traj = sum_t r(s_t) holds by construction.
pub fn trajectory_feature_counts(
    trajectory: &AbstractTrajectory,
    map: &FeatureMap,
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; map.n_features()];
    for &state in &trajectory.states {
        if state >= map.n_states() {
            return Err(Error::invalid(format!(
                "state {state} outside the {}-state feature map",
                map.n_states()
            )));
        }
        for (o, &f) in sum.iter_mut().zip(map.feature(state)) {
            *o += f;
        }
    }
    Ok(sum)
}

/// Mean of `trajectory_feature_counts` over the demonstrations: the
/// per-trajectory expected feature count the learner tries to match.
pub fn empirical_feature_expectation(
    trajectories: &[AbstractTrajectory],
    map: &FeatureMap,
) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::invalid("demonstrations are required"));
    }
    let mut mean = vec![0.0; map.n_features()];
    for trajectory in trajectories {
        let counts = trajectory_feature_counts(trajectory, map)?;
        for (o, c) in mean.iter_mut().zip(&counts) {
            *o += c;
        }
    }
    for v in &mut mean {
        *v /= trajectories.len() as f64;
    }
    Ok(mean)
}

/// Average demonstration length in steps.
pub fn mean_trajectory_length(trajectories: &[AbstractTrajectory]) -> f64 {
    if trajectories.is_empty() {
        return 0.0;
    }
    let total: usize = trajectories.iter().map(AbstractTrajectory::len).sum();
    total as f64 / trajectories.len() as f64
}
