//! Maximum-entropy IRL: gradient ascent on reward weights so that the
//! soft-greedy policy's expected feature counts match the demonstrations.

use serde::{Deserialize, Serialize};

use crate::config::IrlConfig;
use crate::error::{Error, Result};
use crate::irl::features::{
    empirical_feature_expectation, mean_trajectory_length, FeatureMap, RewardModel,
};
use crate::irl::transitions::{initial_distribution, TransitionModel};
use crate::irl::value_iteration::{value_iteration, Policy};
use crate::irl::visitation::state_visitation_frequencies;
use crate::irl::AbstractTrajectory;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntParams {
    pub gamma: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub vi_tolerance: f64,
    pub vi_max_sweeps: usize,
    /// Softening of the planner's policy; matching the demonstrators' own
    /// exploration rate keeps the feature-matching target reachable.
    pub policy_epsilon: f64,
    pub divergence_threshold: f64,
    /// Occupancy rollout length; defaults to the mean demonstration length.
    pub horizon: Option<usize>,
}

impl From<&IrlConfig> for MaxEntParams {
    fn from(cfg: &IrlConfig) -> Self {
        Self {
            gamma: cfg.gamma,
            iterations: cfg.iterations,
            learning_rate: cfg.learning_rate,
            lr_decay: cfg.lr_decay,
            vi_tolerance: cfg.vi_tolerance,
            vi_max_sweeps: cfg.vi_max_sweeps,
            policy_epsilon: cfg.policy_epsilon,
            divergence_threshold: cfg.divergence_threshold,
            horizon: None,
        }
    }
}

/// One gradient step's diagnostics. `grad_norm` is the L2 norm,
/// `residual` the infinity norm (worst per-feature mismatch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub grad_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct MaxEntOutcome {
    pub reward: RewardModel,
    pub policy: Policy,
    pub values: Vec<f64>,
    /// One row per gradient evaluation: `iterations` update steps plus a
    /// final evaluation of the converged weights, so the last row reports
    /// the residual of the returned model.
    pub trace: Vec<TraceRow>,
    pub horizon: usize,
}

pub fn maxent_irl(
    trajectories: &[AbstractTrajectory],
    transitions: &TransitionModel,
    map: &FeatureMap,
    params: &MaxEntParams,
) -> Result<MaxEntOutcome> {
    if map.n_states() != transitions.n_states {
        return Err(Error::invalid(
            "feature map and transition model disagree on the state count",
        ));
    }
    if params.learning_rate <= 0.0 || params.lr_decay <= 0.0 || params.lr_decay > 1.0 {
        return Err(Error::invalid("learning rate must be positive and decay in (0, 1]"));
    }
    let mean_length = mean_trajectory_length(trajectories);
    if mean_length == 0.0 {
        return Err(Error::invalid("demonstrations contain no steps"));
    }
    // Both sides of the gradient as per-step expectations: phi_tilde is a
    // per-trajectory sum over variable lengths, the occupancy side a sum
    // over a fixed horizon.
    let mut empirical = empirical_feature_expectation(trajectories, map)?;
    for e in &mut empirical {
        *e /= mean_length;
    }
    let initial = initial_distribution(trajectories, transitions.n_states)?;
    let horizon = match params.horizon {
        Some(h) if h > 0 => h,
        Some(_) => return Err(Error::invalid("horizon must be at least 1")),
        None => (mean_length.round() as usize).max(1),
    };

    let mut theta = vec![0.0; map.n_features()];
    let mut values: Option<Vec<f64>> = None;
    let mut trace = Vec::with_capacity(params.iterations + 1);
    let mut policy = Policy::uniform(transitions.n_states, transitions.n_actions);

    for iteration in 0..=params.iterations {
        let rewards = map.state_rewards(&theta);
        let solved = value_iteration(
            transitions,
            &rewards,
            params.gamma,
            params.vi_tolerance,
            params.vi_max_sweeps,
            values.as_deref(),
        )?;
        policy = Policy::epsilon_greedy(&solved.q, params.policy_epsilon)?;
        values = Some(solved.values);

        let mut occupancy =
            state_visitation_frequencies(transitions, &policy, &initial, horizon)?;
        for d in &mut occupancy {
            *d /= horizon as f64;
        }
        let model = map.weighted_feature_sum(&occupancy);

        let gradient: Vec<f64> = empirical
            .iter()
            .zip(&model)
            .map(|(&e, &m)| e - m)
            .collect();
        let grad_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        let residual = gradient.iter().fold(0.0f64, |m, &g| m.max(g.abs()));
        trace.push(TraceRow {
            iteration,
            grad_norm,
            residual,
        });
        if !grad_norm.is_finite() || grad_norm > params.divergence_threshold {
            return Err(Error::TrainingDiverged {
                grad_norm,
                threshold: params.divergence_threshold,
            });
        }
        // The last pass only evaluates the converged weights.
        if iteration == params.iterations {
            break;
        }
        let lr = params.learning_rate * params.lr_decay.powi(iteration as i32);
        for (t, g) in theta.iter_mut().zip(&gradient) {
            *t += lr * g;
        }
    }

    let reward = RewardModel::new(map.clone(), theta)?;
    Ok(MaxEntOutcome {
        reward,
        policy,
        values: values.expect("at least one solve"),
        trace,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2 states; from state 0 action 1 reaches the absorbing state 1,
    /// action 0 stays put. Demonstrations head straight to state 1.
    fn toy() -> (Vec<AbstractTrajectory>, TransitionModel, FeatureMap) {
        let transitions = TransitionModel::from_probs(
            2,
            2,
            vec![
                1.0, 0.0, // s0 a0
                0.0, 1.0, // s0 a1
                0.0, 1.0, // s1 a0
                0.0, 1.0, // s1 a1
            ],
        )
        .unwrap();
        let demos = vec![
            AbstractTrajectory::new(vec![0, 1, 1], vec![1, 0, 0], 1),
            AbstractTrajectory::new(vec![0, 1, 1], vec![1, 0, 0], 1),
        ];
        (demos, transitions, FeatureMap::one_hot(2))
    }

    fn params(iterations: usize) -> MaxEntParams {
        MaxEntParams {
            gamma: 0.5,
            iterations,
            learning_rate: 0.01,
            lr_decay: 1.0,
            vi_tolerance: 1e-9,
            vi_max_sweeps: 10_000,
            policy_epsilon: 0.1,
            divergence_threshold: 1e6,
            horizon: None,
        }
    }

    #[test]
    fn first_gradient_step_matches_the_hand_computation() {
        let (demos, transitions, map) = toy();
        let out = maxent_irl(&demos, &transitions, &map, &params(1)).unwrap();
        // Empirical per-step expectation: state 0 once, state 1 twice, over
        // 3 steps: (1/3, 2/3). Under zero rewards the greedy action is 0
        // (stay), so with epsilon 0.1 the policy leaves state 0 with
        // probability 0.05 per step: D = (1 + 0.95 + 0.9025, rest), and the
        // model expectation is (0.950833.., 0.049166..).
        let g1 = 2.0 / 3.0 - 0.1475 / 3.0;
        assert!((out.reward.theta[1] - 0.01 * g1).abs() < 1e-9, "theta {:?}", out.reward.theta);
        assert!((out.reward.theta[0] + 0.01 * g1).abs() < 1e-9);
        assert_eq!(out.horizon, 3);
        assert_eq!(out.trace.len(), 2);
        let expected_norm = (2.0 * g1 * g1).sqrt();
        assert!((out.trace[0].grad_norm - expected_norm).abs() < 1e-9);
        assert!((out.trace[0].residual - g1).abs() < 1e-9);
    }

    #[test]
    fn training_recovers_the_demonstrated_preference() {
        let (demos, transitions, map) = toy();
        let out = maxent_irl(&demos, &transitions, &map, &params(300)).unwrap();
        assert!(
            out.reward.theta[1] > out.reward.theta[0],
            "theta {:?}",
            out.reward.theta
        );
        assert_eq!(out.policy.greedy_action(0), 1);
        let last = out.trace.last().unwrap();
        assert!(last.residual < 0.05, "residual {}", last.residual);
        assert!(last.grad_norm < out.trace[0].grad_norm);
    }

    #[test]
    fn zero_iterations_returns_the_untouched_prior() {
        let (demos, transitions, map) = toy();
        let out = maxent_irl(&demos, &transitions, &map, &params(0)).unwrap();
        assert_eq!(out.reward.theta, vec![0.0, 0.0]);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].iteration, 0);
    }

    #[test]
    fn oversized_gradients_abort_training() {
        let (demos, transitions, map) = toy();
        let mut p = params(10);
        p.divergence_threshold = 1e-12;
        let err = maxent_irl(&demos, &transitions, &map, &p).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { .. }));
    }

    #[test]
    fn rejects_inconsistent_shapes_and_parameters() {
        let (demos, transitions, _) = toy();
        let wrong_map = FeatureMap::one_hot(3);
        assert!(maxent_irl(&demos, &transitions, &wrong_map, &params(1)).is_err());
        let map = FeatureMap::one_hot(2);
        let mut p = params(1);
        p.learning_rate = 0.0;
        assert!(maxent_irl(&demos, &transitions, &map, &p).is_err());
        let mut p = params(1);
        p.horizon = Some(0);
        assert!(maxent_irl(&demos, &transitions, &map, &p).is_err());
    }
}
