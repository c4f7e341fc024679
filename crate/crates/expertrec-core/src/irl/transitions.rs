//! Tabular transition model estimated from demonstrations.

use crate::error::{Error, Result};
use crate::irl::AbstractTrajectory;

/// Row-stochastic T(s'|s,a) stored flat as [s][a][s'].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl TransitionModel {
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions * n_states {
            return Err(Error::invalid(format!(
                "expected {} transition entries, got {}",
                n_states * n_actions * n_states,
                probs.len()
            )));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                let row = &probs[base..base + n_states];
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                    return Err(Error::invalid(format!(
                        "transition row (s={s}, a={a}) is not a distribution (sum {sum})"
                    )));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.n_actions + action) * self.n_states;
        &self.probs[base..base + self.n_states]
    }
}

/// Maximum-likelihood transition estimate with additive smoothing:
/// T(s'|s,a) = (count + lambda) / (row_total + lambda * n_states).
/// With zero smoothing, unobserved (s, a) rows fall back to uniform.
pub fn estimate_transitions(
    trajectories: &[AbstractTrajectory],
    n_states: usize,
    n_actions: usize,
    smoothing: f64,
) -> Result<TransitionModel> {
    if trajectories.is_empty() {
        return Err(Error::invalid("cannot estimate transitions without demonstrations"));
    }
    if smoothing < 0.0 || !smoothing.is_finite() {
        return Err(Error::invalid("transition smoothing must be finite and non-negative"));
    }
    let mut counts = vec![0.0f64; n_states * n_actions * n_states];
    for trajectory in trajectories {
        for (s, a, next) in trajectory.transitions() {
            if s >= n_states || a >= n_actions || next >= n_states {
                return Err(Error::invalid(format!(
                    "transition ({s}, {a}, {next}) outside the {n_states}x{n_actions} MDP"
                )));
            }
            counts[(s * n_actions + a) * n_states + next] += 1.0;
        }
    }
    let mut probs = vec![0.0f64; counts.len()];
    for s in 0..n_states {
        for a in 0..n_actions {
            let base = (s * n_actions + a) * n_states;
            let row_total: f64 = counts[base..base + n_states].iter().sum();
            let denom = row_total + smoothing * n_states as f64;
            if denom <= 0.0 {
                // Unvisited pair, no smoothing to spread: assume uniform.
                let u = 1.0 / n_states as f64;
                probs[base..base + n_states].fill(u);
            } else {
                for next in 0..n_states {
                    probs[base + next] = (counts[base + next] + smoothing) / denom;
                }
            }
        }
    }
    TransitionModel::from_probs(n_states, n_actions, probs)
}

/// Empirical start-state distribution of the demonstrations.
pub fn initial_distribution(trajectories: &[AbstractTrajectory], n_states: usize) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::invalid("cannot estimate a start distribution without demonstrations"));
    }
    let mut counts = vec![0.0f64; n_states];
    let mut total = 0.0;
    for trajectory in trajectories {
        let Some(&first) = trajectory.states.first() else {
            continue;
        };
        if first >= n_states {
            return Err(Error::invalid(format!(
                "start state {first} outside the {n_states}-state MDP"
            )));
        }
        counts[first] += 1.0;
        total += 1.0;
    }
    if total == 0.0 {
        return Err(Error::invalid("all demonstrations are empty"));
    }
    for c in &mut counts {
        *c /= total;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo(states: Vec<usize>, actions: Vec<usize>, end: usize) -> AbstractTrajectory {
        AbstractTrajectory::new(states, actions, end)
    }

    #[test]
    fn counts_become_frequencies_without_smoothing() {
        // From state 0, action 0: twice to state 1, once to state 2.
        let demos = vec![
            demo(vec![0, 1], vec![0, 1], 0),
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 2),
        ];
        let t = estimate_transitions(&demos, 3, 2, 0.0).unwrap();
        let row = t.row(0, 0);
        assert!((row[0] - 0.0).abs() < 1e-12);
        assert!((row[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((row[2] - 1.0 / 3.0).abs() < 1e-12);
        // (1, 1) observed once, to state 0.
        assert!((t.row(1, 1)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_to_one_counts_split_three_quarters() {
        let demos = vec![
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 2),
        ];
        let t = estimate_transitions(&demos, 3, 1, 0.0).unwrap();
        assert!((t.row(0, 0)[1] - 0.75).abs() < 1e-12);
        assert!((t.row(0, 0)[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn repeated_single_transition_is_a_point_mass() {
        let demos = vec![demo(vec![0], vec![0], 1); 5];
        let t = estimate_transitions(&demos, 2, 1, 0.0).unwrap();
        assert_eq!(t.row(0, 0), &[0.0, 1.0]);
    }

    #[test]
    fn smoothing_mixes_toward_uniform() {
        let demos = vec![
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 1),
            demo(vec![0], vec![0], 2),
        ];
        let t = estimate_transitions(&demos, 3, 1, 0.5).unwrap();
        let row = t.row(0, 0);
        // (2 + 0.5) / (3 + 0.5 * 3) = 2.5 / 4.5
        assert!((row[1] - 2.5 / 4.5).abs() < 1e-12);
        assert!((row[2] - 1.5 / 4.5).abs() < 1e-12);
        assert!((row[0] - 0.5 / 4.5).abs() < 1e-12);
    }

    #[test]
    fn unobserved_rows_are_uniform_without_smoothing() {
        let demos = vec![demo(vec![0], vec![0], 1)];
        let t = estimate_transitions(&demos, 4, 2, 0.0).unwrap();
        for &p in t.row(3, 1) {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_distribution_counts_first_states() {
        let demos = vec![
            demo(vec![0, 1], vec![0, 0], 1),
            demo(vec![0], vec![0], 1),
            demo(vec![2], vec![0], 1),
            demo(vec![2], vec![0], 1),
        ];
        let d0 = initial_distribution(&demos, 3).unwrap();
        assert_eq!(d0, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn rejects_empty_and_out_of_range_inputs() {
        assert!(estimate_transitions(&[], 3, 2, 0.0).is_err());
        assert!(initial_distribution(&[], 3).is_err());
        let bad = vec![demo(vec![5], vec![0], 0)];
        assert!(estimate_transitions(&bad, 3, 2, 0.0).is_err());
        assert!(initial_distribution(&bad, 3).is_err());
        let bad_action = vec![demo(vec![0], vec![7], 0)];
        assert!(estimate_transitions(&bad_action, 3, 2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn every_row_is_a_distribution(
            steps in proptest::collection::vec((0usize..5, 0usize..3, 0usize..5), 1..40),
            smoothing in 0.0f64..1.0,
        ) {
            let demos: Vec<AbstractTrajectory> = steps
                .iter()
                .map(|&(s, a, next)| demo(vec![s], vec![a], next))
                .collect();
            let t = estimate_transitions(&demos, 5, 3, smoothing).unwrap();
            for s in 0..5 {
                for a in 0..3 {
                    let sum: f64 = t.row(s, a).iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                    prop_assert!(t.row(s, a).iter().all(|&p| p >= 0.0));
                }
            }
            let d0 = initial_distribution(&demos, 5).unwrap();
            prop_assert!((d0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
