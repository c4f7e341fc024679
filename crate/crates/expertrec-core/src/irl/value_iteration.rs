//! Tabular value iteration and stochastic tabular policies.
//!
//! Rewards are state-based: Q(s,a) = r(s) + gamma * sum_s' T(s'|s,a) V(s').

use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::irl::transitions::TransitionModel;

/// Row-stochastic pi(a|s) stored flat as [s][a].
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::invalid(format!(
                "expected {} policy entries, got {}",
                n_states * n_actions,
                probs.len()
            )));
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::invalid(format!(
                    "policy row {s} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    /// Same action distribution in every state.
    pub fn stationary(n_states: usize, action_probs: &[f64]) -> Result<Self> {
        let mut probs = Vec::with_capacity(n_states * action_probs.len());
        for _ in 0..n_states {
            probs.extend_from_slice(action_probs);
        }
        Self::from_probs(n_states, action_probs.len(), probs)
    }

    /// Epsilon-soft greedy policy over a Q table: the best action gets
    /// 1 - epsilon plus its uniform share, every action keeps epsilon/|A|.
    /// Q ties break toward the lowest action index.
    pub fn epsilon_greedy(q: &QTable, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1]"));
        }
        let base = epsilon / q.n_actions as f64;
        let mut probs = vec![base; q.n_states * q.n_actions];
        for s in 0..q.n_states {
            let best = argmax(q.row(s));
            probs[s * q.n_actions + best] += 1.0 - epsilon;
        }
        Self::from_probs(q.n_states, q.n_actions, probs)
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.n_actions + action]
    }

    /// Most probable action, ties toward the lowest index.
    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    pub fn sample_action(&self, state: usize, rng: &mut dyn RngCore) -> usize {
        let row = self.row(state);
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                return a;
            }
        }
        row.len() - 1
    }
}

/// Flat [s][a] action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }
}

pub fn argmax(row: &[f64]) -> usize {
    debug_assert!(!row.is_empty());
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ValueIterationOutcome {
    pub values: Vec<f64>,
    pub q: QTable,
    pub sweeps: usize,
    pub residual: f64,
}

/// Solves V to the given sup-norm tolerance. `warm_start` seeds V (zeros
/// otherwise), which makes repeated solves under slowly moving rewards
/// cheap. Fails with a convergence error if `max_sweeps` is exhausted.
pub fn value_iteration(
    transitions: &TransitionModel,
    rewards: &[f64],
    gamma: f64,
    tolerance: f64,
    max_sweeps: usize,
    warm_start: Option<&[f64]>,
) -> Result<ValueIterationOutcome> {
    let n_states = transitions.n_states;
    let n_actions = transitions.n_actions;
    if rewards.len() != n_states {
        return Err(Error::invalid(format!(
            "expected {n_states} state rewards, got {}",
            rewards.len()
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1)"));
    }
    if tolerance <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut values = match warm_start {
        Some(v) if v.len() == n_states => v.to_vec(),
        Some(v) => {
            return Err(Error::invalid(format!(
                "warm start has {} entries, expected {n_states}",
                v.len()
            )))
        }
        None => vec![0.0; n_states],
    };
    let mut next = vec![0.0; n_states];
    let mut q = QTable::zeros(n_states, n_actions);
    for sweep in 1..=max_sweeps {
        let mut residual: f64 = 0.0;
        for s in 0..n_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_actions {
                let future: f64 = transitions
                    .row(s, a)
                    .iter()
                    .zip(&values)
                    .map(|(&t, &v)| t * v)
                    .sum();
                let qsa = rewards[s] + gamma * future;
                q.set(s, a, qsa);
                if qsa > best {
                    best = qsa;
                }
            }
            next[s] = best;
            residual = residual.max((best - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if residual < tolerance {
            return Ok(ValueIterationOutcome {
                values,
                q,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_sweeps,
        residual: (0..n_states)
            .map(|s| (values[s] - next[s]).abs())
            .fold(0.0, f64::max),
    })
}

/// V^pi to the given sup-norm tolerance: the value of *following* a fixed
/// stochastic policy, used to score a learned policy under a reference
/// reward.
pub fn policy_evaluation(
    transitions: &TransitionModel,
    policy: &Policy,
    rewards: &[f64],
    gamma: f64,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let n_states = transitions.n_states;
    if policy.n_states != n_states || policy.n_actions != transitions.n_actions {
        return Err(Error::invalid("policy and transition model shapes differ"));
    }
    if rewards.len() != n_states {
        return Err(Error::invalid(format!(
            "expected {n_states} state rewards, got {}",
            rewards.len()
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1)"));
    }
    let mut values = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    for _ in 0..max_sweeps {
        let mut residual: f64 = 0.0;
        for s in 0..n_states {
            let mut expected = 0.0;
            for a in 0..policy.n_actions {
                let pi = policy.prob(s, a);
                if pi == 0.0 {
                    continue;
                }
                let future: f64 = transitions
                    .row(s, a)
                    .iter()
                    .zip(&values)
                    .map(|(&t, &v)| t * v)
                    .sum();
                expected += pi * future;
            }
            next[s] = rewards[s] + gamma * expected;
            residual = residual.max((next[s] - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if residual < tolerance {
            return Ok(values);
        }
    }
    Err(Error::Convergence {
        iterations: max_sweeps,
        residual: (0..n_states)
            .map(|s| (values[s] - next[s]).abs())
            .fold(0.0, f64::max),
    })
}
