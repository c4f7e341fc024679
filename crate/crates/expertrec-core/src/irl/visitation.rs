//! Expected state occupancy under a policy, by forward dynamic programming.

use crate::error::{Error, Result};
use crate::irl::transitions::TransitionModel;
use crate::irl::value_iteration::Policy;

/// D_t for t = 0..horizon-1: the state distribution at each decision step.
/// D_0 is `initial`; D_{t+1}(s') = sum_{s,a} D_t(s) pi(a|s) T(s'|s,a).
pub fn visitation_steps(
    transitions: &TransitionModel,
    policy: &Policy,
    initial: &[f64],
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    let n_states = transitions.n_states;
    if policy.n_states != n_states || policy.n_actions != transitions.n_actions {
        return Err(Error::invalid("policy and transition model shapes differ"));
    }
    if initial.len() != n_states {
        return Err(Error::invalid(format!(
            "initial distribution has {} entries, expected {n_states}",
            initial.len()
        )));
    }
    let mass: f64 = initial.iter().sum();
    if (mass - 1.0).abs() > 1e-6 || initial.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid("initial state distribution must sum to 1"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let mut steps = Vec::with_capacity(horizon);
    let mut current = initial.to_vec();
    for _ in 0..horizon - 1 {
        let mut next = vec![0.0; n_states];
        for s in 0..n_states {
            if current[s] == 0.0 {
                continue;
            }
            for a in 0..transitions.n_actions {
                let weight = current[s] * policy.prob(s, a);
                if weight == 0.0 {
                    continue;
                }
                for (n, &t) in next.iter_mut().zip(transitions.row(s, a)) {
                    *n += weight * t;
                }
            }
        }
        steps.push(current);
        current = next;
    }
    steps.push(current);
    Ok(steps)
}

/// Summed occupancy D(s) = sum_t D_t(s); its total mass equals `horizon`.
pub fn state_visitation_frequencies(
    transitions: &TransitionModel,
    policy: &Policy,
    initial: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    let steps = visitation_steps(transitions, policy, initial, horizon)?;
    let mut sum = vec![0.0; transitions.n_states];
    for step in &steps {
        for (o, &d) in sum.iter_mut().zip(step) {
            *o += d;
        }
    }
    Ok(sum)
}
