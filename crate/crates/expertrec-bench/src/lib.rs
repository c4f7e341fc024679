//! Shared fixture builders for the pipeline benchmarks: synthetic
//! demonstrations over the default abstract MDP shape and synthetic
//! expert state datasets sized like the real ones.

use expertrec_core::dataset::{ExpertStateRecord, ResponseSummary};
use expertrec_core::irl::{estimate_transitions, AbstractTrajectory, TransitionModel};
use expertrec_core::rng::stream;
use expertrec_core::Topic;
use rand::Rng;

/// Default abstract space: 1 + 8 topics x 4 quality bins x 2 engagement bins.
pub const N_STATES: usize = 65;
/// Multisets of 2 descriptors over 8 descriptor kinds.
pub const N_ACTIONS: usize = 36;

/// Random-walk demonstrations over the abstract space. Not meaningful
/// trajectories, but the right shape and density for timing.
pub fn synthetic_trajectories(count: usize, length: usize, seed: u64) -> Vec<AbstractTrajectory> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, 90, i as u64);
            let states: Vec<usize> = (0..length).map(|_| rng.gen_range(0..N_STATES)).collect();
            let actions: Vec<usize> = (0..length).map(|_| rng.gen_range(0..N_ACTIONS)).collect();
            let end = rng.gen_range(0..N_STATES);
            AbstractTrajectory::new(states, actions, end)
        })
        .collect()
}

pub fn synthetic_mdp(seed: u64) -> (TransitionModel, Vec<AbstractTrajectory>) {
    let trajectories = synthetic_trajectories(500, 12, seed);
    let transitions = estimate_transitions(&trajectories, N_STATES, N_ACTIONS, 0.05)
        .expect("synthetic demonstrations cover the space");
    (transitions, trajectories)
}

/// Records with interest vectors near distinct archetypes and random corpus
/// embeddings, so a query matches rarely: close to the classifier's real
/// worst case, a full scan.
pub fn synthetic_dataset(count: usize, n_topics: usize, corpus_size: usize, seed: u64) -> Vec<ExpertStateRecord> {
    let mut rng = stream(seed, 91, 0);
    (0..count)
        .map(|i| {
            let expert_id = i % n_topics;
            let e_s: Vec<f64> = (0..n_topics)
                .map(|t| {
                    let base = if t == expert_id { 0.9 } else { -0.5 };
                    (base + rng.gen_range(-0.1..0.1f64)).clamp(-1.0, 1.0)
                })
                .collect();
            let e_c: Vec<f64> = (0..3 * corpus_size).map(|_| rng.gen_range(-1.0..1.0)).collect();
            ExpertStateRecord {
                expert_id,
                e_s,
                e_c,
                response: ResponseSummary {
                    clicked_topic: Some(Topic(expert_id as u16)),
                    watch_time: 4.0,
                    s_v: Some(0.5),
                    engagement_rate: 1.0,
                    evaluated_quality: Some(0.7),
                },
                abstract_state: i % N_STATES,
                policy_action: i % N_ACTIONS,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_mdp_has_the_default_shape() {
        let (transitions, trajectories) = synthetic_mdp(7);
        assert_eq!(transitions.n_states, N_STATES);
        assert_eq!(transitions.n_actions, N_ACTIONS);
        assert_eq!(trajectories.len(), 500);
    }

    #[test]
    fn synthetic_dataset_has_consistent_layouts() {
        let records = synthetic_dataset(100, 8, 5, 7);
        assert_eq!(records.len(), 100);
        assert!(records.iter().all(|r| r.e_s.len() == 8 && r.e_c.len() == 15));
        assert!(records.iter().all(|r| r.policy_action < N_ACTIONS));
    }
}
