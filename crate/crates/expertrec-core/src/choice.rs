//! Conditional logit choice over a slate with an outside no-click option.
//!
//! Given non-negative item utilities u_1..u_n and a no-click mass c, the
//! click probability of item j is u_j / (c + sum_k u_k) and the no-click
//! probability is c / (c + sum_k u_k). A mass of zero recovers the pure
//! in-slate logit.

use rand::Rng;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChoiceConfig {
    pub no_click_mass: f64,
}

/// Returns n+1 probabilities: one per item, the last for no-click.
pub fn choice_probabilities(utilities: &[f64], no_click_mass: f64) -> Result<Vec<f64>> {
    if utilities.iter().any(|&u| !u.is_finite() || u < 0.0) {
        return Err(Error::invalid(
            "choice utilities must be finite and non-negative",
        ));
    }
    if !no_click_mass.is_finite() || no_click_mass < 0.0 {
        return Err(Error::invalid("no-click mass must be finite and non-negative"));
    }
    let total: f64 = utilities.iter().sum::<f64>() + no_click_mass;
    if total <= 0.0 {
        return Err(Error::invalid(
            "at least one utility or the no-click mass must be positive",
        ));
    }
    let mut probs = Vec::with_capacity(utilities.len() + 1);
    for &u in utilities {
        probs.push(u / total);
    }
    probs.push(no_click_mass / total);
    Ok(probs)
}

/// Samples from the distribution produced by `choice_probabilities`.
/// `Some(i)` is a click on item i; `None` is the no-click outcome.
pub fn sample_choice(probabilities: &[f64], rng: &mut dyn RngCore) -> Result<Option<usize>> {
    if probabilities.is_empty() {
        return Err(Error::invalid("empty probability vector"));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || probabilities.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(format!(
            "probabilities must be non-negative and sum to 1 (got {sum})"
        )));
    }
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        acc += p;
        if draw < acc {
            return Ok(index_to_outcome(i, probabilities.len()));
        }
    }
    // Rounding can leave draw >= acc by a few ulps; the last slot absorbs it.
    Ok(index_to_outcome(probabilities.len() - 1, probabilities.len()))
}

fn index_to_outcome(index: usize, len: usize) -> Option<usize> {
    if index + 1 == len {
        None
    } else {
        Some(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn splits_evenly_without_outside_mass() {
        let p = choice_probabilities(&[1.0, 1.0], 0.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn proportional_to_utilities() {
        let p = choice_probabilities(&[3.0, 1.0], 0.0).unwrap();
        assert_eq!(p, vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn outside_mass_takes_its_share() {
        let p = choice_probabilities(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(p, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(choice_probabilities(&[0.0, 0.0], 0.0).is_err());
        assert!(choice_probabilities(&[-1.0, 2.0], 0.0).is_err());
        assert!(choice_probabilities(&[1.0], -0.5).is_err());
    }

    #[test]
    fn certain_click_always_lands() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_choice(&[1.0, 0.0, 0.0], &mut rng).unwrap(), Some(0));
        }
    }

    #[test]
    fn certain_no_click_never_clicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(sample_choice(&[0.0, 0.0, 1.0], &mut rng).unwrap(), None);
        }
    }

    #[test]
    fn empirical_frequency_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs = [0.75, 0.25, 0.0];
        let n = 100_000;
        let mut first = 0usize;
        for _ in 0..n {
            if sample_choice(&probs, &mut rng).unwrap() == Some(0) {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn invalid_probability_vectors_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(sample_choice(&[], &mut rng).is_err());
        assert!(sample_choice(&[0.2, 0.2], &mut rng).is_err());
        assert!(sample_choice(&[1.2, -0.2], &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn scaling_utilities_leaves_probabilities_unchanged(
            utilities in proptest::collection::vec(0.0f64..100.0, 1..6),
            scale in 0.01f64..100.0,
            mass in 0.0f64..10.0,
        ) {
            prop_assume!(utilities.iter().sum::<f64>() + mass > 1e-9);
            // The no-click mass scales with the utilities: the model is
            // scale-free only as a whole.
            let base = choice_probabilities(&utilities, mass).unwrap();
            let scaled: Vec<f64> = utilities.iter().map(|u| u * scale).collect();
            let scaled = choice_probabilities(&scaled, mass * scale).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn raising_one_utility_raises_its_probability(
            utilities in proptest::collection::vec(0.1f64..10.0, 2..6),
            bump in 0.1f64..5.0,
            mass in 0.0f64..10.0,
        ) {
            let base = choice_probabilities(&utilities, mass).unwrap();
            let mut bumped = utilities.clone();
            bumped[0] += bump;
            let after = choice_probabilities(&bumped, mass).unwrap();
            prop_assert!(after[0] > base[0]);
            for i in 1..utilities.len() {
                prop_assert!(after[i] <= base[i] + 1e-12);
            }
        }

        #[test]
        fn probabilities_always_sum_to_one(
            utilities in proptest::collection::vec(0.0f64..50.0, 1..6),
            mass in 0.0f64..10.0,
        ) {
            prop_assume!(utilities.iter().sum::<f64>() + mass > 1e-9);
            let p = choice_probabilities(&utilities, mass).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
