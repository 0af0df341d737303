use super::{DesignProblem, EngineError};
use crate::genmodels::{GenModel, WeightedSamples};
use crate::oracles::TargetSet;
use crate::seq::Sequence;

/// Samples drawn at one earlier iteration together with the model that drew
/// them and their cached expected scores.
#[derive(Clone, Debug)]
pub struct Epoch {
    pub samples: Vec<Sequence>,
    pub scores: Vec<f64>,
    pub model: GenModel,
}

/// Importance-corrected training data from all stored epochs:
/// `w = P(S|x) * p(x|current) / p(x|generator)`, ratios taken in log space.
pub fn reuse_weights(
    history: &[Epoch],
    current: &GenModel,
    target: &TargetSet,
    problem: &DesignProblem<'_>,
) -> Result<WeightedSamples, EngineError> {
    let len = current.length();
    let total: usize = history.iter().map(|e| e.samples.len()).sum();
    let mut samples = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for epoch in history {
        if epoch.model.length() != len {
            return Err(EngineError::LengthMismatch { expected: len, got: epoch.model.length() });
        }
        if epoch.scores.len() != epoch.samples.len() {
            return Err(EngineError::LengthMismatch { expected: epoch.samples.len(), got: epoch.scores.len() });
        }
        for (x, &score) in epoch.samples.iter().zip(&epoch.scores) {
            let log_now = current.log_likelihood(x)?;
            let log_then = epoch.model.log_prob(x);
            let set_prob = problem.weight(x, score, target);
            let w = if log_now == f64::NEG_INFINITY || log_then == f64::NEG_INFINITY || set_prob == 0.0 {
                0.0
            } else {
                (log_now - log_then).exp() * set_prob
            };
            samples.push(x.clone());
            weights.push(w);
        }
    }
    Ok(WeightedSamples::new(samples, weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodels::PwmModel;
    use crate::oracles::FnOracle;

    fn count_a(s: &Sequence) -> f64 {
        s.symbols().iter().filter(|&&v| v == 0).count() as f64
    }

    #[test]
    fn identity_ratio_reduces_to_set_probabilities() {
        let oracle = FnOracle::new(3, 0.7, count_a);
        let problem = DesignProblem::new(&oracle);
        let model = GenModel::uniform(3);
        let samples: Vec<Sequence> = ["AAA", "ACG", "TTT"].iter().map(|s| s.parse().unwrap()).collect();
        let scores: Vec<f64> = samples.iter().map(count_a).collect();
        let target = TargetSet::HalfLine { gamma: 1.5 };
        let epoch = Epoch { samples: samples.clone(), scores: scores.clone(), model: model.clone() };
        let out = reuse_weights(&[epoch], &model, &target, &problem).unwrap();
        let direct = super::super::compute_weights(&problem, &samples, &target);
        assert_eq!(out.weights(), direct.as_slice());
    }

    #[test]
    fn impossible_under_current_model_gets_zero() {
        let oracle = FnOracle::new(2, 0.0, count_a);
        let problem = DesignProblem::new(&oracle);
        let only_a = GenModel::Pwm(PwmModel::from_probs(vec![[1.0, 0.0, 0.0, 0.0]; 2], 0.0).unwrap());
        let epoch = Epoch { samples: vec!["CA".parse().unwrap()], scores: vec![1.0], model: GenModel::uniform(2) };
        let out = reuse_weights(&[epoch], &only_a, &TargetSet::HalfLine { gamma: 0.0 }, &problem).unwrap();
        assert_eq!(out.weights(), &[0.0]);
    }

    #[test]
    fn ratio_matches_direct_probability_quotient() {
        let oracle = FnOracle::new(2, 0.0, count_a);
        let problem = DesignProblem::new(&oracle);
        let then = PwmModel::from_probs(vec![[0.4, 0.3, 0.2, 0.1], [0.1, 0.1, 0.1, 0.7]], 0.0).unwrap();
        let now = PwmModel::from_probs(vec![[0.7, 0.1, 0.1, 0.1], [0.25, 0.25, 0.25, 0.25]], 0.0).unwrap();
        let x: Sequence = "AT".parse().unwrap();
        let epoch = Epoch { samples: vec![x.clone()], scores: vec![1.0], model: GenModel::Pwm(then) };
        let out = reuse_weights(&[epoch], &GenModel::Pwm(now), &TargetSet::HalfLine { gamma: 0.0 }, &problem).unwrap();
        let direct = (0.7 * 0.25) / (0.4 * 0.7);
        assert!((out.weights()[0] - direct).abs() < 1e-14);
    }
}
