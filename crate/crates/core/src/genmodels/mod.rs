//! Generative models `p(x|theta)` with exact likelihoods and exact (PWM) or
//! EM (mixture) weighted maximum-likelihood fitting.

mod mixture;
mod pwm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::Sequence;

pub use mixture::{fit_mixture_em, EmFit, MixtureModel};
pub use pwm::{fit_pwm, PwmModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("all sample weights are zero")]
    AllWeightsZero,
    #[error("samples have differing lengths")]
    RaggedLengths,
    #[error("no samples")]
    Empty,
    #[error("{samples} samples but {weights} weights")]
    WeightCount { samples: usize, weights: usize },
    #[error("weight {0} is negative or not a number")]
    InvalidWeight(f64),
    #[error("sequence length {got} does not match model length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("smoothing pseudo-count must be non-negative, got {0}")]
    InvalidSmoothing(f64),
    #[error("mixture needs at least one component")]
    InvalidComponents,
    #[error("malformed model snapshot: {0}")]
    Format(String),
}

/// Sequences paired with non-negative training weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSamples {
    samples: Vec<Sequence>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(samples: Vec<Sequence>, weights: Vec<f64>) -> Result<Self, ModelError> {
        if samples.len() != weights.len() {
            return Err(ModelError::WeightCount { samples: samples.len(), weights: weights.len() });
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(ModelError::InvalidWeight(w));
        }
        Ok(Self { samples, weights })
    }

    pub fn unit(samples: Vec<Sequence>) -> Self {
        let weights = vec![1.0; samples.len()];
        Self { samples, weights }
    }

    pub fn samples(&self) -> &[Sequence] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn extend(&mut self, other: WeightedSamples) {
        self.samples.extend(other.samples);
        self.weights.extend(other.weights);
    }

    /// Common sequence length.
    pub(crate) fn validate(&self) -> Result<usize, ModelError> {
        let first = self.samples.first().ok_or(ModelError::Empty)?;
        let len = first.len();
        if self.samples.iter().any(|s| s.len() != len) {
            return Err(ModelError::RaggedLengths);
        }
        Ok(len)
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A fitted generative model.
#[derive(Clone, Debug, PartialEq)]
pub enum GenModel {
    Pwm(PwmModel),
    Mixture(MixtureModel),
}

impl GenModel {
    pub fn uniform(length: usize) -> Self {
        GenModel::Pwm(PwmModel::uniform(length))
    }

    pub fn length(&self) -> usize {
        match self {
            GenModel::Pwm(m) => m.length(),
            GenModel::Mixture(m) => m.length(),
        }
    }

    /// `M` i.i.d. draws; a mixture picks the component first.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Sequence> {
        match self {
            GenModel::Pwm(p) => (0..m).map(|_| p.draw(rng)).collect(),
            GenModel::Mixture(x) => (0..m).map(|_| x.draw(rng)).collect(),
        }
    }

    pub fn sample_seeded(&self, m: usize, seed: u64) -> Vec<Sequence> {
        self.sample(m, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn log_likelihood(&self, x: &Sequence) -> Result<f64, ModelError> {
        if x.len() != self.length() {
            return Err(ModelError::LengthMismatch { expected: self.length(), got: x.len() });
        }
        Ok(self.log_prob(x))
    }

    pub(crate) fn log_prob(&self, x: &Sequence) -> f64 {
        match self {
            GenModel::Pwm(p) => p.log_prob(x),
            GenModel::Mixture(m) => m.log_prob(x),
        }
    }

    /// Most probable symbol per position of the site-wise marginals.
    pub fn modal_sequence(&self) -> Sequence {
        match self {
            GenModel::Pwm(p) => p.modal_sequence(),
            GenModel::Mixture(m) => PwmModel::from_probs(renormalized(m.marginal_probs()), 0.0)
                .expect("marginals are stochastic")
                .modal_sequence(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Snapshot::from(self)).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let snap: Snapshot = serde_json::from_str(s).map_err(|e| ModelError::Format(e.to_string()))?;
        snap.try_into()
    }
}

fn renormalized(mut rows: Vec<[f64; 4]>) -> Vec<[f64; 4]> {
    for row in &mut rows {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    rows
}

/// Generative family plus hyperparameters, refit from scratch each call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Pwm {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Mixture {
        components: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_em_iters")]
        em_iters: usize,
    },
}

fn default_alpha() -> f64 {
    0.1
}

fn default_em_iters() -> usize {
    20
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Pwm { alpha: default_alpha() }
    }
}

impl ModelSpec {
    pub fn fit<R: Rng + ?Sized>(&self, data: &WeightedSamples, rng: &mut R) -> Result<GenModel, ModelError> {
        match *self {
            ModelSpec::Pwm { alpha } => fit_pwm(data, alpha).map(GenModel::Pwm),
            ModelSpec::Mixture { components, alpha, em_iters } => {
                fit_mixture_em(data, components, alpha, em_iters, rng).map(|f| GenModel::Mixture(f.model))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentSnapshot {
    probs: Vec<[f64; 4]>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    kind: String,
    length: usize,
    alpha: f64,
    probs: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mix_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<ComponentSnapshot>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    em_iters: Option<usize>,
}

impl From<&GenModel> for Snapshot {
    fn from(m: &GenModel) -> Self {
        match m {
            GenModel::Pwm(p) => Snapshot {
                kind: "pwm".into(),
                length: p.length(),
                alpha: p.alpha(),
                probs: p.probs().to_vec(),
                mix_weights: None,
                components: None,
                em_iters: None,
            },
            GenModel::Mixture(x) => Snapshot {
                kind: "mixture".into(),
                length: x.length(),
                alpha: x.components()[0].alpha(),
                probs: x.marginal_probs(),
                mix_weights: Some(x.mix_weights().to_vec()),
                components: Some(
                    x.components().iter().map(|c| ComponentSnapshot { probs: c.probs().to_vec() }).collect(),
                ),
                em_iters: Some(x.em_iters()),
            },
        }
    }
}

impl TryFrom<Snapshot> for GenModel {
    type Error = ModelError;

    fn try_from(s: Snapshot) -> Result<Self, ModelError> {
        let check_len = |rows: &[[f64; 4]]| {
            if rows.len() != s.length {
                Err(ModelError::LengthMismatch { expected: s.length, got: rows.len() })
            } else {
                Ok(())
            }
        };
        match s.kind.as_str() {
            "pwm" => {
                check_len(&s.probs)?;
                Ok(GenModel::Pwm(PwmModel::from_probs(s.probs, s.alpha)?))
            }
            "mixture" => {
                let weights = s.mix_weights.ok_or_else(|| ModelError::Format("missing mix_weights".into()))?;
                let comps = s.components.ok_or_else(|| ModelError::Format("missing components".into()))?;
                let comps = comps
                    .into_iter()
                    .map(|c| {
                        check_len(&c.probs)?;
                        PwmModel::from_probs(c.probs, s.alpha)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GenModel::Mixture(MixtureModel::new(weights, comps, s.em_iters.unwrap_or(default_em_iters()))?))
            }
            other => Err(ModelError::Format(format!("unknown model kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_sequences(len: usize) -> impl Iterator<Item = Sequence> {
        (0..4u64.pow(len as u32)).map(move |r| Sequence::from_rank(r, len))
    }

    fn random_pwm(rng: &mut ChaCha8Rng, len: usize) -> PwmModel {
        let rows = (0..len)
            .map(|_| {
                let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() + 0.01);
                let s: f64 = raw.iter().sum();
                raw.map(|v| v / s)
            })
            .collect();
        PwmModel::from_probs(rows, 0.0).unwrap()
    }

    fn random_mixture(rng: &mut ChaCha8Rng, len: usize, k: usize) -> MixtureModel {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        // absorb rounding so the simplex check passes exactly
        let fix = 1.0 - w[1..].iter().sum::<f64>();
        w[0] = fix;
        MixtureModel::new(w, (0..k).map(|_| random_pwm(rng, len)).collect(), 20).unwrap()
    }

    #[test]
    fn uniform_log_likelihood() {
        let m = GenModel::uniform(3);
        for x in all_sequences(3) {
            assert!((m.log_likelihood(&x).unwrap() - (1.0f64 / 64.0).ln()).abs() < 1e-12);
        }
        assert!(matches!(m.log_likelihood(&"AC".parse().unwrap()), Err(ModelError::LengthMismatch { .. })));
    }

    #[test]
    fn smoothing_keeps_full_support() {
        let data = WeightedSamples::unit(vec!["AAA".parse().unwrap()]);
        let m = GenModel::Pwm(fit_pwm(&data, 0.1).unwrap());
        for x in all_sequences(3) {
            assert!(m.log_likelihood(&x).unwrap().is_finite());
        }
    }

    #[test]
    fn mixture_likelihood_matches_linear_space_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let mix = random_mixture(&mut rng, 3, 3);
            let model = GenModel::Mixture(mix.clone());
            for x in all_sequences(3) {
                let direct: f64 = mix
                    .mix_weights()
                    .iter()
                    .zip(mix.components())
                    .map(|(w, c)| w * c.probs().iter().zip(x.symbols()).map(|(r, &s)| r[s as usize]).product::<f64>())
                    .sum();
                assert!((model.log_likelihood(&x).unwrap() - direct.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distributions_normalize_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for len in 1..=6 {
            let pwm = GenModel::Pwm(random_pwm(&mut rng, len));
            let mix = GenModel::Mixture(random_mixture(&mut rng, len, 2));
            for m in [pwm, mix] {
                let total: f64 = all_sequences(len).map(|x| m.log_likelihood(&x).unwrap().exp()).sum();
                assert!((total - 1.0).abs() < 1e-10, "len {len}: {total}");
            }
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = GenModel::Mixture(random_mixture(&mut rng, 8, 3));
        assert_eq!(m.sample_seeded(50, 1), m.sample_seeded(50, 1));
        assert_ne!(m.sample_seeded(50, 1), m.sample_seeded(50, 2));
    }

    #[test]
    fn snapshots_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pwm = GenModel::Pwm(random_pwm(&mut rng, 4));
        let mix = GenModel::Mixture(random_mixture(&mut rng, 4, 2));
        for m in [pwm, mix] {
            let text = m.to_json();
            assert_eq!(GenModel::from_json(&text).unwrap(), m);
        }
        assert!(GenModel::from_json(r#"{"kind":"vae","length":1,"alpha":0,"probs":[[1,0,0,0]]}"#).is_err());
    }

    #[test]
    fn spec_deserializes_with_defaults() {
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"mixture","components":3}"#).unwrap();
        assert_eq!(s, ModelSpec::Mixture { components: 3, alpha: 0.1, em_iters: 20 });
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"pwm"}"#).unwrap();
        assert_eq!(s, ModelSpec::default());
    }
}
