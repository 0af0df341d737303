//! Property oracles `p(y|x)` and the set probabilities `P(S|x)` that weight
//! every refit.

mod gauss;
mod mlp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{translate_codon, OneHot, Protein, Sequence};

pub use gauss::{normal_cdf, normal_interval, normal_sf};
pub use mlp::{make_random_oracle, mlp_mean, Activation, MlpOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("input width {got} does not match oracle input width {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("sequence length {got} does not match expected length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("interval half-width must be non-negative, got {0}")]
    NegativeWidth(f64),
    #[error("noise variance must be a non-negative finite number, got {0}")]
    NegativeVariance(f64),
    #[error("no residuals supplied")]
    EmptyInput,
    #[error("target protein contains a stop at residue {0}")]
    StopInTarget(usize),
    #[error("invalid oracle architecture: {0}")]
    InvalidArchitecture(String),
    #[error("malformed oracle file: {0}")]
    Format(String),
}

/// A scalar property predictor with homoscedastic noise.
///
/// `mean` assumes `seq.len() == self.length()`; callers validate lengths once
/// per batch rather than per evaluation.
pub trait Predictor: Send + Sync {
    fn length(&self) -> usize;
    fn mean(&self, seq: &Sequence) -> f64;
    /// Zero means a deterministic (Dirac) oracle.
    fn noise_variance(&self) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn length(&self) -> usize {
        (**self).length()
    }
    fn mean(&self, seq: &Sequence) -> f64 {
        (**self).mean(seq)
    }
    fn noise_variance(&self) -> f64 {
        (**self).noise_variance()
    }
}

/// Closure-backed predictor, mostly for analytic test objectives.
pub struct FnOracle<F> {
    length: usize,
    noise_variance: f64,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&Sequence) -> f64 + Send + Sync,
{
    pub fn new(length: usize, noise_variance: f64, f: F) -> Self {
        assert!(noise_variance >= 0.0);
        Self { length, noise_variance, f }
    }
}

impl<F> Predictor for FnOracle<F>
where
    F: Fn(&Sequence) -> f64 + Send + Sync,
{
    fn length(&self) -> usize {
        self.length
    }
    fn mean(&self, seq: &Sequence) -> f64 {
        (self.f)(seq)
    }
    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// Desired property values: `{y >= gamma}` or `[center - half_width, center + half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    HalfLine { gamma: f64 },
    Interval { center: f64, half_width: f64 },
}

impl TargetSet {
    pub fn interval(center: f64, half_width: f64) -> Result<Self, OracleError> {
        if !(half_width >= 0.0) {
            return Err(OracleError::NegativeWidth(half_width));
        }
        Ok(Self::Interval { center, half_width })
    }

    /// Noise-free membership test.
    pub fn contains(&self, y: f64) -> bool {
        match *self {
            TargetSet::HalfLine { gamma } => y >= gamma,
            TargetSet::Interval { center, half_width } => (y - center).abs() <= half_width,
        }
    }

    /// `P(Y in S)` for `Y ~ N(mean, variance)`; an indicator when `variance == 0`.
    pub fn prob(&self, mean: f64, variance: f64) -> f64 {
        match *self {
            TargetSet::HalfLine { gamma } => half_line_prob(mean, variance, gamma),
            TargetSet::Interval { center, half_width } => interval_prob_from_mean(mean, variance, center, half_width),
        }
    }
}

pub fn half_line_prob(mean: f64, variance: f64, gamma: f64) -> f64 {
    if variance == 0.0 {
        return if mean >= gamma { 1.0 } else { 0.0 };
    }
    normal_sf((gamma - mean) / variance.sqrt())
}

pub fn interval_prob_from_mean(mean: f64, variance: f64, center: f64, half_width: f64) -> f64 {
    if variance == 0.0 {
        return if (mean - center).abs() <= half_width { 1.0 } else { 0.0 };
    }
    let sd = variance.sqrt();
    normal_interval((center - half_width - mean) / sd, (center + half_width - mean) / sd)
}

/// `P(y >= gamma | x)` under the oracle's noise model.
pub fn survival_prob(oracle: &MlpOracle, x: &OneHot, gamma: f64) -> Result<f64, OracleError> {
    let mean = mlp_mean(oracle, x)?;
    Ok(half_line_prob(mean, oracle.noise_variance(), gamma))
}

/// `P(|y - center| <= half_width | x)` under the oracle's noise model.
pub fn interval_prob(oracle: &MlpOracle, x: &OneHot, center: f64, half_width: f64) -> Result<f64, OracleError> {
    if !(half_width >= 0.0) {
        return Err(OracleError::NegativeWidth(half_width));
    }
    let mean = mlp_mean(oracle, x)?;
    Ok(interval_prob_from_mean(mean, oracle.noise_variance(), center, half_width))
}

/// A factor `P(S_k|x)` multiplied into every weight alongside the primary
/// property (hard constraints, or secondary properties with fixed targets).
pub trait SideCondition: Send + Sync {
    fn length(&self) -> usize;
    fn prob(&self, seq: &Sequence) -> f64;
    /// 0/1 decision used by selection-based baselines.
    fn admits(&self, seq: &Sequence) -> bool {
        self.prob(seq) >= 0.5
    }
}

/// Deterministic oracle `1{t(x) = target}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintOracle {
    target: Protein,
}

impl ConstraintOracle {
    pub fn new(target: Protein) -> Result<Self, OracleError> {
        if let Some(pos) = target.stop_position() {
            return Err(OracleError::StopInTarget(pos));
        }
        Ok(Self { target })
    }

    pub fn target(&self) -> &Protein {
        &self.target
    }

    pub fn constraint_prob(&self, x: &Sequence) -> Result<f64, OracleError> {
        let expected = 3 * self.target.len();
        if x.len() != expected {
            return Err(OracleError::LengthMismatch { expected, got: x.len() });
        }
        Ok(self.satisfied(x) as u8 as f64)
    }

    fn satisfied(&self, x: &Sequence) -> bool {
        x.symbols()
            .chunks_exact(3)
            .zip(self.target.residues())
            .all(|(c, &aa)| translate_codon([c[0], c[1], c[2]]) == aa)
    }
}

impl SideCondition for ConstraintOracle {
    fn length(&self) -> usize {
        3 * self.target.len()
    }
    fn prob(&self, seq: &Sequence) -> f64 {
        self.satisfied(seq) as u8 as f64
    }
    fn admits(&self, seq: &Sequence) -> bool {
        self.satisfied(seq)
    }
}

/// A secondary property oracle paired with a fixed target set.
pub struct PropertyCondition<P> {
    pub oracle: P,
    pub target: TargetSet,
}

impl<P: Predictor> SideCondition for PropertyCondition<P> {
    fn length(&self) -> usize {
        self.oracle.length()
    }
    fn prob(&self, seq: &Sequence) -> f64 {
        self.target.prob(self.oracle.mean(seq), self.oracle.noise_variance())
    }
    fn admits(&self, seq: &Sequence) -> bool {
        self.target.contains(self.oracle.mean(seq))
    }
}

/// Joint probability of conditionally independent properties.
pub fn product_prob(probs: &[f64]) -> f64 {
    probs.iter().product()
}

/// Maximum-likelihood variance of zero-mean Gaussian residuals.
pub fn fit_sigma_ml(residuals: &[f64]) -> Result<f64, OracleError> {
    if residuals.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    Ok(residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64)
}
