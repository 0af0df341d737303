//! The adaptive-sampling loop: sample from the current model, score, tighten
//! the relaxed target set, weight by `P(S^(t)|x)`, refit by weighted MLE.

mod bound;
mod quantile;
mod reuse;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genmodels::{GenModel, ModelError, ModelSpec, WeightedSamples};
use crate::oracles::{product_prob, Predictor, SideCondition, TargetSet};
use crate::seq::Sequence;

pub use bound::{exact_bound_gap, BoundGap, MAX_ENUMERATED};
pub use quantile::{quantile, update_threshold_max, update_width_spec};
pub use reuse::{reuse_weights, Epoch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("no scores to take a quantile of")]
    EmptyScores,
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("effective sample size {ess} below floor {floor} at iteration {iteration}")]
    DegenerateWeights { iteration: usize, ess: f64, floor: f64 },
    #[error("budget {budget} is smaller than batch size {batch}")]
    BudgetTooSmall { budget: usize, batch: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("design space of length {length} is too large to enumerate")]
    SpaceTooLarge { length: usize },
    #[error("target set has zero probability under the model")]
    ZeroTargetMass,
    #[error("initial data is empty")]
    EmptyInit,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Primary property oracle plus any side conditions multiplied into the
/// weights (constraints, secondary properties).
pub struct DesignProblem<'a> {
    property: &'a dyn Predictor,
    side_conditions: Vec<&'a dyn SideCondition>,
}

impl<'a> DesignProblem<'a> {
    pub fn new(property: &'a dyn Predictor) -> Self {
        Self { property, side_conditions: Vec::new() }
    }

    pub fn with_condition(mut self, condition: &'a dyn SideCondition) -> Self {
        self.side_conditions.push(condition);
        self
    }

    pub fn property(&self) -> &'a dyn Predictor {
        self.property
    }

    pub fn length(&self) -> usize {
        self.property.length()
    }

    pub fn check_lengths(&self) -> Result<(), EngineError> {
        let len = self.length();
        for c in &self.side_conditions {
            if c.length() != len {
                return Err(EngineError::LengthMismatch { expected: len, got: c.length() });
            }
        }
        Ok(())
    }

    /// `P(S|x) * prod_k P(S_k|x)` given the cached expected score of `x`.
    pub fn weight(&self, x: &Sequence, score: f64, target: &TargetSet) -> f64 {
        let primary = target.prob(score, self.property.noise_variance());
        if self.side_conditions.is_empty() {
            return primary;
        }
        let mut factors = Vec::with_capacity(self.side_conditions.len() + 1);
        factors.push(primary);
        factors.extend(self.side_conditions.iter().map(|c| c.prob(x)));
        product_prob(&factors)
    }

    /// True when every side condition holds as a hard 0/1 decision.
    pub fn admits(&self, x: &Sequence) -> bool {
        self.side_conditions.iter().all(|c| c.admits(x))
    }

    pub(crate) fn score_all(&self, samples: &[Sequence]) -> Vec<f64> {
        samples.iter().map(|s| self.property.mean(s)).collect()
    }
}

/// Per-sample weights for a fresh batch (scores the batch).
pub fn compute_weights(problem: &DesignProblem<'_>, samples: &[Sequence], target: &TargetSet) -> Vec<f64> {
    samples.iter().map(|x| problem.weight(x, problem.property.mean(x), target)).collect()
}

/// Sum of the weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    weights.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Maximize,
    /// Interval targets centred on `target` with an annealed half-width.
    Specify {
        target: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbasConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub budget: usize,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reuse_old: bool,
    #[serde(default = "default_ess_floor")]
    pub ess_floor: f64,
}

fn default_mode() -> Mode {
    Mode::Maximize
}
fn default_quantile() -> f64 {
    0.9
}
fn default_batch() -> usize {
    1000
}
fn default_ess_floor() -> f64 {
    1.0
}

impl DbasConfig {
    pub fn maximize(quantile: f64, batch_size: usize, budget: usize, seed: u64) -> Self {
        Self {
            mode: Mode::Maximize,
            quantile,
            batch_size,
            budget,
            model: ModelSpec::default(),
            seed,
            reuse_old: false,
            ess_floor: default_ess_floor(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.batch_size == 0 || self.budget < self.batch_size {
            return Err(EngineError::BudgetTooSmall { budget: self.budget, batch: self.batch_size });
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(EngineError::InvalidQuantile(self.quantile));
        }
        Ok(())
    }

    /// Number of sampling rounds the budget pays for.
    pub fn iterations(&self) -> usize {
        self.budget / self.batch_size
    }
}

/// One trajectory row. `gamma` is the threshold (maximization), the
/// half-width (specification), a fixed admission threshold (feedback
/// baseline) or absent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub gamma: Option<f64>,
    pub mean_score: f64,
    pub std_score: f64,
    pub max_score: f64,
    pub ess: f64,
    pub budget_used: usize,
}

impl IterationRow {
    pub fn from_scores(iteration: usize, gamma: Option<f64>, scores: &[f64], ess: f64, budget_used: usize) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { iteration, gamma, mean_score: mean, std_score: var.sqrt(), max_score: max, ess, budget_used }
    }
}

pub const CSV_HEADER: &str = "iteration,gamma,mean_score,std_score,max_score,ess,budget_used";

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<IterationRow>,
    /// Last batch with the weights it was refit with.
    pub final_samples: WeightedSamples,
    pub final_scores: Vec<f64>,
    pub final_model: GenModel,
    /// Highest expected score over every generated sample that satisfies the
    /// problem's side conditions.
    pub best: Option<(Sequence, f64)>,
    /// Oracle mean evaluations charged to the sequence budget.
    pub evaluations: usize,
}

impl RunRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let gamma = r.gamma.map(|g| g.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration, gamma, r.mean_score, r.std_score, r.max_score, r.ess, r.budget_used
            )
            .unwrap();
        }
        out
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.gamma).collect()
    }

    pub fn gamma_non_decreasing(&self) -> bool {
        self.gammas().windows(2).all(|w| w[1] >= w[0])
    }

    pub fn gamma_non_increasing(&self) -> bool {
        self.gammas().windows(2).all(|w| w[1] <= w[0])
    }
}

/// Parses the rows of a trajectory CSV written by [`RunRecord::to_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<IterationRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("unexpected trajectory header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("bad row {line:?}"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
            let int = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
            Ok(IterationRow {
                iteration: int(f[0])?,
                gamma: if f[1].is_empty() { None } else { Some(num(f[1])?) },
                mean_score: num(f[2])?,
                std_score: num(f[3])?,
                max_score: num(f[4])?,
                ess: num(f[5])?,
                budget_used: int(f[6])?,
            })
        })
        .collect()
}

/// Keeps the highest-scoring admitted sample seen so far in `best`.
pub fn track_best(
    best: &mut Option<(Sequence, f64)>,
    problem: &DesignProblem<'_>,
    samples: &[Sequence],
    scores: &[f64],
) {
    for (s, &y) in samples.iter().zip(scores) {
        if !problem.admits(s) {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| y > *b) {
            *best = Some((s.clone(), y));
        }
    }
}

/// Runs the adaptive-sampling design loop until the sequence budget is spent.
///
/// With `init` the first model is fit to it with unit weights and its scores
/// set the starting threshold (these evaluations are not charged to the
/// budget). Without it a uniform batch of `batch_size` is drawn and charged.
pub fn dbas_run(
    config: &DbasConfig,
    problem: &DesignProblem<'_>,
    init: Option<&[Sequence]>,
) -> Result<RunRecord, EngineError> {
    config.validate()?;
    problem.check_lengths()?;
    let len = problem.length();
    let batch = config.batch_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut evaluations = 0;
    let init_set: Vec<Sequence> = match init {
        Some(seqs) => {
            if seqs.is_empty() {
                return Err(EngineError::EmptyInit);
            }
            if let Some(bad) = seqs.iter().find(|s| s.len() != len) {
                return Err(EngineError::LengthMismatch { expected: len, got: bad.len() });
            }
            seqs.to_vec()
        }
        None => {
            evaluations += batch;
            GenModel::uniform(len).sample(batch, &mut rng)
        }
    };
    let init_scores = problem.score_all(&init_set);
    let mut gamma = match config.mode {
        Mode::Maximize => quantile(&init_scores, 0.5)?,
        Mode::Specify { target } => {
            let dev: Vec<f64> = init_scores.iter().map(|s| (s - target).abs()).collect();
            quantile(&dev, 0.5)?
        }
    };
    let init_data = WeightedSamples::unit(init_set);
    let mut model = config.model.fit(&init_data, &mut rng)?;
    let mut rows = vec![IterationRow::from_scores(0, Some(gamma), &init_scores, init_data.total_weight(), evaluations)];
    let mut best = None;
    if init.is_none() {
        track_best(&mut best, problem, init_data.samples(), &init_scores);
    }

    let mut history: Vec<Epoch> = Vec::new();
    let mut last = (init_data, init_scores);
    let mut t = 0;
    while evaluations + batch <= config.budget {
        t += 1;
        let samples = model.sample(batch, &mut rng);
        let scores = problem.score_all(&samples);
        evaluations += batch;
        track_best(&mut best, problem, &samples, &scores);

        let target = match config.mode {
            Mode::Maximize => {
                gamma = update_threshold_max(&scores, config.quantile, Some(gamma))?;
                TargetSet::HalfLine { gamma }
            }
            Mode::Specify { target } => {
                gamma = update_width_spec(&scores, target, config.quantile, Some(gamma))?;
                TargetSet::Interval { center: target, half_width: gamma }
            }
        };
        let weights: Vec<f64> = samples.iter().zip(&scores).map(|(x, &y)| problem.weight(x, y, &target)).collect();
        let current = WeightedSamples::new(samples, weights)?;

        let train = if config.reuse_old {
            history.push(Epoch { samples: current.samples().to_vec(), scores: scores.clone(), model: model.clone() });
            reuse_weights(&history, &model, &target, problem)?
        } else {
            current.clone()
        };
        let ess = effective_sample_size(train.weights());
        if !(ess >= config.ess_floor) {
            return Err(EngineError::DegenerateWeights { iteration: t, ess, floor: config.ess_floor });
        }
        model = config.model.fit(&train, &mut rng)?;
        rows.push(IterationRow::from_scores(t, Some(gamma), &scores, ess, evaluations));
        last = (current, scores);
    }

    let (final_samples, final_scores) = last;
    Ok(RunRecord { rows, final_samples, final_scores, final_model: model, best, evaluations })
}
