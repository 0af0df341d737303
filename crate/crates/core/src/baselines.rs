//! Comparison methods that share the engine's oracles and budget accounting.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{quantile, track_best, DbasConfig, DesignProblem, EngineError, IterationRow, RunRecord};
use crate::genmodels::{GenModel, ModelError, ModelSpec, WeightedSamples};
use crate::seq::{codons_for, Protein, Sequence, ALPHABET_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training sequences have differing lengths")]
    RaggedLengths,
    #[error("budget {budget} is smaller than batch size {batch}")]
    BudgetTooSmall { budget: usize, batch: usize },
    #[error("training length {got} does not match {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("target protein contains a stop at residue {0}")]
    StopInTarget(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sequences with known property values.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrainingSet {
    pairs: Vec<(Sequence, f64)>,
}

impl LabeledTrainingSet {
    pub fn new(pairs: Vec<(Sequence, f64)>) -> Result<Self, BaselineError> {
        if let Some((first, _)) = pairs.first() {
            if pairs.iter().any(|(s, _)| s.len() != first.len()) {
                return Err(BaselineError::RaggedLengths);
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(Sequence, f64)] {
        &self.pairs
    }

    pub fn sequences(&self) -> Vec<Sequence> {
        self.pairs.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn max_label(&self) -> Option<f64> {
        self.pairs.iter().map(|p| p.1).reduce(f64::max)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    // Canonical order so summations do not depend on input order.
    fn sorted_pairs(&self) -> Vec<&(Sequence, f64)> {
        let mut v: Vec<_> = self.pairs.iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// Uniform random search. Rows are emitted every `batch_size` draws with the
/// running maximum in `max_score`.
pub fn random_design(
    length: usize,
    budget: usize,
    batch_size: usize,
    problem: &DesignProblem<'_>,
    seed: u64,
) -> Result<RunRecord, BaselineError> {
    if budget == 0 || batch_size == 0 {
        return Err(BaselineError::BudgetTooSmall { budget, batch: batch_size });
    }
    if problem.length() != length {
        return Err(BaselineError::LengthMismatch { expected: problem.length(), got: length });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = GenModel::uniform(length);
    let mut best = None;
    let mut rows = Vec::new();
    let mut used = 0;
    let mut running_max = f64::NEG_INFINITY;
    let mut last = (Vec::new(), Vec::new());
    while used < budget {
        let n = batch_size.min(budget - used);
        let samples = uniform.sample(n, &mut rng);
        let scores: Vec<f64> = samples.iter().map(|s| problem.property().mean(s)).collect();
        used += n;
        track_best(&mut best, problem, &samples, &scores);
        let mut row = IterationRow::from_scores(rows.len() + 1, None, &scores, n as f64, used);
        running_max = running_max.max(row.max_score);
        row.max_score = running_max;
        rows.push(row);
        last = (samples, scores);
    }
    let (samples, scores) = last;
    Ok(RunRecord {
        rows,
        final_samples: WeightedSamples::unit(samples),
        final_scores: scores,
        final_model: uniform,
        best,
        evaluations: used,
    })
}

fn argmax_mean(sums: &[f64], counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&s, &c)) in sums.iter().zip(counts).enumerate() {
        if c == 0 {
            continue;
        }
        let mean = s / c as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((i, mean));
        }
    }
    best.map(|(i, _)| i)
}

/// Per position, the symbol whose carriers have the highest mean label.
/// Ties and uncovered cells resolve to the lowest symbol index.
pub fn marginal_design(train: &LabeledTrainingSet) -> Result<Sequence, BaselineError> {
    let first = train.pairs.first().ok_or(BaselineError::EmptyTrainingSet)?;
    let len = first.0.len();
    let mut sums = vec![[0.0f64; ALPHABET_SIZE]; len];
    let mut counts = vec![[0usize; ALPHABET_SIZE]; len];
    for (seq, y) in train.sorted_pairs() {
        for (pos, &s) in seq.symbols().iter().enumerate() {
            sums[pos][s as usize] += y;
            counts[pos][s as usize] += 1;
        }
    }
    let symbols =
        (0..len).map(|pos| argmax_mean(&sums[pos], &counts[pos]).expect("every position is covered") as u8).collect();
    Ok(Sequence::from_indices(symbols).expect("non-empty"))
}

/// Codon-space variant: per residue, the synonymous codon with the highest
/// mean label among training sequences that carry it. Uncovered residues fall
/// back to their lowest-ranked codon.
pub fn marginal_design_codons(train: &LabeledTrainingSet, protein: &Protein) -> Result<Sequence, BaselineError> {
    if train.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if let Some(pos) = protein.stop_position() {
        return Err(BaselineError::StopInTarget(pos));
    }
    let len = 3 * protein.len();
    if let Some((s, _)) = train.pairs.iter().find(|(s, _)| s.len() != len) {
        return Err(BaselineError::LengthMismatch { expected: len, got: s.len() });
    }
    let mut out = Vec::with_capacity(len);
    let pairs = train.sorted_pairs();
    for (i, &aa) in protein.residues().iter().enumerate() {
        let options = codons_for(aa);
        let mut sums = vec![0.0; options.len()];
        let mut counts = vec![0usize; options.len()];
        for (seq, y) in &pairs {
            let c = &seq.symbols()[3 * i..3 * i + 3];
            if let Some(j) = options.iter().position(|o| o[..] == *c) {
                sums[j] += y;
                counts[j] += 1;
            }
        }
        let pick = argmax_mean(&sums, &counts).unwrap_or(0);
        out.extend_from_slice(&options[pick]);
    }
    Ok(Sequence::from_indices(out).expect("non-empty"))
}

/// Settings for the fixed-threshold feedback baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackConfig {
    pub batch_size: usize,
    pub budget: usize,
    pub model: ModelSpec,
    pub seed: u64,
    /// Admission threshold; `None` takes `threshold_quantile` of the initial
    /// scores.
    pub threshold: Option<f64>,
    pub threshold_quantile: f64,
}

impl FeedbackConfig {
    /// Shares batch size, budget, model family and seed with a DbAS run.
    pub fn matching(cfg: &DbasConfig) -> Self {
        Self {
            batch_size: cfg.batch_size,
            budget: cfg.budget,
            model: cfg.model,
            seed: cfg.seed,
            threshold: None,
            threshold_quantile: 0.8,
        }
    }
}

/// Feedback loop with 0/1 admission: a FIFO pool starts as the initial data;
/// each round, samples whose expected score exceeds a fixed threshold (and that
/// pass every side condition) replace the oldest pool members, and the model is
/// refit on the pool with unit weights.
pub fn fixed_threshold_feedback(
    cfg: &FeedbackConfig,
    problem: &DesignProblem<'_>,
    init: &[Sequence],
) -> Result<RunRecord, BaselineError> {
    if cfg.batch_size == 0 || cfg.budget < cfg.batch_size {
        return Err(BaselineError::BudgetTooSmall { budget: cfg.budget, batch: cfg.batch_size });
    }
    if init.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    problem.check_lengths()?;
    if let Some(s) = init.iter().find(|s| s.len() != problem.length()) {
        return Err(BaselineError::LengthMismatch { expected: problem.length(), got: s.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_scores: Vec<f64> = init.iter().map(|s| problem.property().mean(s)).collect();
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => quantile(&init_scores, cfg.threshold_quantile)?,
    };
    let capacity = init.len();
    let mut pool: VecDeque<Sequence> = init.iter().cloned().collect();
    let mut model = cfg.model.fit(&WeightedSamples::unit(init.to_vec()), &mut rng)?;
    let mut rows = vec![IterationRow::from_scores(0, Some(threshold), &init_scores, capacity as f64, 0)];
    let mut best = None;
    let mut used = 0;
    let mut last = (WeightedSamples::unit(Vec::new()), Vec::new());
    let mut t = 0;
    while used + cfg.batch_size <= cfg.budget {
        t += 1;
        let samples = model.sample(cfg.batch_size, &mut rng);
        let scores: Vec<f64> = samples.iter().map(|s| problem.property().mean(s)).collect();
        used += cfg.batch_size;
        track_best(&mut best, problem, &samples, &scores);
        let admitted: Vec<bool> =
            samples.iter().zip(&scores).map(|(x, &y)| y > threshold && problem.admits(x)).collect();
        let mut any = false;
        for (x, &ok) in samples.iter().zip(&admitted) {
            if ok {
                pool.push_back(x.clone());
                any = true;
            }
        }
        while pool.len() > capacity {
            pool.pop_front();
        }
        if any {
            model = cfg.model.fit(&WeightedSamples::unit(pool.iter().cloned().collect()), &mut rng)?;
        }
        rows.push(IterationRow::from_scores(t, Some(threshold), &scores, pool.len() as f64, used));
        let weights = admitted.iter().map(|&a| a as u8 as f64).collect();
        last = (WeightedSamples::new(samples, weights)?, scores);
    }
    Ok(RunRecord { rows, final_samples: last.0, final_scores: last.1, final_model: model, best, evaluations: used })
}
