use rand::Rng;

use super::{ModelError, WeightedSamples};
use crate::seq::{Sequence, ALPHABET_SIZE};

/// Site-independent categorical distribution (position weight matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct PwmModel {
    probs: Vec<[f64; 4]>,
    alpha: f64,
}

impl PwmModel {
    pub fn uniform(length: usize) -> Self {
        Self { probs: vec![[0.25; 4]; length], alpha: 0.0 }
    }

    /// Builds a model from explicit rows; each row must be a probability
    /// vector to within `1e-12`.
    pub fn from_probs(probs: Vec<[f64; 4]>, alpha: f64) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::Empty);
        }
        for (i, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(ModelError::InvalidProbabilities(format!("row {i}: {row:?}")));
            }
        }
        if !(alpha >= 0.0) {
            return Err(ModelError::InvalidSmoothing(alpha));
        }
        Ok(Self { probs, alpha })
    }

    pub fn length(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[[f64; 4]] {
        &self.probs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Most probable symbol per position, ties to the lowest index.
    pub fn modal_sequence(&self) -> Sequence {
        let symbols = self
            .probs
            .iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..ALPHABET_SIZE {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        Sequence::from_indices(symbols).expect("non-empty model")
    }

    /// `log p(x)` without a length check.
    pub(crate) fn log_prob(&self, seq: &Sequence) -> f64 {
        self.probs.iter().zip(seq.symbols()).map(|(row, &s)| row[s as usize].ln()).sum()
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        let symbols = self.probs.iter().map(|row| draw_symbol(row, rng)).collect();
        Sequence::from_indices(symbols).expect("non-empty model")
    }
}

fn draw_symbol<R: Rng + ?Sized>(row: &[f64; 4], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (c, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = c;
            if u < cum {
                return c as u8;
            }
        }
    }
    // rounding left u above the accumulated mass
    last as u8
}

/// Closed-form maximizer of `sum_j w_j log p(x_j)` (with `alpha` pseudo-counts
/// per symbol):
/// `p[i][c] = (alpha + sum_j w_j 1{x_j[i] = c}) / (4 alpha + sum_j w_j)`.
pub fn fit_pwm(data: &WeightedSamples, alpha: f64) -> Result<PwmModel, ModelError> {
    if !(alpha >= 0.0) {
        return Err(ModelError::InvalidSmoothing(alpha));
    }
    let length = data.validate()?;
    let mut counts = vec![[0.0f64; 4]; length];
    let mut total = 0.0;
    for (seq, &w) in data.samples().iter().zip(data.weights()) {
        total += w;
        for (row, &s) in counts.iter_mut().zip(seq.symbols()) {
            row[s as usize] += w;
        }
    }
    if !(total > 0.0) {
        return Err(ModelError::AllWeightsZero);
    }
    let denom = 4.0 * alpha + total;
    let probs = counts.into_iter().map(|row| row.map(|c| (alpha + c) / denom)).collect();
    Ok(PwmModel { probs, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(seqs: &[&str], weights: &[f64]) -> WeightedSamples {
        WeightedSamples::new(seqs.iter().map(|s| s.parse().unwrap()).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn counting_examples() {
        let m = fit_pwm(&data(&["AA", "AC"], &[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(m.probs()[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.probs()[1], [0.5, 0.5, 0.0, 0.0]);
        let m = fit_pwm(&data(&["AA", "AC"], &[1.0, 3.0]), 0.0).unwrap();
        assert_eq!(m.probs()[1][1], 0.75);
    }

    #[test]
    fn smoothed_single_sample_matches_numeric_maximum() {
        let m = fit_pwm(&data(&["A"], &[1.0]), 0.1).unwrap();
        assert!((m.probs()[0][0] - 1.1 / 1.4).abs() < 1e-15);
        // penalized objective log p_A + 0.1 * sum_c log p_c over p_A with the
        // remaining symbols sharing (1 - p_A) equally; golden-section search
        let obj = |pa: f64| {
            let rest = (1.0 - pa) / 3.0;
            pa.ln() + 0.1 * (pa.ln() + 3.0 * rest.ln())
        };
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if obj(a) < obj(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        assert!((m.probs()[0][0] - 0.5 * (lo + hi)).abs() < 1e-7);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_pwm(&data(&["AA", "AC"], &[0.0, 0.0]), 0.1), Err(ModelError::AllWeightsZero));
        assert_eq!(fit_pwm(&data(&["AA", "ACG"], &[1.0, 1.0]), 0.1), Err(ModelError::RaggedLengths));
        assert!(WeightedSamples::new(vec!["A".parse().unwrap()], vec![-1.0]).is_err());
        assert!(WeightedSamples::new(vec!["A".parse().unwrap()], vec![]).is_err());
    }

    #[test]
    fn sampling_degenerate_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = PwmModel::from_probs(vec![[1.0, 0.0, 0.0, 0.0]; 6], 0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(det.draw(&mut rng).to_string(), "AAAAAA");
        }
        let uni = PwmModel::uniform(1);
        let n = 100_000;
        let mut freq = [0usize; 4];
        for _ in 0..n {
            freq[uni.draw(&mut rng).symbols()[0] as usize] += 1;
        }
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for f in freq {
            assert!((f as f64 - n as f64 * 0.25).abs() < 4.0 * sd, "{freq:?}");
        }
    }

    #[test]
    fn modal_sequence_breaks_ties_low() {
        let m = PwmModel::from_probs(vec![[0.25; 4], [0.1, 0.2, 0.3, 0.4]], 0.0).unwrap();
        assert_eq!(m.modal_sequence().to_string(), "AT");
    }
}
