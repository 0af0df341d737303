use std::collections::BTreeMap;

use rand::Rng;

use super::pwm::{fit_pwm, PwmModel};
use super::{log_sum_exp, ModelError, WeightedSamples};
use crate::seq::Sequence;

/// Finite mixture of position weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel {
    mix_weights: Vec<f64>,
    components: Vec<PwmModel>,
    em_iters: usize,
}

impl MixtureModel {
    pub fn new(mix_weights: Vec<f64>, components: Vec<PwmModel>, em_iters: usize) -> Result<Self, ModelError> {
        if components.is_empty() || components.len() != mix_weights.len() {
            return Err(ModelError::InvalidProbabilities("one mixture weight per component".into()));
        }
        let len = components[0].length();
        if components.iter().any(|c| c.length() != len) {
            return Err(ModelError::RaggedLengths);
        }
        let sum: f64 = mix_weights.iter().sum();
        if mix_weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidProbabilities(format!("mixture weights {mix_weights:?}")));
        }
        Ok(Self { mix_weights, components, em_iters })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn length(&self) -> usize {
        self.components[0].length()
    }

    pub fn mix_weights(&self) -> &[f64] {
        &self.mix_weights
    }

    pub fn components(&self) -> &[PwmModel] {
        &self.components
    }

    pub fn em_iters(&self) -> usize {
        self.em_iters
    }

    pub(crate) fn log_prob(&self, seq: &Sequence) -> f64 {
        log_sum_exp(self.mix_weights.iter().zip(&self.components).map(|(w, c)| w.ln() + c.log_prob(seq)))
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut chosen = None;
        for (k, &w) in self.mix_weights.iter().enumerate() {
            if w > 0.0 {
                cum += w;
                chosen = Some(k);
                if u < cum {
                    break;
                }
            }
        }
        self.components[chosen.expect("positive mixture weight")].draw(rng)
    }

    /// Site-wise marginal distribution `sum_k pi_k p_k[i][c]`.
    pub fn marginal_probs(&self) -> Vec<[f64; 4]> {
        let mut out = vec![[0.0; 4]; self.length()];
        for (w, comp) in self.mix_weights.iter().zip(&self.components) {
            for (row, crow) in out.iter_mut().zip(comp.probs()) {
                for c in 0..4 {
                    row[c] += w * crow[c];
                }
            }
        }
        out
    }
}

/// Result of an EM fit together with the per-iteration objective trace.
#[derive(Clone, Debug)]
pub struct EmFit {
    pub model: MixtureModel,
    /// Penalized weighted log-likelihood after initialization and after each
    /// iteration; with `alpha = 0` this is `sum_i w_i log p(x_i)`.
    pub objective: Vec<f64>,
}

/// Weighted EM for a `k`-component PWM mixture.
///
/// Components start from a weighted partition of the data: `k` distinct seed
/// sequences are drawn without replacement proportionally to their total
/// weight, every sample joins its nearest seed (Hamming distance, ties to the
/// earlier seed), and each cell is fitted with [`fit_pwm`]. Components with no
/// seed fall back to the global fit.
pub fn fit_mixture_em<R: Rng + ?Sized>(
    data: &WeightedSamples,
    k: usize,
    alpha: f64,
    iters: usize,
    rng: &mut R,
) -> Result<EmFit, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidComponents);
    }
    data.validate()?;
    let active: Vec<usize> = (0..data.len()).filter(|&i| data.weights()[i] > 0.0).collect();
    if active.is_empty() {
        return Err(ModelError::AllWeightsZero);
    }
    let samples: Vec<&Sequence> = active.iter().map(|&i| &data.samples()[i]).collect();
    let weights: Vec<f64> = active.iter().map(|&i| data.weights()[i]).collect();

    let global = fit_pwm(data, alpha)?;
    let seeds = draw_seeds(&samples, &weights, k, rng);
    let mut cells = vec![Vec::new(); seeds.len()];
    for (i, s) in samples.iter().enumerate() {
        let nearest = (0..seeds.len()).min_by_key(|&j| (s.hamming(seeds[j]), j)).expect("at least one seed");
        cells[nearest].push(i);
    }
    let mut components = Vec::with_capacity(k);
    for cell in &cells {
        let sub = WeightedSamples::new(
            cell.iter().map(|&i| samples[i].clone()).collect(),
            cell.iter().map(|&i| weights[i]).collect(),
        )?;
        components.push(fit_pwm(&sub, alpha)?);
    }
    while components.len() < k {
        components.push(global.clone());
    }
    let mut mix = vec![1.0 / k as f64; k];

    let penalized = |mix: &[f64], comps: &[PwmModel]| -> f64 {
        let model = MixtureModel { mix_weights: mix.to_vec(), components: comps.to_vec(), em_iters: iters };
        let ll: f64 = samples.iter().zip(&weights).map(|(s, w)| w * model.log_prob(s)).sum();
        if alpha > 0.0 {
            ll + alpha
                * comps
                    .iter()
                    .zip(mix)
                    .filter(|(_, &pi)| pi > 0.0)
                    .map(|(c, _)| c.probs().iter().flatten().map(|p| p.ln()).sum::<f64>())
                    .sum::<f64>()
        } else {
            ll
        }
    };

    let mut objective = vec![penalized(&mix, &components)];
    let n = samples.len();
    let mut resp = vec![vec![0.0; n]; k];
    for _ in 0..iters {
        // E-step
        for (i, s) in samples.iter().enumerate() {
            let logs: Vec<f64> = (0..k).map(|j| mix[j].ln() + components[j].log_prob(s)).collect();
            let norm = log_sum_exp(logs.iter().copied());
            for j in 0..k {
                resp[j][i] = (logs[j] - norm).exp();
            }
        }
        // M-step
        let totals: Vec<f64> = (0..k).map(|j| resp[j].iter().zip(&weights).map(|(r, w)| r * w).sum()).collect();
        let grand: f64 = totals.iter().sum();
        for j in 0..k {
            if totals[j] > 0.0 {
                let sub = WeightedSamples {
                    samples: samples.iter().map(|s| (*s).clone()).collect(),
                    weights: resp[j].iter().zip(&weights).map(|(r, w)| r * w).collect(),
                };
                components[j] = fit_pwm(&sub, alpha)?;
                mix[j] = totals[j] / grand;
            } else {
                // dead component: parameters are irrelevant once its weight is 0
                mix[j] = 0.0;
            }
        }
        objective.push(penalized(&mix, &components));
    }
    let sum: f64 = mix.iter().sum();
    mix.iter_mut().for_each(|w| *w /= sum);
    Ok(EmFit { model: MixtureModel { mix_weights: mix, components, em_iters: iters }, objective })
}

fn draw_seeds<'a, R: Rng + ?Sized>(
    samples: &[&'a Sequence],
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Vec<&'a Sequence> {
    let mut pool: BTreeMap<&Sequence, f64> = BTreeMap::new();
    for (s, &w) in samples.iter().zip(weights) {
        *pool.entry(*s).or_insert(0.0) += w;
    }
    let mut seeds = Vec::with_capacity(k);
    while seeds.len() < k && !pool.is_empty() {
        let total: f64 = pool.values().sum();
        let target = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut pick = *pool.keys().next_back().expect("non-empty pool");
        for (s, &w) in &pool {
            cum += w;
            if target < cum {
                pick = *s;
                break;
            }
        }
        pool.remove(pick);
        seeds.push(pick);
    }
    seeds
}
