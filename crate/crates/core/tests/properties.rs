use proptest::prelude::*;

use dbas::baselines::{marginal_design, LabeledTrainingSet};
use dbas::engine::{effective_sample_size, quantile, update_threshold_max, update_width_spec};
use dbas::genmodels::{fit_pwm, GenModel, PwmModel, WeightedSamples};
use dbas::oracles::{half_line_prob, interval_prob_from_mean};
use dbas::seq::{decode_one_hot, encode_one_hot, translate, Sequence, CODON_TABLE};

fn sequence(len: usize) -> impl Strategy<Value = Sequence> {
    prop::collection::vec(0u8..4, len).prop_map(|v| Sequence::from_indices(v).unwrap())
}

fn weighted(len: usize) -> impl Strategy<Value = (Vec<Sequence>, Vec<f64>)> {
    prop::collection::vec((sequence(len), 0.01f64..5.0), 1..30).prop_map(|v| v.into_iter().unzip())
}

fn stochastic_row() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.01f64..1.0).prop_map(|r| {
        let s: f64 = r.iter().sum();
        r.map(|p| p / s)
    })
}

fn ll(model: &PwmModel, samples: &[Sequence], weights: &[f64]) -> f64 {
    let m = GenModel::Pwm(model.clone());
    samples.iter().zip(weights).map(|(s, w)| w * m.log_likelihood(s).unwrap()).sum()
}

proptest! {
    #[test]
    fn text_and_rank_round_trip(s in (1usize..20).prop_flat_map(sequence)) {
        let text = s.to_string();
        prop_assert_eq!(&text.parse::<Sequence>().unwrap(), &s);
        prop_assert_eq!(&text.to_lowercase().parse::<Sequence>().unwrap(), &s);
        prop_assert_eq!(decode_one_hot(&encode_one_hot(&s)).unwrap(), s.clone());
        if s.len() <= 31 {
            prop_assert_eq!(Sequence::from_rank(s.rank(), s.len()), s);
        }
    }

    #[test]
    fn translation_is_codon_wise(s in (1usize..10).prop_flat_map(|n| sequence(3 * n))) {
        if let Ok(p) = translate(&s) {
            for (i, c) in s.symbols().chunks(3).enumerate() {
                let idx = 16 * c[0] as usize + 4 * c[1] as usize + c[2] as usize;
                prop_assert_eq!(CODON_TABLE[idx], p.residues()[i]);
            }
        }
    }

    #[test]
    fn pwm_fit_beats_any_alternative((samples, weights) in weighted(3), alt in prop::collection::vec(stochastic_row(), 3)) {
        let data = WeightedSamples::new(samples.clone(), weights.clone()).unwrap();
        let fit = fit_pwm(&data, 0.0).unwrap();
        let other = PwmModel::from_probs(alt, 0.0).unwrap();
        prop_assert!(ll(&fit, &samples, &weights) >= ll(&other, &samples, &weights) - 1e-9);
    }

    #[test]
    fn pwm_fit_is_weight_scale_invariant((samples, weights) in weighted(4), c in 0.01f64..100.0) {
        let a = fit_pwm(&WeightedSamples::new(samples.clone(), weights.clone()).unwrap(), 0.0).unwrap();
        let scaled = weights.iter().map(|w| w * c).collect();
        let b = fit_pwm(&WeightedSamples::new(samples, scaled).unwrap(), 0.0).unwrap();
        for (ra, rb) in a.probs().iter().zip(b.probs()) {
            for k in 0..4 {
                prop_assert!((ra[k] - rb[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn marginal_is_permutation_invariant(
        pairs in prop::collection::vec((sequence(4), -5.0f64..5.0), 1..25),
        rot in 0usize..25,
    ) {
        let a = marginal_design(&LabeledTrainingSet::new(pairs.clone()).unwrap()).unwrap();
        let mut shuffled = pairs.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let b = marginal_design(&LabeledTrainingSet::new(shuffled).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn quantile_is_monotone_and_bounded(v in prop::collection::vec(-1e3f64..1e3, 1..50), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = quantile(&v, lo).unwrap();
        let b = quantile(&v, hi).unwrap();
        prop_assert!(a <= b);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= a && b <= max);
    }

    #[test]
    fn annealed_sets_never_loosen(v in prop::collection::vec(-10f64..10.0, 1..40), prev in -10f64..10.0, q in 0.0f64..=1.0) {
        prop_assert!(update_threshold_max(&v, q, Some(prev)).unwrap() >= prev);
        let w = prev.abs();
        prop_assert!(update_width_spec(&v, 0.0, q, Some(w)).unwrap() <= w);
    }

    #[test]
    fn set_probabilities_are_monotone(mean in -5f64..5.0, var in 0.0f64..4.0, g in -5f64..5.0, d in 0.0f64..2.0) {
        let p1 = half_line_prob(mean, var, g);
        let p2 = half_line_prob(mean, var, g + d);
        prop_assert!((0.0..=1.0).contains(&p1) && p2 <= p1);
        prop_assert!(half_line_prob(mean + d, var, g) >= p1);
        let i1 = interval_prob_from_mean(mean, var, 0.0, d);
        let i2 = interval_prob_from_mean(mean, var, 0.0, d + 0.5);
        prop_assert!((0.0..=1.0).contains(&i1) && i1 <= i2 + 1e-15);
    }

    #[test]
    fn ess_is_the_weight_sum(w in prop::collection::vec(0.0f64..3.0, 0..40)) {
        prop_assert_eq!(effective_sample_size(&w), w.iter().sum::<f64>());
    }
}
