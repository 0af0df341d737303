use super::EngineError;

/// Linear-interpolation quantile at rank `(n - 1) * q` of the ascending-sorted
/// values.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, EngineError> {
    if values.is_empty() {
        return Err(EngineError::EmptyScores);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(EngineError::InvalidQuantile(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&sorted, q))
}

pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Next maximization threshold: the `q`-quantile of `scores`, never below
/// the previous threshold.
pub fn update_threshold_max(scores: &[f64], q: f64, prev: Option<f64>) -> Result<f64, EngineError> {
    let raw = quantile(scores, q)?;
    Ok(match prev {
        Some(p) if p > raw => p,
        _ => raw,
    })
}

/// Next specification half-width: the `(1 - q)`-quantile of `|score - center|`,
/// never above the previous width.
pub fn update_width_spec(scores: &[f64], center: f64, q: f64, prev: Option<f64>) -> Result<f64, EngineError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(EngineError::InvalidQuantile(q));
    }
    let deviations: Vec<f64> = scores.iter().map(|s| (s - center).abs()).collect();
    let raw = quantile(&deviations, 1.0 - q)?;
    Ok(match prev {
        Some(p) if p < raw => p,
        _ => raw,
    })
}
