use super::DeferError;
use crate::cd::Direction;

/// Soft scores are clipped to `[c, 1 - c]` before taking the logit.
pub const SOFT_SCORE_CLIP: f64 = 1e-6;

/// Mean cost of the combined predictor: the CD error where it keeps the
/// decision, the expert error where it defers.
pub fn deferral_loss(
    chose_expert: &[bool],
    cd_preds: &[Direction],
    expert_preds: &[Direction],
    truths: &[Direction],
) -> Result<f64, DeferError> {
    let n = chose_expert.len();
    for len in [cd_preds.len(), expert_preds.len(), truths.len()] {
        if len != n {
            return Err(DeferError::LengthMismatch(n, len));
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    let wrong = (0..n)
        .filter(|&i| {
            let used = if chose_expert[i] { expert_preds[i] } else { cd_preds[i] };
            used != truths[i]
        })
        .count();
    Ok(wrong as f64 / n as f64)
}

fn log_sigmoid(z: f64) -> f64 {
    // log(1 / (1 + e^-z)) without overflow
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Logistic surrogate with `r1 = logit(clip(soft_score))`:
/// mean of `-[cd right] log s(-r1) - [expert right] log s(r1)`.
/// A diagnostic; training never optimizes it.
pub fn surrogate_loss(
    soft_scores: &[f64],
    cd_correct: &[bool],
    expert_correct: &[bool],
) -> Result<f64, DeferError> {
    let n = soft_scores.len();
    for len in [cd_correct.len(), expert_correct.len()] {
        if len != n {
            return Err(DeferError::LengthMismatch(n, len));
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = (0..n)
        .map(|i| {
            let p = soft_scores[i].clamp(SOFT_SCORE_CLIP, 1.0 - SOFT_SCORE_CLIP);
            let r1 = (p / (1.0 - p)).ln();
            let mut l = 0.0;
            if cd_correct[i] {
                l -= log_sigmoid(-r1);
            }
            if expert_correct[i] {
                l -= log_sigmoid(r1);
            }
            l
        })
        .sum();
    Ok(total / n as f64)
}
