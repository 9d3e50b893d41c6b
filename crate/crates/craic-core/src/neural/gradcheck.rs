//! Finite-difference validation of the backward pass.
//!
//! Runs at f64 on desk-scale models. The analytic gradient from
//! `backward_sequence` is compared against central differences of the same
//! forward loss, parameter by parameter, and the maximum relative error is
//! reported. Dropout is off; the loss is the summed NLL.

use super::lstm::{backward_sequence, forward_predict, forward_step, LstmParams, PredCache};
use super::math::Mat;
use super::NeuralError;
use crate::rng::Rng;

const STEP: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max over individual parameters of |a-n| / max(1e-8, |a|+|n|).
    ///
    /// For a parameter whose true gradient happens to cancel to ~1e-8, the
    /// finite-difference estimate carries f64 rounding noise of order
    /// |loss|*eps/step ~ 1e-11, so this per-parameter figure can exceed 1e-4
    /// on a perfectly correct backward pass. It is reported for diagnostics;
    /// correctness is gated on the per-block errors below.
    pub max_rel_error: f64,
    pub worst_block: String,
    /// Per parameter block: ||a-n|| / max(1e-8, ||a||+||n||). A real
    /// backprop defect shows up here orders of magnitude above 1e-4.
    pub block_errors: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_block_error(&self) -> f64 {
        self.block_errors
            .iter()
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Summed NLL of `[BOS, w..., EOS]` under an f64 LM, via the batched path
/// with B=1 (the exact code the trainer uses).
fn lm_loss(params: &LstmParams<f64>, ids: &[u32]) -> f64 {
    let k = params.hidden;
    let mut h = Mat::zeros(1, k);
    let mut c = Mat::zeros(1, k);
    let mut loss = 0.0;
    for t in 0..ids.len() - 1 {
        forward_step(params, &mut h, &mut c, &ids[t..=t], None, None);
        let (_, step_loss, _) = forward_predict(params, &h, None, &ids[t + 1..=t + 1], vec![1.0]);
        loss += step_loss;
    }
    loss
}

fn lm_analytic_grads(params: &LstmParams<f64>, ids: &[u32]) -> LstmParams<f64> {
    let k = params.hidden;
    let mut h = Mat::zeros(1, k);
    let mut c = Mat::zeros(1, k);
    let mut steps = Vec::new();
    let mut preds: Vec<Option<PredCache<f64>>> = Vec::new();
    for t in 0..ids.len() - 1 {
        steps.push(forward_step(params, &mut h, &mut c, &ids[t..=t], None, None));
        let (pred, _, _) = forward_predict(params, &h, None, &ids[t + 1..=t + 1], vec![1.0]);
        preds.push(Some(pred));
    }
    let mut grads = params.zeros_like();
    backward_sequence(params, &steps, &preds, &mut grads, None, None);
    grads
}

fn seq2seq_loss(
    encoder: &LstmParams<f64>,
    decoder: &LstmParams<f64>,
    method_ids: &[u32],
    comment_ids: &[u32],
) -> f64 {
    let k = encoder.hidden;
    let mut h = Mat::zeros(1, k);
    let mut c = Mat::zeros(1, k);
    for t in 0..method_ids.len() {
        forward_step(encoder, &mut h, &mut c, &method_ids[t..=t], None, None);
    }
    let mut loss = 0.0;
    for t in 0..comment_ids.len() - 1 {
        forward_step(decoder, &mut h, &mut c, &comment_ids[t..=t], None, None);
        let (_, step_loss, _) =
            forward_predict(decoder, &h, None, &comment_ids[t + 1..=t + 1], vec![1.0]);
        loss += step_loss;
    }
    loss
}

fn seq2seq_analytic_grads(
    encoder: &LstmParams<f64>,
    decoder: &LstmParams<f64>,
    method_ids: &[u32],
    comment_ids: &[u32],
) -> (LstmParams<f64>, LstmParams<f64>) {
    let k = encoder.hidden;
    let mut h = Mat::zeros(1, k);
    let mut c = Mat::zeros(1, k);
    let mut enc_steps = Vec::new();
    for t in 0..method_ids.len() {
        enc_steps.push(forward_step(encoder, &mut h, &mut c, &method_ids[t..=t], None, None));
    }
    let mut dec_steps = Vec::new();
    let mut dec_preds: Vec<Option<PredCache<f64>>> = Vec::new();
    for t in 0..comment_ids.len() - 1 {
        dec_steps.push(forward_step(decoder, &mut h, &mut c, &comment_ids[t..=t], None, None));
        let (pred, _, _) =
            forward_predict(decoder, &h, None, &comment_ids[t + 1..=t + 1], vec![1.0]);
        dec_preds.push(Some(pred));
    }
    let mut enc_grads = encoder.zeros_like();
    let mut dec_grads = decoder.zeros_like();
    let (dh0, dc0) =
        backward_sequence(decoder, &dec_steps, &dec_preds, &mut dec_grads, None, None);
    if !method_ids.is_empty() {
        let none: Vec<Option<PredCache<f64>>> = (0..enc_steps.len()).map(|_| None).collect();
        backward_sequence(encoder, &enc_steps, &none, &mut enc_grads, Some(&dh0), Some(&dc0));
    }
    (enc_grads, dec_grads)
}

/// Central-difference check over every parameter of one model; `loss`
/// re-evaluates the loss after each perturbation of `params`.
fn check_params<F>(
    label: &str,
    params: &mut LstmParams<f64>,
    analytic: &LstmParams<f64>,
    mut loss: F,
    report: &mut GradCheckReport,
) where
    F: FnMut(&LstmParams<f64>) -> f64,
{
    let n_blocks = params.blocks().len();
    for block_idx in 0..n_blocks {
        let (name, len) = {
            let blocks = params.blocks();
            (blocks[block_idx].0, blocks[block_idx].1.len())
        };
        let mut diff_sq = 0.0f64;
        let mut a_sq = 0.0f64;
        let mut n_sq = 0.0f64;
        for j in 0..len {
            let original = params.blocks_mut()[block_idx].1[j];
            params.blocks_mut()[block_idx].1[j] = original + STEP;
            let plus = loss(params);
            params.blocks_mut()[block_idx].1[j] = original - STEP;
            let minus = loss(params);
            params.blocks_mut()[block_idx].1[j] = original;
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = analytic.blocks()[block_idx].1[j];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
            let err = relative_error(a, numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_block = format!("{label}.{name}[{j}]");
            }
        }
        let block_err = diff_sq.sqrt() / (a_sq.sqrt() + n_sq.sqrt()).max(1e-8);
        report.block_errors.push((format!("{label}.{name}"), block_err));
    }
}

/// Gradient check for the language model on one sequence
/// `[BOS, w..., EOS]`.
pub fn gradient_check_lm(
    hidden: usize,
    vocab: usize,
    ids: &[u32],
    seed: u64,
) -> Result<GradCheckReport, NeuralError> {
    if ids.len() < 2 {
        return Err(NeuralError::EmptySequence);
    }
    let mut rng = Rng::new(seed);
    let mut params = LstmParams::<f64>::init(hidden, vocab, &mut rng, 0.4);
    let analytic = lm_analytic_grads(&params, ids);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_block: String::new(),
        block_errors: Vec::new(),
    };
    check_params("lm", &mut params, &analytic, |p| lm_loss(p, ids), &mut report);
    Ok(report)
}

/// Gradient check for the seq2seq model, including the encoder parameters
/// reached through the state handoff.
pub fn gradient_check_seq2seq(
    hidden: usize,
    vocab_method: usize,
    vocab_comment: usize,
    method_ids: &[u32],
    comment_ids: &[u32],
    seed: u64,
) -> Result<GradCheckReport, NeuralError> {
    if comment_ids.len() < 2 {
        return Err(NeuralError::EmptySequence);
    }
    let mut rng = Rng::new(seed);
    let mut encoder = LstmParams::<f64>::init(hidden, vocab_method, &mut rng, 0.4);
    let mut decoder = LstmParams::<f64>::init(hidden, vocab_comment, &mut rng, 0.4);
    let (enc_analytic, dec_analytic) =
        seq2seq_analytic_grads(&encoder, &decoder, method_ids, comment_ids);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_block: String::new(),
        block_errors: Vec::new(),
    };
    {
        let decoder_view = decoder.clone();
        check_params(
            "encoder",
            &mut encoder,
            &enc_analytic,
            |enc| seq2seq_loss(enc, &decoder_view, method_ids, comment_ids),
            &mut report,
        );
    }
    {
        let encoder_view = encoder.clone();
        check_params(
            "decoder",
            &mut decoder,
            &dec_analytic,
            |dec| seq2seq_loss(&encoder_view, dec, method_ids, comment_ids),
            &mut report,
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_gradients_match() {
        // K=8, V=20, length-5 sequence.
        let report = gradient_check_lm(8, 20, &[1, 5, 18, 4, 2], 4).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "{} at {}",
            report.max_rel_error,
            report.worst_block
        );
        assert!(report.max_block_error() < 1e-4);
    }

    #[test]
    fn seq2seq_gradients_match_including_encoder() {
        let report = gradient_check_seq2seq(8, 20, 20, &[4, 7, 3, 11, 16], &[1, 6, 9, 14, 2], 4)
            .unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "{} at {}",
            report.max_rel_error,
            report.worst_block
        );
        assert!(report.max_block_error() < 1e-4);
        assert!(report
            .block_errors
            .iter()
            .any(|(name, _)| name.starts_with("encoder.")));
    }

    #[test]
    fn zero_length_comment_is_reported() {
        let err = gradient_check_seq2seq(4, 8, 8, &[3], &[1], 1).unwrap_err();
        assert!(matches!(err, NeuralError::EmptySequence));
        let err = gradient_check_lm(4, 8, &[1], 1).unwrap_err();
        assert!(matches!(err, NeuralError::EmptySequence));
    }
}
