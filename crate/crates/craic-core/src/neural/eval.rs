//! Scoring-side forward passes. Log-probabilities are accumulated through an
//! f64 log-softmax regardless of the parameter precision, so a zero-weight
//! model scores a sequence at exactly -n*ln(V).

use super::lstm::{lstm_step, LstmParams};
use super::math::Scalar;
use super::NeuralError;

/// Log-softmax value of `logits[target]`, computed in f64.
fn log_softmax_at<T: Scalar>(logits: &[T], target: usize) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in logits {
        max = max.max(v.to_f64());
    }
    let mut sum = 0.0f64;
    for &v in logits {
        sum += (v.to_f64() - max).exp();
    }
    logits[target].to_f64() - max - sum.ln()
}

fn logits_for<T: Scalar>(p: &LstmParams<T>, h: &[T]) -> Vec<T> {
    let v = p.vocab;
    let mut logits = p.b_proj.clone();
    for (idx, &hv) in h.iter().enumerate() {
        let row = &p.w_proj.data[idx * v..(idx + 1) * v];
        for (l, &w) in logits.iter_mut().zip(row) {
            *l += hv * w;
        }
    }
    logits
}

/// Natural-log probability of a full sequence `[BOS, w1..wn, EOS]` under the
/// language model: every token from w1 through EOS is predicted once.
pub fn lm_log_prob<T: Scalar>(p: &LstmParams<T>, ids: &[u32]) -> Result<f64, NeuralError> {
    scored_from_state(p, vec![T::ZERO; p.hidden], vec![T::ZERO; p.hidden], ids)
}

fn scored_from_state<T: Scalar>(
    p: &LstmParams<T>,
    mut h: Vec<T>,
    mut c: Vec<T>,
    ids: &[u32],
) -> Result<f64, NeuralError> {
    if ids.len() < 2 {
        return Err(NeuralError::EmptySequence);
    }
    let mut total = 0.0f64;
    for t in 0..ids.len() - 1 {
        let (nh, nc) = lstm_step(p, &h, &c, ids[t])?;
        h = nh;
        c = nc;
        total += log_softmax_at(&logits_for(p, &h), ids[t + 1] as usize);
    }
    if !total.is_finite() {
        return Err(NeuralError::NonFiniteState("non-finite log prob".into()));
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug)]
pub struct Seq2SeqScore {
    pub log_prob: f64,
    /// The method side was empty; the decoder ran from a zero state.
    pub empty_method: bool,
}

/// P(comment | method): the encoder consumes the compressed method, its
/// final state initializes the decoder, and the decoder scores the comment
/// exactly like the language model.
pub fn seq2seq_log_prob<T: Scalar>(
    encoder: &LstmParams<T>,
    decoder: &LstmParams<T>,
    method_ids: &[u32],
    comment_ids: &[u32],
) -> Result<Seq2SeqScore, NeuralError> {
    let k = encoder.hidden;
    let mut h = vec![T::ZERO; k];
    let mut c = vec![T::ZERO; k];
    for &id in method_ids {
        let (nh, nc) = lstm_step(encoder, &h, &c, id)?;
        h = nh;
        c = nc;
    }
    let log_prob = scored_from_state(decoder, h, c, comment_ids)?;
    Ok(Seq2SeqScore {
        log_prob,
        empty_method: method_ids.is_empty(),
    })
}

/// Corpus-level (token-micro) perplexity of sentences under the LM. Each
/// sentence is scored independently as `[BOS, tokens, EOS]`.
pub fn corpus_lm_perplexity<T: Scalar>(
    p: &LstmParams<T>,
    sentences: &[Vec<u32>],
    bos: u32,
    eos: u32,
) -> Result<f64, NeuralError> {
    if sentences.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    let mut total = 0.0f64;
    let mut tokens = 0usize;
    for sentence in sentences {
        let ids = frame(sentence, bos, eos);
        total += lm_log_prob(p, &ids)?;
        tokens += ids.len() - 1;
    }
    Ok((-total / tokens as f64).exp())
}

/// Corpus-level perplexity of comments conditioned on methods.
pub fn corpus_seq2seq_perplexity<T: Scalar>(
    encoder: &LstmParams<T>,
    decoder: &LstmParams<T>,
    pairs: &[(Vec<u32>, Vec<u32>)],
    bos: u32,
    eos: u32,
) -> Result<f64, NeuralError> {
    if pairs.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    let mut total = 0.0f64;
    let mut tokens = 0usize;
    for (method, comment) in pairs {
        let ids = frame(comment, bos, eos);
        total += seq2seq_log_prob(encoder, decoder, method, &ids)?.log_prob;
        tokens += ids.len() - 1;
    }
    Ok((-total / tokens as f64).exp())
}

fn frame(sentence: &[u32], bos: u32, eos: u32) -> Vec<u32> {
    let mut ids = Vec::with_capacity(sentence.len() + 2);
    ids.push(bos);
    ids.extend_from_slice(sentence);
    ids.push(eos);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    const BOS: u32 = 1;
    const EOS: u32 = 2;

    #[test]
    fn uniform_model_scores_minus_n_ln_v() {
        let p = LstmParams::<f32>::zeros(4, 10);
        // [BOS, a, b, EOS]: 3 predictions.
        let lp = lm_log_prob(&p, &[BOS, 5, 7, EOS]).unwrap();
        let want = -3.0 * (10.0f64).ln();
        assert!((lp - want).abs() < 1e-12, "{lp} vs {want}");
    }

    #[test]
    fn bos_eos_only_is_one_prediction() {
        let p = LstmParams::<f32>::zeros(4, 10);
        let lp = lm_log_prob(&p, &[BOS, EOS]).unwrap();
        assert!((lp + (10.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_id_is_an_error() {
        let p = LstmParams::<f32>::zeros(4, 10);
        assert!(matches!(
            lm_log_prob(&p, &[BOS]),
            Err(NeuralError::EmptySequence)
        ));
    }

    #[test]
    fn matches_independent_scalar_oracle() {
        // Straight-line transcription of the cell and softmax, written
        // without the library's matrix helpers.
        fn oracle_log_prob(p: &LstmParams<f64>, ids: &[u32]) -> f64 {
            let k = p.hidden;
            let mut h = vec![0.0f64; k];
            let mut c = vec![0.0f64; k];
            let mut total = 0.0;
            for t in 0..ids.len() - 1 {
                let x: Vec<f64> = p.embed.row(ids[t] as usize).to_vec();
                let z: Vec<f64> = h.iter().chain(&x).copied().collect();
                let mut nh = vec![0.0; k];
                let mut nc = vec![0.0; k];
                for j in 0..k {
                    let dot = |w: &crate::neural::math::Mat<f64>, b: &[f64]| -> f64 {
                        let mut acc = b[j];
                        for (i, &zv) in z.iter().enumerate() {
                            acc += zv * w.data[i * k + j];
                        }
                        acc
                    };
                    let gi = 1.0 / (1.0 + (-dot(&p.w_input, &p.b_input)).exp());
                    let gf = 1.0 / (1.0 + (-dot(&p.w_forget, &p.b_forget)).exp());
                    let go = 1.0 / (1.0 + (-dot(&p.w_output, &p.b_output)).exp());
                    let gg = dot(&p.w_cell, &p.b_cell).tanh();
                    nc[j] = gf * c[j] + gi * gg;
                    nh[j] = go * nc[j].tanh();
                }
                h = nh;
                c = nc;
                let mut logits = p.b_proj.clone();
                for (i, &hv) in h.iter().enumerate() {
                    for (v, l) in logits.iter_mut().enumerate() {
                        *l += hv * p.w_proj.data[i * p.vocab + v];
                    }
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse: f64 = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
                total += logits[ids[t + 1] as usize] - lse;
            }
            total
        }

        let mut rng = Rng::new(99);
        let p = LstmParams::<f64>::init(4, 10, &mut rng, 0.5);
        let ids = [BOS, 4, 9, 6, EOS];
        let got = lm_log_prob(&p, &ids).unwrap();
        let want = oracle_log_prob(&p, &ids);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        assert!(got <= 0.0);
    }

    #[test]
    fn seq2seq_zero_weights_ignore_method() {
        let enc = LstmParams::<f32>::zeros(4, 7);
        let dec = LstmParams::<f32>::zeros(4, 9);
        let a = seq2seq_log_prob(&enc, &dec, &[3, 4, 5], &[BOS, 6, EOS]).unwrap();
        let b = seq2seq_log_prob(&enc, &dec, &[6], &[BOS, 6, EOS]).unwrap();
        let want = -2.0 * (9.0f64).ln();
        assert!((a.log_prob - want).abs() < 1e-12);
        assert!((b.log_prob - want).abs() < 1e-12);
    }

    #[test]
    fn seq2seq_conditions_on_method() {
        // Random encoder, random decoder: two different methods must give
        // different scores for the same comment (state handoff works).
        let mut rng = Rng::new(17);
        let enc = LstmParams::<f64>::init(4, 7, &mut rng, 0.6);
        let dec = LstmParams::<f64>::init(4, 9, &mut rng, 0.6);
        let a = seq2seq_log_prob(&enc, &dec, &[3, 4, 5], &[BOS, 6, 3, EOS]).unwrap();
        let b = seq2seq_log_prob(&enc, &dec, &[6, 1], &[BOS, 6, 3, EOS]).unwrap();
        assert!((a.log_prob - b.log_prob).abs() > 1e-9);
    }

    #[test]
    fn empty_method_flagged_and_scored_from_zero_state() {
        let mut rng = Rng::new(23);
        let enc = LstmParams::<f64>::init(4, 7, &mut rng, 0.6);
        let dec = LstmParams::<f64>::init(4, 9, &mut rng, 0.6);
        let score = seq2seq_log_prob(&enc, &dec, &[], &[BOS, 5, EOS]).unwrap();
        assert!(score.empty_method);
        let direct = lm_log_prob(&dec, &[BOS, 5, EOS]).unwrap();
        assert!((score.log_prob - direct).abs() < 1e-12);
    }

    #[test]
    fn deterministic_scoring() {
        let mut rng = Rng::new(31);
        let enc = LstmParams::<f64>::init(6, 11, &mut rng, 0.4);
        let dec = LstmParams::<f64>::init(6, 13, &mut rng, 0.4);
        let a = seq2seq_log_prob(&enc, &dec, &[1, 2, 3], &[BOS, 4, 5, EOS]).unwrap();
        let b = seq2seq_log_prob(&enc, &dec, &[1, 2, 3], &[BOS, 4, 5, EOS]).unwrap();
        assert_eq!(a.log_prob.to_bits(), b.log_prob.to_bits());
    }

    #[test]
    fn log_probs_are_never_positive() {
        let mut rng = Rng::new(123);
        for trial in 0..50 {
            let enc = LstmParams::<f64>::init(5, 9, &mut rng, 1.0);
            let dec = LstmParams::<f64>::init(5, 11, &mut rng, 1.0);
            let len = 1 + (trial % 6);
            let mut ids = vec![BOS];
            for _ in 0..len {
                ids.push(rng.below(11) as u32);
            }
            ids.push(EOS);
            let method: Vec<u32> = (0..(trial % 4)).map(|_| rng.below(9) as u32).collect();
            assert!(lm_log_prob(&dec, &ids).unwrap() <= 0.0);
            assert!(seq2seq_log_prob(&enc, &dec, &method, &ids).unwrap().log_prob <= 0.0);
        }
    }

    #[test]
    fn uniform_corpus_perplexity_is_vocab_size() {
        let p = LstmParams::<f32>::zeros(4, 12);
        let sentences = vec![vec![4, 5], vec![6], vec![7, 8, 9]];
        let pp = corpus_lm_perplexity(&p, &sentences, BOS, EOS).unwrap();
        assert!((pp - 12.0).abs() / 12.0 < 1e-9);
    }
}
