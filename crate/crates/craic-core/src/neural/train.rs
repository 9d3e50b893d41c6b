//! SGD training loops for the language model and the sequence-to-sequence
//! model.
//!
//! Both use plain gradient descent with global-norm clipping and a
//! learning-rate decay applied whenever validation perplexity fails to
//! improve on the best seen so far. The LM trains on EOS-separated parallel
//! streams with truncated backpropagation, carrying the final state of one
//! window into the next; the seq2seq model trains on independent padded
//! pairs with teacher forcing and loss masking. Everything is seeded and
//! single-threaded, so identical inputs produce identical checkpoints.

use super::eval::{corpus_lm_perplexity, corpus_seq2seq_perplexity};
use super::lstm::{backward_sequence, forward_predict, forward_step, LstmParams, PredCache};
use super::math::Mat;
use super::{ModelCheckpoint, ModelConfig, ModelKind, NeuralError};
use crate::rng::Rng;
use crate::vocab::{BOS, EOS, PAD};

#[derive(Clone, Debug)]
pub struct TrainProgress {
    pub epoch: usize,
    pub train_perplexity: f64,
    pub valid_perplexity: f64,
    pub learning_rate: f32,
}

#[derive(Debug)]
pub struct TrainResult {
    pub checkpoint: ModelCheckpoint,
    pub history: Vec<TrainProgress>,
}

fn global_grad_norm(grads: &[&LstmParams<f32>]) -> f64 {
    let mut sum = 0.0f64;
    for g in grads {
        for (_, block) in g.blocks() {
            for &v in block {
                sum += (v as f64) * (v as f64);
            }
        }
    }
    sum.sqrt()
}

/// Scale all gradients so the global norm is at most `clip`. The scale
/// carries a small safety margin so f32 rounding cannot push the clipped
/// norm back above the bound.
fn clip_gradients(grads: &mut [&mut LstmParams<f32>], clip: f32) -> f64 {
    let views: Vec<&LstmParams<f32>> = grads.iter().map(|g| &**g).collect();
    let norm = global_grad_norm(&views);
    if norm > clip as f64 {
        let scale = (clip as f64 * (1.0 - 1e-6) / norm) as f32;
        for g in grads.iter_mut() {
            for (_, block) in g.blocks_mut() {
                for v in block {
                    *v *= scale;
                }
            }
        }
    }
    norm
}

fn sgd_step(params: &mut LstmParams<f32>, grads: &LstmParams<f32>, lr: f32) {
    for ((_, p), (_, g)) in params.blocks_mut().into_iter().zip(grads.blocks()) {
        for (pv, &gv) in p.iter_mut().zip(g) {
            *pv -= lr * gv;
        }
    }
}

fn dropout_mask(rng: &mut Rng, rows: usize, cols: usize, keep: f32) -> Option<Mat<f32>> {
    if keep >= 1.0 {
        return None;
    }
    let inv = 1.0 / keep;
    let mut mask = Mat::zeros(rows, cols);
    for v in mask.data.iter_mut() {
        *v = if rng.bernoulli(keep as f64) { inv } else { 0.0 };
    }
    Some(mask)
}

/// Train the unimodal comment language model. `train`/`valid` hold encoded
/// sentences without BOS/EOS framing.
pub fn train_lm(
    train: &[Vec<u32>],
    valid: &[Vec<u32>],
    config: &ModelConfig,
    vocab_hash_comment: &str,
    resume: Option<&ModelCheckpoint>,
) -> Result<TrainResult, NeuralError> {
    config.validate(ModelKind::Lm)?;
    if train.is_empty() || valid.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    let vocab = config.vocab_size_comment;
    let hidden = config.hidden_size;
    let mut rng = Rng::new(config.seed);
    let mut params = match resume {
        Some(ckpt) => {
            check_resume_shapes(&ckpt.decoder, hidden, vocab)?;
            ckpt.decoder.clone()
        }
        None => LstmParams::init(hidden, vocab, &mut rng, 0.08),
    };
    let start_epoch = resume.map_or(0, |c| c.epoch);

    // One long stream per corpus pass: BOS once, then EOS-separated
    // sentences, chopped into batch_size parallel rows.
    let mut stream: Vec<u32> = vec![BOS];
    for sentence in train {
        stream.extend_from_slice(sentence);
        stream.push(EOS);
    }
    let batch = config.batch_size.min(stream.len() / 2).max(1);
    let cols = stream.len() / batch;
    if cols < 2 {
        return Err(NeuralError::EmptyCorpus);
    }
    let row_of = |r: usize| &stream[r * cols..(r + 1) * cols];

    let mut lr = config.learning_rate;
    let mut best: Option<(f64, usize, LstmParams<f32>)> = None;
    let mut history = Vec::new();

    for epoch in start_epoch + 1..=start_epoch + config.max_epochs {
        let mut h = Mat::zeros(batch, hidden);
        let mut c = Mat::zeros(batch, hidden);
        let mut loss_sum = 0.0f64;
        let mut loss_n = 0usize;
        let mut t0 = 0usize;
        while t0 < cols - 1 {
            let window = config.tbptt_steps.min(cols - 1 - t0);
            let mut steps = Vec::with_capacity(window);
            let mut preds: Vec<Option<PredCache<f32>>> = Vec::with_capacity(window);
            for t in t0..t0 + window {
                let ids: Vec<u32> = (0..batch).map(|r| row_of(r)[t]).collect();
                let targets: Vec<u32> = (0..batch).map(|r| row_of(r)[t + 1]).collect();
                let in_drop = dropout_mask(&mut rng, batch, hidden, config.dropout_keep);
                let cache = forward_step(&params, &mut h, &mut c, &ids, None, in_drop);
                steps.push(cache);
                let out_drop = dropout_mask(&mut rng, batch, hidden, config.dropout_keep);
                let (pred, loss, n) =
                    forward_predict(&params, &h, out_drop, &targets, vec![1.0; batch]);
                loss_sum += loss;
                loss_n += n;
                preds.push(Some(pred));
            }
            if !loss_sum.is_finite() {
                return Err(NeuralError::DivergenceDetected { epoch });
            }
            let mut grads = params.zeros_like();
            backward_sequence(&params, &steps, &preds, &mut grads, None, None);
            clip_gradients(&mut [&mut grads], config.clip_norm);
            sgd_step(&mut params, &grads, lr);
            t0 += window;
        }

        let train_pp = (loss_sum / loss_n as f64).exp();
        let valid_pp = corpus_lm_perplexity(&params, valid, BOS, EOS)?;
        if !valid_pp.is_finite() {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        let improved = best.as_ref().is_none_or(|(b, _, _)| valid_pp < *b);
        if improved {
            best = Some((valid_pp, epoch, params.clone()));
        } else {
            lr *= config.decay_factor;
        }
        history.push(TrainProgress {
            epoch,
            train_perplexity: train_pp,
            valid_perplexity: valid_pp,
            learning_rate: lr,
        });
    }

    let (valid_perplexity, epoch, decoder) = best.expect("at least one epoch ran");
    Ok(TrainResult {
        checkpoint: ModelCheckpoint {
            kind: ModelKind::Lm,
            config: config.clone(),
            encoder: None,
            decoder,
            vocab_hash_method: "-".to_string(),
            vocab_hash_comment: vocab_hash_comment.to_string(),
            epoch,
            valid_perplexity,
        },
        history,
    })
}

fn check_resume_shapes(
    params: &LstmParams<f32>,
    hidden: usize,
    vocab: usize,
) -> Result<(), NeuralError> {
    if params.hidden != hidden || params.vocab != vocab {
        return Err(NeuralError::InvalidConfig(format!(
            "resume checkpoint has shape K={} V={}, config wants K={hidden} V={vocab}",
            params.hidden, params.vocab
        )));
    }
    Ok(())
}

/// Train the code-conditioned model on (compressed method, comment) id
/// pairs. Pairs are independent: no state is carried between them.
pub fn train_seq2seq(
    train: &[(Vec<u32>, Vec<u32>)],
    valid: &[(Vec<u32>, Vec<u32>)],
    config: &ModelConfig,
    vocab_hash_method: &str,
    vocab_hash_comment: &str,
    resume: Option<&ModelCheckpoint>,
) -> Result<TrainResult, NeuralError> {
    config.validate(ModelKind::Seq2Seq)?;
    if train.is_empty() || valid.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    let hidden = config.hidden_size;
    let mut rng = Rng::new(config.seed);
    let (mut encoder, mut decoder) = match resume {
        Some(ckpt) => {
            let enc = ckpt.encoder.clone().ok_or_else(|| {
                NeuralError::InvalidConfig("resume checkpoint is not a seq2seq model".into())
            })?;
            check_resume_shapes(&enc, hidden, config.vocab_size_method)?;
            check_resume_shapes(&ckpt.decoder, hidden, config.vocab_size_comment)?;
            (enc, ckpt.decoder.clone())
        }
        None => (
            LstmParams::init(hidden, config.vocab_size_method, &mut rng, 0.08),
            LstmParams::init(hidden, config.vocab_size_comment, &mut rng, 0.08),
        ),
    };
    let start_epoch = resume.map_or(0, |c| c.epoch);

    let mut lr = config.learning_rate;
    let mut best: Option<(f64, usize, LstmParams<f32>, LstmParams<f32>)> = None;
    let mut history = Vec::new();

    for epoch in start_epoch + 1..=start_epoch + config.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0f64;
        let mut loss_n = 0usize;

        for chunk in order.chunks(config.batch_size) {
            let pairs: Vec<&(Vec<u32>, Vec<u32>)> = chunk.iter().map(|&i| &train[i]).collect();
            let b = pairs.len();
            let max_m = pairs.iter().map(|(m, _)| m.len()).max().unwrap_or(0);
            let max_n = pairs.iter().map(|(_, c)| c.len()).max().unwrap_or(0) + 1;

            // Encoder: padded inputs with a pass-through mask.
            let mut h = Mat::zeros(b, hidden);
            let mut c = Mat::zeros(b, hidden);
            let mut enc_steps = Vec::with_capacity(max_m);
            for t in 0..max_m {
                let ids: Vec<u32> = pairs
                    .iter()
                    .map(|(m, _)| m.get(t).copied().unwrap_or(PAD))
                    .collect();
                let mask: Vec<f32> = pairs
                    .iter()
                    .map(|(m, _)| if t < m.len() { 1.0 } else { 0.0 })
                    .collect();
                enc_steps.push(forward_step(&encoder, &mut h, &mut c, &ids, Some(mask), None));
            }

            // Decoder: teacher forcing over [BOS, w..] -> [w.., EOS].
            let mut dec_steps = Vec::with_capacity(max_n);
            let mut dec_preds: Vec<Option<PredCache<f32>>> = Vec::with_capacity(max_n);
            for t in 0..max_n {
                let ids: Vec<u32> = pairs
                    .iter()
                    .map(|(_, cm)| {
                        if t == 0 {
                            BOS
                        } else {
                            cm.get(t - 1).copied().unwrap_or(PAD)
                        }
                    })
                    .collect();
                let targets: Vec<u32> = pairs
                    .iter()
                    .map(|(_, cm)| {
                        if t < cm.len() {
                            cm[t]
                        } else if t == cm.len() {
                            EOS
                        } else {
                            PAD
                        }
                    })
                    .collect();
                let tmask: Vec<f32> = pairs
                    .iter()
                    .map(|(_, cm)| if t <= cm.len() { 1.0 } else { 0.0 })
                    .collect();
                let in_drop = dropout_mask(&mut rng, b, hidden, config.dropout_keep);
                let cache = forward_step(&decoder, &mut h, &mut c, &ids, None, in_drop);
                dec_steps.push(cache);
                let out_drop = dropout_mask(&mut rng, b, hidden, config.dropout_keep);
                let (pred, loss, n) = forward_predict(&decoder, &h, out_drop, &targets, tmask);
                loss_sum += loss;
                loss_n += n;
                dec_preds.push(Some(pred));
            }
            if !loss_sum.is_finite() {
                return Err(NeuralError::DivergenceDetected { epoch });
            }

            let mut enc_grads = encoder.zeros_like();
            let mut dec_grads = decoder.zeros_like();
            let (dh0, dc0) =
                backward_sequence(&decoder, &dec_steps, &dec_preds, &mut dec_grads, None, None);
            if max_m > 0 {
                let enc_none: Vec<Option<PredCache<f32>>> =
                    (0..enc_steps.len()).map(|_| None).collect();
                backward_sequence(
                    &encoder,
                    &enc_steps,
                    &enc_none,
                    &mut enc_grads,
                    Some(&dh0),
                    Some(&dc0),
                );
            }
            clip_gradients(&mut [&mut enc_grads, &mut dec_grads], config.clip_norm);
            sgd_step(&mut encoder, &enc_grads, lr);
            sgd_step(&mut decoder, &dec_grads, lr);
        }

        let train_pp = (loss_sum / loss_n as f64).exp();
        let valid_pp = corpus_seq2seq_perplexity(&encoder, &decoder, valid, BOS, EOS)?;
        if !valid_pp.is_finite() {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        let improved = best.as_ref().is_none_or(|(b, _, _, _)| valid_pp < *b);
        if improved {
            best = Some((valid_pp, epoch, encoder.clone(), decoder.clone()));
        } else {
            lr *= config.decay_factor;
        }
        history.push(TrainProgress {
            epoch,
            train_perplexity: train_pp,
            valid_perplexity: valid_pp,
            learning_rate: lr,
        });
    }

    let (valid_perplexity, epoch, enc, dec) = best.expect("at least one epoch ran");
    Ok(TrainResult {
        checkpoint: ModelCheckpoint {
            kind: ModelKind::Seq2Seq,
            config: config.clone(),
            encoder: Some(enc),
            decoder: dec,
            vocab_hash_method: vocab_hash_method.to_string(),
            vocab_hash_comment: vocab_hash_comment.to_string(),
            epoch,
            valid_perplexity,
        },
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            hidden_size: 8,
            vocab_size_method: if kind == ModelKind::Lm { 0 } else { 12 },
            vocab_size_comment: 12,
            learning_rate: 0.5,
            decay_factor: 0.96,
            batch_size: 4,
            dropout_keep: 1.0,
            clip_norm: 5.0,
            tbptt_steps: 8,
            max_epochs: 3,
            seed: 7,
        }
    }

    fn toy_sentences() -> Vec<Vec<u32>> {
        (0..12).map(|i| vec![4 + (i % 4), 5, 6 + (i % 3)]).collect()
    }

    #[test]
    fn lm_training_runs_and_improves() {
        let config = ModelConfig {
            max_epochs: 12,
            ..tiny_config(ModelKind::Lm)
        };
        let sentences = toy_sentences();
        let result = train_lm(&sentences, &sentences, &config, "sha256:x", None).unwrap();
        let first = result.history.first().unwrap().train_perplexity;
        let last = result.history.last().unwrap().train_perplexity;
        assert!(last < first, "no improvement: {first} -> {last}");
        assert!(result.checkpoint.valid_perplexity.is_finite());
        assert!(result.checkpoint.encoder.is_none());
    }

    #[test]
    fn lm_deterministic_across_runs() {
        let config = tiny_config(ModelKind::Lm);
        let sentences = toy_sentences();
        let a = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        let b = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        assert_eq!(a.checkpoint.decoder, b.checkpoint.decoder);
    }

    #[test]
    fn lm_deterministic_with_dropout_mask_seeded() {
        let config = ModelConfig {
            dropout_keep: 0.65,
            ..tiny_config(ModelKind::Lm)
        };
        let sentences = toy_sentences();
        let a = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        let b = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        assert_eq!(a.checkpoint.decoder, b.checkpoint.decoder);
    }

    #[test]
    fn lr_decay_schedule() {
        // Force non-improvement by training on unpredictable uniform data
        // with an adversarial setup: check lr after two non-improving epochs
        // equals lr * decay^2 via the recorded history.
        let config = ModelConfig {
            max_epochs: 10,
            ..tiny_config(ModelKind::Lm)
        };
        let sentences = toy_sentences();
        let result = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        let mut expected = config.learning_rate;
        let mut best = f64::INFINITY;
        for p in &result.history {
            if p.valid_perplexity < best {
                best = p.valid_perplexity;
            } else {
                expected *= config.decay_factor;
            }
            assert!(
                (p.learning_rate - expected).abs() < 1e-7,
                "epoch {}: lr {} expected {}",
                p.epoch,
                p.learning_rate,
                expected
            );
        }
    }

    #[test]
    fn divergence_detected_on_huge_lr() {
        let config = ModelConfig {
            learning_rate: 1e8,
            clip_norm: 1e9,
            max_epochs: 30,
            ..tiny_config(ModelKind::Lm)
        };
        let sentences = toy_sentences();
        let err = train_lm(&sentences, &sentences, &config, "h", None);
        match err {
            Err(NeuralError::DivergenceDetected { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(result) => {
                // Clipping can keep even an absurd step finite; in that case
                // the run must still have produced finite perplexities.
                assert!(result.checkpoint.valid_perplexity.is_finite());
            }
        }
    }

    fn toy_pairs() -> Vec<(Vec<u32>, Vec<u32>)> {
        // Comment copies the first two method tokens.
        (0..16)
            .map(|i| {
                let a = 4 + (i % 4);
                let b = 8 + (i % 3);
                (vec![a, b, 5, 6], vec![a, b])
            })
            .collect()
    }

    #[test]
    fn seq2seq_training_runs() {
        let config = ModelConfig {
            max_epochs: 8,
            ..tiny_config(ModelKind::Seq2Seq)
        };
        let pairs = toy_pairs();
        let result = train_seq2seq(&pairs, &pairs, &config, "hm", "hc", None).unwrap();
        assert!(result.checkpoint.encoder.is_some());
        let first = result.history.first().unwrap().train_perplexity;
        let last = result.history.last().unwrap().train_perplexity;
        assert!(last < first);
    }

    #[test]
    fn seq2seq_deterministic() {
        let config = tiny_config(ModelKind::Seq2Seq);
        let pairs = toy_pairs();
        let a = train_seq2seq(&pairs, &pairs, &config, "hm", "hc", None).unwrap();
        let b = train_seq2seq(&pairs, &pairs, &config, "hm", "hc", None).unwrap();
        assert_eq!(a.checkpoint.encoder, b.checkpoint.encoder);
        assert_eq!(a.checkpoint.decoder, b.checkpoint.decoder);
    }

    #[test]
    fn resume_continues_epoch_numbering() {
        let config = tiny_config(ModelKind::Lm);
        let sentences = toy_sentences();
        let first = train_lm(&sentences, &sentences, &config, "h", None).unwrap();
        let resumed = train_lm(
            &sentences,
            &sentences,
            &config,
            "h",
            Some(&first.checkpoint),
        )
        .unwrap();
        assert!(resumed.history[0].epoch == first.checkpoint.epoch + 1);
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut rng = Rng::new(1);
        let mut g = LstmParams::<f32>::init(6, 10, &mut rng, 2.0);
        clip_gradients(&mut [&mut g], 5.0);
        let norm = global_grad_norm(&[&g]);
        assert!(norm <= 5.0 + 1e-9, "norm {norm}");
        // A small gradient is untouched.
        let mut small = LstmParams::<f32>::zeros(2, 5);
        small.b_proj[0] = 0.5;
        clip_gradients(&mut [&mut small], 5.0);
        assert_eq!(small.b_proj[0], 0.5);
    }

    #[test]
    fn pad_appended_to_batch_entry_leaves_loss_unchanged() {
        // The same pair scored inside two batches whose sibling entries
        // force different padding must contribute the same loss: padded
        // encoder steps pass state through and padded decoder targets are
        // masked out of the loss.
        let mut rng = Rng::new(9);
        let enc = LstmParams::<f32>::init(8, 12, &mut rng, 0.2);
        let dec = LstmParams::<f32>::init(8, 12, &mut rng, 0.2);
        let loss_of = |pairs: &[(Vec<u32>, Vec<u32>)], row: usize| -> f64 {
            let b = pairs.len();
            let max_m = pairs.iter().map(|(m, _)| m.len()).max().unwrap();
            let max_n = pairs.iter().map(|(_, c)| c.len()).max().unwrap() + 1;
            let mut h = Mat::zeros(b, 8);
            let mut c = Mat::zeros(b, 8);
            for t in 0..max_m {
                let ids: Vec<u32> = pairs
                    .iter()
                    .map(|(m, _)| m.get(t).copied().unwrap_or(PAD))
                    .collect();
                let mask: Vec<f32> = pairs
                    .iter()
                    .map(|(m, _)| if t < m.len() { 1.0 } else { 0.0 })
                    .collect();
                forward_step(&enc, &mut h, &mut c, &ids, Some(mask), None);
            }
            let mut total = 0.0;
            for t in 0..max_n {
                let ids: Vec<u32> = pairs
                    .iter()
                    .map(|(_, cm)| {
                        if t == 0 {
                            BOS
                        } else {
                            cm.get(t - 1).copied().unwrap_or(PAD)
                        }
                    })
                    .collect();
                let targets: Vec<u32> = pairs
                    .iter()
                    .map(|(_, cm)| {
                        if t < cm.len() {
                            cm[t]
                        } else if t == cm.len() {
                            EOS
                        } else {
                            PAD
                        }
                    })
                    .collect();
                let tmask: Vec<f32> = pairs
                    .iter()
                    .map(|(_, cm)| if t <= cm.len() { 1.0 } else { 0.0 })
                    .collect();
                forward_step(&dec, &mut h, &mut c, &ids, None, None);
                let (pred, _, _) = forward_predict(&dec, &h, None, &targets, tmask.clone());
                if tmask[row] > 0.0 {
                    total -= (pred.probs.row(row)[targets[row] as usize] as f64).ln();
                }
            }
            total
        };
        let base = vec![(vec![4u32, 5], vec![6u32]), (vec![4, 5], vec![6])];
        let padded_sibling = vec![(vec![4, 5], vec![6]), (vec![4, 5, 7, 8, 9], vec![6, 7, 8])];
        let a = loss_of(&base, 0);
        let b = loss_of(&padded_sibling, 0);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
