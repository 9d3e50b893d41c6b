//! From-scratch LSTM machinery: the unimodal comment language model, the
//! encoder/decoder sequence-to-sequence model, SGD training with gradient
//! clipping and learning-rate decay, and a finite-difference gradient check.

pub mod math;

mod checkpoint;
mod eval;
mod gradcheck;
mod lstm;
mod train;

pub use checkpoint::{CheckpointError, ModelCheckpoint};
pub use eval::{
    corpus_lm_perplexity, corpus_seq2seq_perplexity, lm_log_prob, seq2seq_log_prob, Seq2SeqScore,
};
pub use gradcheck::{gradient_check_lm, gradient_check_seq2seq, GradCheckReport};
pub use lstm::{lstm_step, vocab_dist, LstmParams};
pub use train::{train_lm, train_seq2seq, TrainProgress, TrainResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite state: {0}")]
    NonFiniteState(String),
    #[error("sequence has no predictions (needs at least BOS and one target)")]
    EmptySequence,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("training diverged at epoch {epoch}: validation perplexity is not finite")]
    DivergenceDetected { epoch: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Lm,
    Seq2Seq,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lm => "lm",
            ModelKind::Seq2Seq => "seq2seq",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    /// 0 for the language model, which has no method side.
    pub vocab_size_method: usize,
    pub vocab_size_comment: usize,
    pub learning_rate: f32,
    pub decay_factor: f32,
    pub batch_size: usize,
    /// Keep probability: values are dropped with probability 1 - keep.
    pub dropout_keep: f32,
    pub clip_norm: f32,
    pub tbptt_steps: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults, sized to train in seconds or minutes on a CPU.
    pub fn desk(kind: ModelKind) -> Self {
        ModelConfig {
            hidden_size: match kind {
                ModelKind::Lm => 128,
                ModelKind::Seq2Seq => 64,
            },
            vocab_size_method: match kind {
                ModelKind::Lm => 0,
                ModelKind::Seq2Seq => 2000,
            },
            vocab_size_comment: 2000,
            learning_rate: 0.5,
            decay_factor: 0.96,
            batch_size: 64,
            dropout_keep: 0.65,
            clip_norm: 5.0,
            tbptt_steps: 30,
            max_epochs: 30,
            seed: 42,
        }
    }

    /// Full-corpus hyperparameters: 2048 LM / 512 seq2seq hidden units,
    /// 25000-entry vocabularies on both sides.
    pub fn full_scale(kind: ModelKind) -> Self {
        ModelConfig {
            hidden_size: match kind {
                ModelKind::Lm => 2048,
                ModelKind::Seq2Seq => 512,
            },
            vocab_size_method: match kind {
                ModelKind::Lm => 0,
                ModelKind::Seq2Seq => 25000,
            },
            vocab_size_comment: 25000,
            max_epochs: match kind {
                ModelKind::Lm => 51,
                ModelKind::Seq2Seq => 23,
            },
            ..ModelConfig::desk(kind)
        }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<(), NeuralError> {
        let drop_probability = 1.0 - self.dropout_keep;
        if !(0.0..1.0).contains(&drop_probability) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout probability {drop_probability} outside [0, 1)"
            )));
        }
        if self.clip_norm <= 0.0 {
            return Err(NeuralError::InvalidConfig("clip_norm must be > 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(NeuralError::InvalidConfig(
                "learning_rate must be > 0".into(),
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(NeuralError::InvalidConfig(
                "decay_factor must be in (0, 1]".into(),
            ));
        }
        if self.hidden_size == 0 || self.batch_size == 0 || self.tbptt_steps == 0 {
            return Err(NeuralError::InvalidConfig(
                "hidden_size, batch_size and tbptt_steps must be positive".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(NeuralError::InvalidConfig("max_epochs must be > 0".into()));
        }
        if self.vocab_size_comment < 5 {
            return Err(NeuralError::InvalidConfig(
                "comment vocabulary too small".into(),
            ));
        }
        if kind == ModelKind::Seq2Seq && self.vocab_size_method < 5 {
            return Err(NeuralError::InvalidConfig(
                "method vocabulary too small".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let desk = ModelConfig::desk(ModelKind::Seq2Seq);
        assert_eq!(desk.hidden_size, 64);
        assert!(desk.validate(ModelKind::Seq2Seq).is_ok());
        let full = ModelConfig::full_scale(ModelKind::Lm);
        assert_eq!(full.hidden_size, 2048);
        assert_eq!(full.vocab_size_comment, 25000);
        assert_eq!(full.max_epochs, 51);
        assert_eq!(full.learning_rate, 0.5);
        assert_eq!(full.decay_factor, 0.96);
        assert_eq!(full.batch_size, 64);
        assert_eq!(full.dropout_keep, 0.65);
        assert_eq!(full.clip_norm, 5.0);
        assert_eq!(full.tbptt_steps, 30);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut config = ModelConfig::desk(ModelKind::Lm);
        config.dropout_keep = 0.0; // drop probability 1.0
        assert!(config.validate(ModelKind::Lm).is_err());
        let mut config = ModelConfig::desk(ModelKind::Lm);
        config.clip_norm = 0.0;
        assert!(config.validate(ModelKind::Lm).is_err());
    }
}
