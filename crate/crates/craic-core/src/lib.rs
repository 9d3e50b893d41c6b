//! Core library for `craic`, a tool that flags redundant method comments.
//!
//! The pipeline mines method/comment pairs from Java source ([`extract`]),
//! turns full comments into per-sentence training pairs ([`textprep`]),
//! compresses methods to a bounded token budget ([`compress`]), builds
//! frequency-ranked vocabularies ([`vocab`]), trains an LSTM comment
//! language model and a code-conditioned sequence-to-sequence model
//! ([`neural`]), and ranks comment sentences by conditional perplexity
//! ([`score`]). Sentences that a code-conditioned model predicts easily
//! carry little information beyond the code itself; the ranked report
//! surfaces them lowest-perplexity-first.

pub mod compress;
pub mod extract;
pub mod hash;
pub mod neural;
pub mod records;
pub mod rng;
pub mod score;
pub mod textprep;
pub mod vocab;
