//! ctclab: a desk-scale multilingual CTC training lab.
//!
//! The crate covers the full experiment pipeline for studying multilingual
//! acoustic-model fine-tuning with language-identification (LID) tokens:
//!
//! - [`corpus`]: utterance manifests, vocabularies, LID target augmentation,
//!   balanced and incrementally nested multilingual training sets.
//! - [`langdist`]: lexical-phonetic language distances (LDN/LDND) and the
//!   similarity ordering that decides which language is added next.
//! - [`ctc`]: log-space CTC loss, its analytic gradient, and greedy decoding.
//! - [`acoustic`]: a context-windowed MLP over feature frames with manual
//!   backpropagation and an Adam optimizer.
//! - [`metrics`]: WER/CER, LID recall, and stratified corpus reports.
//! - [`trainer`]: epoch loop with gradient accumulation, best-checkpoint
//!   selection, and the staged monolingual/multilingual/LID protocol.
//! - [`synth`]: deterministic synthetic corpus families with a controllable
//!   similarity gradient, for end-to-end verification.
//!
//! All randomness flows from explicit seeds through ChaCha8 generators, so
//! every pipeline stage is reproducible bit-for-bit.

pub mod acoustic;
pub mod corpus;
pub mod ctc;
mod error;
pub mod langdist;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
