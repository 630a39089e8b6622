//! Corpus handling: manifests, feature files, vocabularies, and balanced
//! multilingual dataset construction.

pub mod features;
pub mod manifest;
pub mod sampling;
pub mod vocab;

pub use features::FeatureMatrix;
pub use manifest::{group_by_lang, load_manifest, write_manifest, Features, Utterance};
pub use sampling::{balanced_sample, build_incremental_sets, Dataset, DatasetSpec, SampleWarning};
pub use vocab::{Vocabulary, BLANK_SYMBOL};
