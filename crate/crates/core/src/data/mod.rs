//! Slot-tagging corpora: loading, vocabularies, splits and synthetic data.

mod corpus;
mod split;
pub mod synthetic;
mod vocab;

pub use corpus::{format_corpus, load_corpus, parse_corpus, save_corpus, split_tag, validate_iob, Utterance};
pub use split::{fractional_split, holdout_dev, split_size, train_dev_split, SplitManifest, DEFAULT_DEV_FRACTION};
pub use vocab::{Vocabulary, PAD, UNK};
