//! Knowledge-guided structural attention networks for slot tagging.
//!
//! Utterances are tagged by a recurrent tagger that additionally receives
//! a sentence representation built by attending over root-to-leaf paths
//! of an external parse (dependency tree or AMR graph).

pub mod attention;
pub mod checkpoint;
pub mod data;
pub mod encoders;
pub mod error;
pub mod evaluator;
pub mod knowledge;
pub mod math;
pub mod model;
pub mod tagger;
pub mod trainer;

pub use error::{Error, Result};
