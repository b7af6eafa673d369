use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Utterance;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

/// Word and tag index maps built from a training corpus.
///
/// Index 0 is always the padding token and index 1 the unknown token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<usize>,
    tags: Vec<String>,
    word_index: HashMap<String, usize>,
    tag_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    counts: Vec<usize>,
    tags: Vec<String>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.words, r.counts, r.tags)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            words: v.words,
            counts: v.counts,
            tags: v.tags,
        }
    }
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    /// Words and tags in order of first appearance.
    pub fn build(corpus: &[Utterance]) -> Self {
        let mut words = vec![PAD.to_string(), UNK.to_string()];
        let mut counts = vec![0, 0];
        let mut word_index: HashMap<String, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let mut tags = Vec::new();
        let mut tag_index = HashMap::new();
        for u in corpus {
            for tok in &u.tokens {
                let id = *word_index.entry(tok.clone()).or_insert_with(|| {
                    words.push(tok.clone());
                    counts.push(0);
                    words.len() - 1
                });
                counts[id] += 1;
            }
            for tag in &u.tags {
                tag_index.entry(tag.clone()).or_insert_with(|| {
                    tags.push(tag.clone());
                    tags.len() - 1
                });
            }
        }
        Self {
            words,
            counts,
            tags,
            word_index,
            tag_index,
        }
    }

    pub fn from_parts(words: Vec<String>, counts: Vec<usize>, tags: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[0] != PAD || words[1] != UNK {
            return Err(Error::Checkpoint(
                "vocabulary must start with the padding and unknown tokens".into(),
            ));
        }
        if counts.len() != words.len() {
            return Err(Error::Checkpoint("vocabulary counts misaligned".into()));
        }
        if tags.is_empty() {
            return Err(Error::Checkpoint("empty tag vocabulary".into()));
        }
        let word_index: HashMap<_, _> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let tag_index: HashMap<_, _> = tags.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        if word_index.len() != words.len() || tag_index.len() != tags.len() {
            return Err(Error::Checkpoint("duplicate vocabulary entries".into()));
        }
        Ok(Self {
            words,
            counts,
            tags,
            word_index,
            tag_index,
        })
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    /// Index of a word, falling back to the unknown index.
    pub fn word_id(&self, word: &str) -> usize {
        self.word_index.get(word).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.word_index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    /// Training frequency of a word index.
    pub fn count(&self, id: usize) -> usize {
        self.counts[id]
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}
