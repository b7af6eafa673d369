use std::collections::HashMap;

use super::{substructures_or_sentence, KnowledgeParse, Substructure};
use crate::data::Utterance;
use crate::error::{Error, Result};

/// An utterance together with its parse and the substructures fed to the
/// knowledge memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub utterance: Utterance,
    pub parse: Option<KnowledgeParse>,
    pub substructures: Vec<Substructure>,
}

impl Example {
    pub fn new(utterance: Utterance, parse: Option<KnowledgeParse>, max: usize) -> Result<Self> {
        if let Some(p) = &parse {
            if let Some(t) = p.max_token() {
                if t >= utterance.len() {
                    return Err(Error::Data(format!(
                        "parse `{}` aligns token {} but the utterance has {} tokens",
                        p.id,
                        t + 1,
                        utterance.len()
                    )));
                }
            }
        }
        let substructures = substructures_or_sentence(parse.as_ref(), utterance.len(), max);
        Ok(Self {
            utterance,
            parse,
            substructures,
        })
    }
}

/// Pairs every utterance with the parse of the same id. Without parses each
/// utterance falls back to the whole sentence as its only substructure.
pub fn attach_parses(corpus: &[Utterance], parses: Option<&[KnowledgeParse]>, max: usize) -> Result<Vec<Example>> {
    let Some(parses) = parses else {
        return corpus.iter().map(|u| Example::new(u.clone(), None, max)).collect();
    };
    if parses.len() != corpus.len() {
        return Err(Error::Data(format!(
            "{} utterances but {} parses",
            corpus.len(),
            parses.len()
        )));
    }
    let mut by_id: HashMap<&str, &KnowledgeParse> = HashMap::with_capacity(parses.len());
    for p in parses {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::Data(format!("duplicate parse id `{}`", p.id)));
        }
    }
    corpus
        .iter()
        .map(|u| {
            let p = by_id
                .get(u.id.as_str())
                .ok_or_else(|| Error::Data(format!("no parse for utterance `{}`", u.id)))?;
            Example::new(u.clone(), Some((*p).clone()), max)
        })
        .collect()
}
