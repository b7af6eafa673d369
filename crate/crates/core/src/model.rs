//! The complete tagger: shared embeddings, sentence/substructure encoder,
//! attention over the knowledge memory and the recurrent tower(s).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{knowledge_representation, AttentionRecord};
use crate::data::{Utterance, Vocabulary};
use crate::encoders::{EncoderKind, OutputNet, SentenceEncoder};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, Report};
use crate::knowledge::{Example, Substructure};
use crate::math::init::uniform;
use crate::math::{Gradients, Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::tagger::{check_alpha, joint_hidden, Cell, CellKind, KnowledgeProjection, OutputLayer, Tower};

pub const EMBEDDING_INIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Recurrent tagger without knowledge.
    Chain,
    /// Single tower reading the knowledge vector at every step.
    Knowledge,
    /// Chain and knowledge towers blended before the output layer.
    #[default]
    Joint,
}

impl Architecture {
    pub fn uses_knowledge(self) -> bool {
        self != Self::Chain
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chain" => Ok(Self::Chain),
            "knowledge" => Ok(Self::Knowledge),
            "joint" => Ok(Self::Joint),
            other => Err(Error::Config(format!("unknown tagger architecture `{other}`"))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Chain => "chain",
            Self::Knowledge => "knowledge",
            Self::Joint => "joint",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub encoder: EncoderKind,
    pub cell: CellKind,
    pub embedding_dim: usize,
    /// Size of the tagger state and of every encoded vector.
    pub hidden_dim: usize,
    /// Weight of the chain tower in the joint blend.
    pub alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Joint,
            encoder: EncoderKind::Cnn,
            cell: CellKind::Gru,
            embedding_dim: 100,
            hidden_dim: 100,
            alpha: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("embedding and hidden sizes must be positive".into()));
        }
        check_alpha(self.alpha)
    }
}

/// Parameter handles; rebuilt deterministically from the config.
#[derive(Clone, Debug)]
struct Layout {
    embedding: ParamId,
    encoder: Option<SentenceEncoder>,
    out_net: Option<OutputNet>,
    chain: Option<Tower>,
    knowledge: Option<Tower>,
    output: OutputLayer,
}

/// Word ids, gold tag ids and substructure token lists of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub words: Vec<usize>,
    pub tags: Vec<usize>,
    pub substructures: Vec<Vec<usize>>,
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

impl<R: Rng> Dropout<'_, R> {
    fn apply(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let [r, c] = g.shape(x);
        let keep = 1.0 / (1.0 - self.rate);
        let data = (0..r * c)
            .map(|_| if self.rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        let mask = g.constant(Tensor::new(r, c, data)?);
        g.mul(x, mask)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// `T × K` tag distributions.
    pub probs: NodeId,
    /// `1 × n` attention over the substructures, when knowledge is used.
    pub attention: Option<NodeId>,
}

#[derive(Clone, Debug)]
pub struct Ksan {
    config: ModelConfig,
    vocab: Vocabulary,
    store: ParamStore,
    layout: Layout,
}

impl Ksan {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, vocab: Vocabulary, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if vocab.n_tags() == 0 {
            return Err(Error::Data("vocabulary has no tags".into()));
        }
        let (e, d) = (config.embedding_dim, config.hidden_dim);
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", uniform(rng, vocab.n_words(), e, EMBEDDING_INIT));
        let (encoder, out_net) = if config.architecture.uses_knowledge() {
            (
                Some(SentenceEncoder::new(config.encoder, &mut store, "encoder", e, d, rng)),
                Some(OutputNet::new(&mut store, "attention_out", d, rng)),
            )
        } else {
            (None, None)
        };
        let chain = matches!(config.architecture, Architecture::Chain | Architecture::Joint).then(|| Tower {
            cell: Cell::new(config.cell, &mut store, "chain", e, d, rng),
            knowledge: None,
        });
        let knowledge = config.architecture.uses_knowledge().then(|| Tower {
            cell: Cell::new(config.cell, &mut store, "knowledge", e, d, rng),
            knowledge: Some(KnowledgeProjection::new(
                config.cell,
                &mut store,
                "knowledge",
                d,
                d,
                rng,
            )),
        });
        let output = OutputLayer::new(&mut store, "output", d, vocab.n_tags(), rng);
        Ok(Self {
            config,
            vocab,
            store,
            layout: Layout {
                embedding,
                encoder,
                out_net,
                chain,
                knowledge,
                output,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn embedding(&self) -> ParamId {
        self.layout.embedding
    }

    /// Maps an example to ids; unseen words become the unknown word and
    /// unseen gold tags are an error.
    pub fn instance(&self, ex: &Example) -> Result<Instance> {
        let words = ex.utterance.tokens.iter().map(|w| self.vocab.word_id(w)).collect();
        let tags = ex
            .utterance
            .tags
            .iter()
            .map(|t| {
                self.vocab.tag_id(t).ok_or_else(|| {
                    Error::Data(format!("utterance `{}`: tag `{t}` not in the tag set", ex.utterance.id))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Instance {
            words,
            tags,
            substructures: ex.substructures.iter().map(|s| s.tokens.clone()).collect(),
        })
    }

    /// Builds the forward graph of one utterance.
    pub fn forward<R: Rng>(
        &self,
        g: &mut Graph,
        words: &[usize],
        substructures: &[Vec<usize>],
        mut dropout: Option<&mut Dropout<'_, R>>,
    ) -> Result<Forward> {
        if words.is_empty() {
            return Err(Error::Data("cannot tag an empty utterance".into()));
        }
        let s = &self.store;
        let emb = g.param(s, self.layout.embedding);
        let idx: Vec<Option<usize>> = words.iter().map(|&w| Some(w)).collect();
        let mut x = g.gather_rows(emb, &idx)?;
        if let Some(d) = dropout.as_deref_mut() {
            x = d.apply(g, x)?;
        }

        let (o, attention) = match (&self.layout.encoder, &self.layout.out_net) {
            (Some(enc), Some(net)) => {
                if substructures.is_empty() {
                    return Err(Error::Data("knowledge memory needs at least one substructure".into()));
                }
                let u = enc.encode(g, s, x)?;
                let mut rows = Vec::with_capacity(substructures.len());
                for sub in substructures {
                    if sub.is_empty() || sub.iter().any(|&t| t >= words.len()) {
                        return Err(Error::Data("substructure outside the utterance".into()));
                    }
                    let idx: Vec<Option<usize>> = sub.iter().map(|&t| Some(t)).collect();
                    let toks = g.gather_rows(x, &idx)?;
                    rows.push(enc.encode(g, s, toks)?);
                }
                let memory = g.concat_rows(&rows)?;
                let k = knowledge_representation(g, s, net, u, memory)?;
                (Some(k.o), Some(k.p))
            }
            _ => (None, None),
        };

        let mut h = match (self.config.architecture, o) {
            (Architecture::Chain, _) => self.layout.chain.as_ref().unwrap().run(g, s, x, None)?,
            (Architecture::Knowledge, Some(o)) => self.layout.knowledge.as_ref().unwrap().run(g, s, x, Some(o))?,
            (Architecture::Joint, Some(o)) => joint_hidden(
                g,
                s,
                self.layout.chain.as_ref().unwrap(),
                self.layout.knowledge.as_ref().unwrap(),
                x,
                o,
                self.config.alpha,
            )?,
            _ => unreachable!("knowledge architectures always build an encoder"),
        };
        if let Some(d) = dropout {
            h = d.apply(g, h)?;
        }
        let probs = self.layout.output.distributions(g, s, h)?;
        Ok(Forward { probs, attention })
    }

    /// Summed token cross-entropy and its gradients.
    pub fn loss_and_gradients<R: Rng>(
        &self,
        inst: &Instance,
        dropout: Option<&mut Dropout<'_, R>>,
    ) -> Result<(f64, Gradients)> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, &inst.words, &inst.substructures, dropout)?;
        let loss = g.cross_entropy(f.probs, &inst.tags)?;
        let value = g.value(loss).item();
        Ok((value, g.backward(loss)?))
    }

    /// Summed token cross-entropy without dropout.
    pub fn loss(&self, inst: &Instance) -> Result<f64> {
        let mut g = Graph::new();
        let f = self.forward::<rand_chacha::ChaCha8Rng>(&mut g, &inst.words, &inst.substructures, None)?;
        let loss = g.cross_entropy(f.probs, &inst.tags)?;
        Ok(g.value(loss).item())
    }

    /// Tag distributions (`T × K`) and attention weights, without dropout.
    pub fn distributions(&self, tokens: &[String], subs: &[Substructure]) -> Result<(Tensor, Option<Vec<f64>>)> {
        let words: Vec<usize> = tokens.iter().map(|w| self.vocab.word_id(w)).collect();
        let subs: Vec<Vec<usize>> = subs.iter().map(|s| s.tokens.clone()).collect();
        let mut g = Graph::new();
        let f = self.forward::<rand_chacha::ChaCha8Rng>(&mut g, &words, &subs, None)?;
        let p = f.attention.map(|a| g.value(a).data().to_vec());
        Ok((g.value(f.probs).clone(), p))
    }

    /// Greedy per-token tags.
    pub fn predict(&self, tokens: &[String], subs: &[Substructure]) -> Result<Vec<String>> {
        let (probs, _) = self.distributions(tokens, subs)?;
        Ok((0..probs.rows())
            .map(|t| self.vocab.tag(probs.argmax_row(t)).to_string())
            .collect())
    }

    /// Attention over an example's substructures; `None` for the chain tagger.
    pub fn attention(&self, ex: &Example) -> Result<Option<AttentionRecord>> {
        let (_, p) = self.distributions(&ex.utterance.tokens, &ex.substructures)?;
        p.map(|p| {
            AttentionRecord::new(
                ex.utterance.id.clone(),
                &ex.utterance.tokens,
                &ex.substructures,
                &p,
                ex.parse.as_ref(),
            )
        })
        .transpose()
    }

    /// Replaces embedding rows with vectors from a `word v1 … ve` text file.
    /// Returns the number of vocabulary words found.
    pub fn load_embeddings(&mut self, text: &str) -> Result<usize> {
        let e = self.config.embedding_dim;
        let mut found = 0;
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|err| Error::parse("embeddings", n + 1, format!("{err}")))?;
            if values.len() != e {
                // word2vec text files start with a "count dim" header
                if n == 0 && values.len() == 1 {
                    continue;
                }
                return Err(Error::parse(
                    "embeddings",
                    n + 1,
                    format!("expected {e} values, found {}", values.len()),
                ));
            }
            if self.vocab.contains_word(word) {
                let id = self.vocab.word_id(word);
                self.store
                    .get_mut(self.layout.embedding)
                    .row_slice_mut(id)
                    .copy_from_slice(&values);
                found += 1;
            }
        }
        Ok(found)
    }

    /// Scores the greedy predictions against the gold tags of `examples`.
    pub fn evaluate(&self, examples: &[Example]) -> Result<Report> {
        let predicted = self.predict_all(examples)?;
        let gold: Vec<&[String]> = examples.iter().map(|e| e.utterance.tags.as_slice()).collect();
        let ids: Vec<String> = examples.iter().map(|e| e.utterance.id.clone()).collect();
        evaluate(&ids, &gold, &predicted)
    }

    /// Tags a whole corpus of examples.
    pub fn predict_all(&self, examples: &[Example]) -> Result<Vec<Vec<String>>> {
        use rayon::prelude::*;
        examples
            .par_iter()
            .map(|ex| self.predict(&ex.utterance.tokens, &ex.substructures))
            .collect()
    }
}

/// Convenience for callers holding bare utterances.
pub fn sentence_examples(corpus: &[Utterance]) -> Vec<Example> {
    corpus
        .iter()
        .map(|u| Example {
            substructures: vec![Substructure::sentence(u.len())],
            utterance: u.clone(),
            parse: None,
        })
        .collect()
}
