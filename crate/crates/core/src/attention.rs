//! Attention of the utterance vector over the knowledge memory and the
//! resulting knowledge-guided representation.

use serde::{Deserialize, Serialize};

use crate::encoders::OutputNet;
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeParse, Substructure};
use crate::math::{Graph, NodeId, ParamStore, Tensor};

/// Attention distribution `softmax(memory · uᵀ)` as a `1 × n` row.
pub fn attend(g: &mut Graph, u: NodeId, memory: NodeId) -> Result<NodeId> {
    let (us, ms) = (g.shape(u), g.shape(memory));
    if us[0] != 1 || us[1] != ms[1] {
        return Err(Error::ShapeMismatch {
            op: "attend",
            left: us,
            right: ms,
        });
    }
    let mt = g.transpose(memory);
    let scores = g.matmul(u, mt)?;
    Ok(g.softmax(scores))
}

/// Weighted sum `p · memory` of the memory rows.
pub fn compose(g: &mut Graph, memory: NodeId, p: NodeId) -> Result<NodeId> {
    g.matmul(p, memory)
}

#[derive(Clone, Copy, Debug)]
pub struct KnowledgeOutput {
    pub p: NodeId,
    pub h: NodeId,
    pub o: NodeId,
}

/// `o = out(h + u)` with `h` the attention-weighted memory.
pub fn knowledge_representation(
    g: &mut Graph,
    store: &ParamStore,
    net: &OutputNet,
    u: NodeId,
    memory: NodeId,
) -> Result<KnowledgeOutput> {
    let p = attend(g, u, memory)?;
    let h = compose(g, memory, p)?;
    let sum = g.add(h, u)?;
    let o = net.forward(g, store, sum)?;
    Ok(KnowledgeOutput { p, h, o })
}

/// Attention weights for constant inputs.
pub fn attention_weights(u: &Tensor, memory: &Tensor) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let u = g.constant(u.clone());
    let m = g.constant(memory.clone());
    let p = attend(&mut g, u, m)?;
    Ok(g.value(p).data().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSubstructure {
    pub tokens: Vec<usize>,
    pub words: Vec<String>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSalience {
    pub head: String,
    pub dependent: String,
    pub head_token: Option<usize>,
    pub dependent_token: Option<usize>,
    pub relation: Option<String>,
    pub weight: f64,
}

/// Attention of one utterance, ready for inspection or plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub substructures: Vec<WeightedSubstructure>,
    /// Largest weight among the substructures containing each token.
    pub token_salience: Vec<f64>,
    /// Largest weight among the substructures traversing each parse edge.
    pub edge_salience: Vec<EdgeSalience>,
}

impl AttentionRecord {
    pub fn new(
        id: impl Into<String>,
        tokens: &[String],
        subs: &[Substructure],
        weights: &[f64],
        parse: Option<&KnowledgeParse>,
    ) -> Result<Self> {
        if subs.len() != weights.len() {
            return Err(Error::Data(format!(
                "{} substructures but {} attention weights",
                subs.len(),
                weights.len()
            )));
        }
        let substructures = subs
            .iter()
            .zip(weights)
            .map(|(s, &w)| WeightedSubstructure {
                tokens: s.tokens.clone(),
                words: s
                    .tokens
                    .iter()
                    .map(|&t| tokens.get(t).cloned().unwrap_or_default())
                    .collect(),
                weight: w,
            })
            .collect();
        Ok(Self {
            id: id.into(),
            tokens: tokens.to_vec(),
            substructures,
            token_salience: token_salience(tokens.len(), subs, weights),
            edge_salience: parse.map(|p| edge_salience(p, subs, weights)).unwrap_or_default(),
        })
    }

    /// Index of the most attended substructure; the first wins on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.substructures.iter().enumerate() {
            if best.is_none_or(|(_, w)| s.weight > w) {
                best = Some((i, s.weight));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub fn token_salience(n_tokens: usize, subs: &[Substructure], weights: &[f64]) -> Vec<f64> {
    let mut sal = vec![0.0; n_tokens];
    for (s, &w) in subs.iter().zip(weights) {
        for &t in &s.tokens {
            if t < n_tokens && w > sal[t] {
                sal[t] = w;
            }
        }
    }
    sal
}

pub fn edge_salience(parse: &KnowledgeParse, subs: &[Substructure], weights: &[f64]) -> Vec<EdgeSalience> {
    let nodes = parse.nodes();
    parse
        .edges()
        .iter()
        .map(|e| {
            let weight = subs
                .iter()
                .zip(weights)
                .filter(|(s, _)| s.node_edges().any(|(h, d)| h == e.head && d == e.dependent))
                .map(|(_, &w)| w)
                .fold(0.0, f64::max);
            EdgeSalience {
                head: nodes[e.head].name.clone(),
                dependent: nodes[e.dependent].name.clone(),
                head_token: nodes[e.head].token,
                dependent_token: nodes[e.dependent].token,
                relation: e.relation.clone(),
                weight,
            }
        })
        .collect()
}
