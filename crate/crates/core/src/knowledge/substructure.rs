use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::KnowledgeParse;

/// Default cap on the number of substructures kept per utterance.
pub const DEFAULT_MAX_SUBSTRUCTURES: usize = 64;

/// Paths explored per kept substructure before enumeration gives up on a
/// graph whose paths are mostly empty or duplicated.
const EXPLORATION_FACTOR: usize = 64;

/// A root-to-leaf path, stored as token positions in path order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substructure {
    /// 0-based token positions, root first.
    pub tokens: Vec<usize>,
    /// Parse nodes along the path, root first; empty for the sentence fallback.
    pub nodes: Vec<usize>,
    /// Leaf node the path ends in; `None` for the sentence fallback.
    pub leaf: Option<usize>,
}

impl Substructure {
    /// The whole utterance as a single substructure.
    pub fn sentence(n_tokens: usize) -> Self {
        Self {
            tokens: (0..n_tokens).collect(),
            nodes: Vec::new(),
            leaf: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains_token(&self, t: usize) -> bool {
        self.tokens.contains(&t)
    }

    /// Consecutive node pairs along the path.
    pub fn node_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Enumerates root-to-leaf paths of `parse`.
///
/// Unaligned nodes contribute no token; paths without any token are
/// dropped and paths with identical token sequences are kept once. At most
/// `max` paths are returned, ordered by the position of their last token.
pub fn extract_substructures(parse: &KnowledgeParse, max: usize) -> Vec<Substructure> {
    let mut found: Vec<Substructure> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let budget = max.saturating_mul(EXPLORATION_FACTOR).max(max);
    let mut explored = 0usize;

    // explicit stack of (node, next child slot); path mirrors the stack
    let mut stack: Vec<(usize, usize)> = vec![(parse.root(), 0)];
    let mut path: Vec<usize> = vec![parse.root()];
    while let Some(top) = stack.last_mut() {
        if found.len() >= max || explored >= budget {
            break;
        }
        let (node, next) = *top;
        let children = parse.children(node);
        if children.is_empty() {
            explored += 1;
            let tokens: Vec<usize> = path.iter().filter_map(|&n| parse.nodes()[n].token).collect();
            if !tokens.is_empty() && seen.insert(tokens.clone()) {
                found.push(Substructure {
                    tokens,
                    nodes: path.clone(),
                    leaf: Some(node),
                });
            }
            stack.pop();
            path.pop();
        } else if next < children.len() {
            top.1 += 1;
            let child = children[next];
            stack.push((child, 0));
            path.push(child);
        } else {
            stack.pop();
            path.pop();
        }
    }

    found.sort_by(|a, b| {
        let key = |s: &Substructure| *s.tokens.last().unwrap();
        key(a).cmp(&key(b)).then_with(|| a.tokens.cmp(&b.tokens))
    });
    found
}

/// Substructures for one utterance, falling back to the whole sentence
/// when there is no parse or the parse yields no aligned path.
pub fn substructures_or_sentence(parse: Option<&KnowledgeParse>, n_tokens: usize, max: usize) -> Vec<Substructure> {
    let subs = parse.map(|p| extract_substructures(p, max)).unwrap_or_default();
    let subs: Vec<Substructure> = subs
        .into_iter()
        .filter(|s| s.tokens.iter().all(|&t| t < n_tokens))
        .collect();
    if subs.is_empty() {
        vec![Substructure::sentence(n_tokens)]
    } else {
        subs
    }
}

/// Substructure count summary over a set of parses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubstructureStats {
    pub parses: usize,
    pub max: usize,
    pub mean: f64,
}

pub fn substructure_stats(parses: &[KnowledgeParse], max: usize) -> SubstructureStats {
    if parses.is_empty() {
        return SubstructureStats::default();
    }
    let counts: Vec<usize> = parses.iter().map(|p| extract_substructures(p, max).len()).collect();
    SubstructureStats {
        parses: counts.len(),
        max: counts.iter().copied().max().unwrap_or(0),
        mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
    }
}
