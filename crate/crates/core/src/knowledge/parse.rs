use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of a knowledge parse, optionally aligned to one token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseNode {
    pub name: String,
    /// 0-based token position.
    pub token: Option<usize>,
    /// Word form or concept, kept for display only.
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub head: usize,
    pub dependent: usize,
    /// Relation label; never used as a model feature.
    pub relation: Option<String>,
}

/// A rooted, connected, acyclic graph over the tokens of one utterance.
/// Dependency trees and AMR graphs both load into this form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeParse {
    pub id: String,
    nodes: Vec<ParseNode>,
    edges: Vec<Edge>,
    root: usize,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

impl KnowledgeParse {
    pub fn new(id: impl Into<String>, nodes: Vec<ParseNode>, edges: Vec<Edge>, root: usize) -> Result<Self> {
        let id = id.into();
        let invalid = |msg: String| Error::InvalidParse { id: id.clone(), msg };
        if nodes.is_empty() {
            return Err(invalid("parse has no nodes".into()));
        }
        if root >= nodes.len() {
            return Err(invalid(format!("root {root} out of range")));
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut has_parent = vec![false; nodes.len()];
        for e in &edges {
            if e.head >= nodes.len() || e.dependent >= nodes.len() {
                return Err(invalid(format!(
                    "edge {} -> {} references a missing node",
                    e.head, e.dependent
                )));
            }
            if e.head == e.dependent {
                return Err(invalid(format!("self loop on node `{}`", nodes[e.head].name)));
            }
            if children[e.head].contains(&e.dependent) {
                continue;
            }
            children[e.head].push(e.dependent);
            has_parent[e.dependent] = true;
        }
        if has_parent[root] {
            return Err(invalid(format!("root `{}` has an incoming edge", nodes[root].name)));
        }

        // children in token order, unaligned nodes last, then declaration order
        for ch in &mut children {
            ch.sort_by_key(|&c| (nodes[c].token.unwrap_or(usize::MAX), c));
        }

        // three-colour DFS: detects cycles and unreachable nodes
        let mut state = vec![0u8; nodes.len()];
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = children[node].get(*next) {
                *next += 1;
                match state[child] {
                    0 => {
                        state[child] = 1;
                        stack.push((child, 0));
                    }
                    1 => return Err(invalid(format!("cycle through node `{}`", nodes[child].name))),
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
        if let Some(lost) = state.iter().position(|&s| s == 0) {
            return Err(invalid(format!(
                "node `{}` is not reachable from the root",
                nodes[lost].name
            )));
        }

        Ok(Self {
            id,
            nodes,
            edges,
            root,
            children,
        })
    }

    /// Builds a dependency tree from 1-based head indices (0 marks the root).
    pub fn from_heads(id: impl Into<String>, forms: &[String], heads: &[usize]) -> Result<Self> {
        let id = id.into();
        if forms.len() != heads.len() {
            return Err(Error::InvalidParse {
                id,
                msg: "forms and heads differ in length".into(),
            });
        }
        let roots: Vec<usize> = heads
            .iter()
            .enumerate()
            .filter(|(_, &h)| h == 0)
            .map(|(i, _)| i)
            .collect();
        if roots.len() != 1 {
            return Err(Error::InvalidParse {
                id,
                msg: format!("expected exactly one root, found {}", roots.len()),
            });
        }
        let nodes = forms
            .iter()
            .enumerate()
            .map(|(i, f)| ParseNode {
                name: (i + 1).to_string(),
                token: Some(i),
                label: Some(f.clone()),
            })
            .collect();
        let mut edges = Vec::new();
        for (i, &h) in heads.iter().enumerate() {
            if h > heads.len() {
                return Err(Error::InvalidParse {
                    id,
                    msg: format!("head {h} of token {} out of range", i + 1),
                });
            }
            if h != 0 {
                edges.push(Edge {
                    head: h - 1,
                    dependent: i,
                    relation: None,
                });
            }
        }
        Self::new(id, nodes, edges, roots[0])
    }

    /// Rebuilds derived adjacency after deserialisation.
    pub fn revalidate(self) -> Result<Self> {
        Self::new(self.id, self.nodes, self.edges, self.root)
    }

    pub fn nodes(&self) -> &[ParseNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&p| self.children[p].contains(&node))
            .collect()
    }

    /// Whether every node has at most one parent.
    pub fn is_tree(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        for ch in &self.children {
            for &c in ch {
                if std::mem::replace(&mut seen[c], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest aligned token position, if any node is aligned.
    pub fn max_token(&self) -> Option<usize> {
        self.nodes.iter().filter_map(|n| n.token).max()
    }

    pub fn leaf_count(&self) -> usize {
        (0..self.nodes.len()).filter(|&n| self.is_leaf(n)).count()
    }
}
