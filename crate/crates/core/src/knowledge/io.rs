//! Readers and writers for externally produced parses.
//!
//! Dependency files are CoNLL-U style: tab-separated rows of
//! `index form … head …` (head in column 7 for 10-column CoNLL-U, or in
//! column 3 for the short `index form head [relation]` layout), one blank
//! line between sentences. Multi-word ranges (`1-2`) and empty nodes
//! (`1.1`) are skipped.
//!
//! AMR files hold one block per utterance, fields separated by tabs:
//!
//! ```text
//! # id = 12
//! node n0 - and
//! node n1 3 leave-01
//! edge n0 op1 n1
//! root n0
//! ```
//!
//! `node <id> <token|-> [concept]` declares a node aligned to a 1-based
//! token index (or `-` for none); `edge <head> <relation> <dependent>`
//! adds a directed edge; `root <id>` is optional when exactly one node
//! lacks a parent.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Edge, KnowledgeParse, ParseNode};
use crate::error::{Error, Result};

pub fn load_dependency(path: impl AsRef<Path>) -> Result<Vec<KnowledgeParse>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_dependency(&text, &path.display().to_string())
}

struct DepSentence {
    id: Option<String>,
    line: usize,
    forms: Vec<String>,
    heads: Vec<usize>,
}

pub fn parse_dependency(text: &str, source: &str) -> Result<Vec<KnowledgeParse>> {
    let mut out = Vec::new();
    let mut cur = DepSentence {
        id: None,
        line: 1,
        forms: Vec::new(),
        heads: Vec::new(),
    };

    let finish = |cur: &mut DepSentence, out: &mut Vec<KnowledgeParse>| -> Result<()> {
        if cur.forms.is_empty() {
            cur.id = None;
            return Ok(());
        }
        let id = cur.id.take().unwrap_or_else(|| out.len().to_string());
        let n = cur.forms.len();
        if let Some((i, &h)) = cur.heads.iter().enumerate().find(|(_, &h)| h > n) {
            return Err(Error::parse(
                source,
                cur.line + i,
                format!("head index {h} out of range for {n} tokens"),
            ));
        }
        out.push(KnowledgeParse::from_heads(id, &cur.forms, &cur.heads)?);
        cur.forms.clear();
        cur.heads.clear();
        Ok(())
    };

    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut cur, &mut out)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let key = key.trim();
                if key == "sent_id" || key == "id" {
                    cur.id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if cur.forms.is_empty() {
            cur.line = lineno;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let head_col = match cols.len() {
            3 | 4 => 2,
            n if n >= 7 => 6,
            n => {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("expected 3, 4 or at least 7 columns, found {n}"),
                ))
            }
        };
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("bad token index `{}`", cols[0])))?;
        if index != cur.forms.len() + 1 {
            return Err(Error::parse(
                source,
                lineno,
                format!("token index {index} out of sequence"),
            ));
        }
        let head: usize = cols[head_col]
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("bad head index `{}`", cols[head_col])))?;
        cur.forms.push(cols[1].to_lowercase());
        cur.heads.push(head);
    }
    finish(&mut cur, &mut out)?;
    Ok(out)
}

/// Writes trees as 10-column CoNLL-U. Fails on nodes with several parents
/// or unaligned nodes, which a dependency file cannot express.
pub fn format_dependency(parses: &[KnowledgeParse]) -> Result<String> {
    let mut s = String::new();
    for (i, p) in parses.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        if !p.is_tree() || p.nodes().iter().any(|n| n.token.is_none()) {
            return Err(Error::InvalidParse {
                id: p.id.clone(),
                msg: "not a token-aligned tree".into(),
            });
        }
        let _ = writeln!(s, "# sent_id = {}", p.id);
        let mut rows: Vec<(usize, &ParseNode, usize)> = p
            .nodes()
            .iter()
            .enumerate()
            .map(|(ni, node)| {
                let head = p.parents(ni).first().map_or(0, |&h| p.nodes()[h].token.unwrap() + 1);
                (node.token.unwrap(), node, head)
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        for (tok, node, head) in rows {
            let form = node.label.as_deref().unwrap_or("_");
            let rel = if head == 0 { "root" } else { "dep" };
            let _ = writeln!(s, "{}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_", tok + 1);
        }
    }
    Ok(s)
}

pub fn load_amr(path: impl AsRef<Path>) -> Result<Vec<KnowledgeParse>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_amr(&text, &path.display().to_string())
}

#[derive(Default)]
struct AmrBlock {
    id: Option<String>,
    line: usize,
    nodes: Vec<ParseNode>,
    by_name: HashMap<String, usize>,
    edges: Vec<Edge>,
    root: Option<usize>,
}

pub fn parse_amr(text: &str, source: &str) -> Result<Vec<KnowledgeParse>> {
    let mut out = Vec::new();
    let mut block = AmrBlock::default();

    let finish = |block: &mut AmrBlock, out: &mut Vec<KnowledgeParse>| -> Result<()> {
        let b = std::mem::take(block);
        if b.nodes.is_empty() {
            if b.edges.is_empty() && b.root.is_none() {
                return Ok(());
            }
            return Err(Error::parse(source, b.line, "AMR block without nodes"));
        }
        let id = b.id.unwrap_or_else(|| out.len().to_string());
        let root = match b.root {
            Some(r) => r,
            None => {
                let mut has_parent = vec![false; b.nodes.len()];
                b.edges.iter().for_each(|e| has_parent[e.dependent] = true);
                let roots: Vec<usize> = (0..b.nodes.len()).filter(|&i| !has_parent[i]).collect();
                if roots.len() != 1 {
                    return Err(Error::InvalidParse {
                        id,
                        msg: format!("expected exactly one root, found {}", roots.len()),
                    });
                }
                roots[0]
            }
        };
        out.push(KnowledgeParse::new(id, b.nodes, b.edges, root)?);
        Ok(())
    };

    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut block, &mut out)?;
            continue;
        }
        if block.nodes.is_empty() && block.edges.is_empty() && block.id.is_none() {
            block.line = lineno;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "id" {
                    block.id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let lookup = |block: &AmrBlock, name: &str| -> Result<usize> {
            block
                .by_name
                .get(name)
                .copied()
                .ok_or_else(|| Error::parse(source, lineno, format!("undeclared node `{name}`")))
        };
        match cols[0] {
            "node" if cols.len() == 3 || cols.len() == 4 => {
                let name = cols[1].to_string();
                if block.by_name.contains_key(&name) {
                    return Err(Error::parse(source, lineno, format!("duplicate node `{name}`")));
                }
                let token = match cols[2] {
                    "-" => None,
                    t => {
                        let i: usize = t
                            .parse()
                            .map_err(|_| Error::parse(source, lineno, format!("bad token index `{t}`")))?;
                        if i == 0 {
                            return Err(Error::parse(source, lineno, "token indices are 1-based"));
                        }
                        Some(i - 1)
                    }
                };
                block.by_name.insert(name.clone(), block.nodes.len());
                block.nodes.push(ParseNode {
                    name,
                    token,
                    label: cols.get(3).map(|s| s.to_string()),
                });
            }
            "edge" if cols.len() == 4 => {
                let head = lookup(&block, cols[1])?;
                let dependent = lookup(&block, cols[3])?;
                block.edges.push(Edge {
                    head,
                    dependent,
                    relation: Some(cols[2].to_string()),
                });
            }
            "root" if cols.len() == 2 => {
                block.root = Some(lookup(&block, cols[1])?);
            }
            other => {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("unrecognised AMR line `{other}` with {} fields", cols.len()),
                ))
            }
        }
    }
    finish(&mut block, &mut out)?;
    Ok(out)
}

pub fn format_amr(parses: &[KnowledgeParse]) -> String {
    let mut s = String::new();
    for (i, p) in parses.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "# id = {}", p.id);
        for node in p.nodes() {
            let tok = node.token.map_or("-".to_string(), |t| (t + 1).to_string());
            match &node.label {
                Some(l) => {
                    let _ = writeln!(s, "node\t{}\t{tok}\t{l}", node.name);
                }
                None => {
                    let _ = writeln!(s, "node\t{}\t{tok}", node.name);
                }
            }
        }
        for e in p.edges() {
            let rel = e.relation.as_deref().unwrap_or("-");
            let _ = writeln!(
                s,
                "edge\t{}\t{rel}\t{}",
                p.nodes()[e.head].name,
                p.nodes()[e.dependent].name
            );
        }
        let _ = writeln!(s, "root\t{}", p.nodes()[p.root()].name);
    }
    s
}
