use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tokenised utterance with its IOB slot tags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        let id = id.into();
        if tokens.is_empty() {
            return Err(Error::Data(format!("utterance {id} has no tokens")));
        }
        if tokens.len() != tags.len() {
            return Err(Error::Data(format!(
                "utterance {id}: {} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        if let Err((pos, msg)) = validate_iob(&tags) {
            return Err(Error::Data(format!("utterance {id}, token {pos}: {msg}")));
        }
        Ok(Self { id, tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits `B-X` / `I-X` into prefix and type. `O` has no type.
pub fn split_tag(tag: &str) -> Option<(char, &str)> {
    let (prefix, kind) = tag.split_once('-')?;
    match prefix {
        "B" => Some(('B', kind)),
        "I" => Some(('I', kind)),
        _ => None,
    }
}

/// Checks a tag sequence for IOB well-formedness. On failure returns the
/// offending position and a message.
pub fn validate_iob(tags: &[String]) -> std::result::Result<(), (usize, String)> {
    let mut prev: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        if tag == "O" {
            prev = None;
            continue;
        }
        match split_tag(tag) {
            Some((_, "")) | None => return Err((i, format!("malformed tag `{tag}`"))),
            Some(('B', kind)) => prev = Some(kind),
            Some((_, kind)) => {
                if prev != Some(kind) {
                    return Err((i, format!("`{tag}` does not continue a chunk of type `{kind}`")));
                }
            }
        }
    }
    Ok(())
}

/// Reads a corpus file: one `token<TAB>tag` per line, blank lines between
/// utterances. Tokens are lowercased.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string())
}

/// Parses corpus text; `source` is used in error messages.
///
/// A line of the form `# id = <name>` (no tab) names the following
/// utterance. Unnamed utterances get their ordinal position as id.
pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut id: Option<String> = None;
    let mut start_line = 1;

    let mut flush = |tokens: &mut Vec<String>,
                     tags: &mut Vec<String>,
                     id: &mut Option<String>,
                     start_line: usize,
                     out: &mut Vec<Utterance>|
     -> Result<()> {
        if tokens.is_empty() {
            if let Some(id) = id.take() {
                return Err(Error::parse(
                    source,
                    start_line,
                    format!("utterance {id} has no tokens"),
                ));
            }
            return Ok(());
        }
        let name = id.take().unwrap_or_else(|| out.len().to_string());
        if !seen.insert(name.clone()) {
            return Err(Error::parse(
                source,
                start_line,
                format!("duplicate utterance id {name}"),
            ));
        }
        if let Err((pos, msg)) = validate_iob(tags) {
            return Err(Error::parse(source, start_line + pos, msg));
        }
        out.push(Utterance {
            id: name,
            tokens: std::mem::take(tokens),
            tags: std::mem::take(tags),
        });
        Ok(())
    };

    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            flush(&mut tokens, &mut tags, &mut id, start_line, &mut out)?;
            continue;
        }
        if tokens.is_empty() && id.is_none() {
            start_line = lineno;
        }
        if let Some(rest) = trimmed.strip_prefix("# id") {
            if !trimmed.contains('\t') && tokens.is_empty() {
                let name = rest.trim_start().trim_start_matches('=').trim();
                if name.is_empty() {
                    return Err(Error::parse(source, lineno, "empty utterance id"));
                }
                id = Some(name.to_string());
                start_line = lineno + 1;
                continue;
            }
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected `token<TAB>tag`, found {} columns", cols.len()),
            ));
        }
        let tag = cols[1];
        if tag != "O" && !matches!(split_tag(tag), Some((_, k)) if !k.is_empty()) {
            return Err(Error::parse(source, lineno, format!("malformed tag `{tag}`")));
        }
        tokens.push(cols[0].to_lowercase());
        tags.push(tag.to_string());
    }
    flush(&mut tokens, &mut tags, &mut id, start_line, &mut out)?;
    Ok(out)
}

/// Serialises a corpus in the format read by [`parse_corpus`]. Ids are
/// written only where they differ from the ordinal position.
pub fn format_corpus(corpus: &[Utterance]) -> String {
    let mut s = String::new();
    for (i, u) in corpus.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        if u.id != i.to_string() {
            let _ = writeln!(s, "# id = {}", u.id);
        }
        for (tok, tag) in u.tokens.iter().zip(&u.tags) {
            let _ = writeln!(s, "{tok}\t{tag}");
        }
    }
    s
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[Utterance]) -> Result<()> {
    std::fs::write(path, format_corpus(corpus))?;
    Ok(())
}
