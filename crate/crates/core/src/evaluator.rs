//! Chunk-level precision, recall and F1 with conlleval semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labelled span, inclusive on both ends.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

/// Splits `B-X` into `("B", "X")` at the first hyphen; tags without one
/// have an empty type.
fn parse_tag(tag: &str) -> (&str, &str) {
    tag.split_once('-').unwrap_or((tag, ""))
}

fn end_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
    let (pt, pk) = prev;
    let (t, k) = cur;
    matches!(
        (pt, t),
        ("B", "B") | ("B", "O") | ("I", "B") | ("I", "O") | ("E", "E") | ("E", "I") | ("E", "O")
    ) || (pt != "O" && pt != "." && pk != k)
        || pt == "]"
        || pt == "["
}

fn start_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
    let (pt, pk) = prev;
    let (t, k) = cur;
    matches!(
        (pt, t),
        ("B", "B") | ("I", "B") | ("O", "B") | ("O", "I") | ("E", "E") | ("E", "I") | ("O", "E")
    ) || (t != "O" && t != "." && pk != k)
        || t == "["
        || t == "]"
}

const OUTSIDE: (&str, &str) = ("O", "");

/// Chunks of one tag sequence. Malformed transitions are resolved the way
/// conlleval resolves them, e.g. `I-X` after `O` opens a chunk.
pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut open: Option<(usize, String)> = None;
    let mut prev = OUTSIDE;
    for t in 0..=tags.len() {
        let cur = tags.get(t).map_or(OUTSIDE, |s| parse_tag(s.as_ref()));
        let close = |open: &mut Option<(usize, String)>, chunks: &mut Vec<Chunk>| {
            if let Some((start, kind)) = open.take() {
                chunks.push(Chunk {
                    start,
                    end: t - 1,
                    kind,
                });
            }
        };
        if open.is_some() && end_of_chunk(prev, cur) {
            close(&mut open, &mut chunks);
        }
        if t < tags.len() && start_of_chunk(prev, cur) {
            close(&mut open, &mut chunks);
            open = Some((t, cur.1.to_string()));
        }
        prev = cur;
    }
    chunks
}

/// Raw chunk counts for one slot type or overall.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub gold: usize,
    pub predicted: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl From<Counts> for Scores {
    /// Percentages. A zero denominator gives 0, except that no gold and no
    /// predicted chunks at all count as a perfect score.
    fn from(c: Counts) -> Self {
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        let (precision, recall) = if c.gold == 0 && c.predicted == 0 {
            (100.0, 100.0)
        } else {
            (pct(c.correct, c.predicted), pct(c.correct, c.gold))
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            correct: c.correct,
            gold: c.gold,
            predicted: c.predicted,
        }
    }
}

/// Streaming counter replicating conlleval's state machine; sentences are
/// separated by an implicit `O` boundary token.
#[derive(Debug)]
struct Counter {
    overall: Counts,
    per_type: BTreeMap<String, Counts>,
    tokens: usize,
    correct_tags: usize,
    in_correct: bool,
    last_gold: (String, String),
    last_pred: (String, String),
}

impl Counter {
    fn new() -> Self {
        Self {
            overall: Counts::default(),
            per_type: BTreeMap::new(),
            tokens: 0,
            correct_tags: 0,
            in_correct: false,
            last_gold: ("O".into(), String::new()),
            last_pred: ("O".into(), String::new()),
        }
    }

    fn step(&mut self, gold: (&str, &str), pred: (&str, &str), boundary: bool) {
        let lg = (self.last_gold.0.as_str(), self.last_gold.1.as_str());
        let lp = (self.last_pred.0.as_str(), self.last_pred.1.as_str());
        let (gold_end, pred_end) = (end_of_chunk(lg, gold), end_of_chunk(lp, pred));
        let (gold_start, pred_start) = (start_of_chunk(lg, gold), start_of_chunk(lp, pred));

        if self.in_correct {
            if gold_end && pred_end && lp.1 == lg.1 {
                self.in_correct = false;
                self.overall.correct += 1;
                self.per_type.entry(lg.1.to_string()).or_default().correct += 1;
            } else if gold_end != pred_end || pred.1 != gold.1 {
                self.in_correct = false;
            }
        }
        if gold_start && pred_start && pred.1 == gold.1 {
            self.in_correct = true;
        }
        if gold_start {
            self.overall.gold += 1;
            self.per_type.entry(gold.1.to_string()).or_default().gold += 1;
        }
        if pred_start {
            self.overall.predicted += 1;
            self.per_type.entry(pred.1.to_string()).or_default().predicted += 1;
        }
        if !boundary {
            if gold == pred {
                self.correct_tags += 1;
            }
            self.tokens += 1;
        }
        self.last_gold = (gold.0.to_string(), gold.1.to_string());
        self.last_pred = (pred.0.to_string(), pred.1.to_string());
    }

    fn finish(mut self) -> (Counts, BTreeMap<String, Counts>, usize, usize) {
        if self.in_correct {
            self.overall.correct += 1;
            let kind = self.last_gold.1.clone();
            self.per_type.entry(kind).or_default().correct += 1;
        }
        (self.overall, self.per_type, self.tokens, self.correct_tags)
    }
}

/// Scoring report over a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_type: BTreeMap<String, Scores>,
    pub counts: Counts,
    pub tokens: usize,
    /// Token accuracy in percent; diagnostic only.
    pub accuracy: f64,
}

impl Report {
    /// Text table in the layout of the conlleval script.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
            self.tokens, self.counts.gold, self.counts.predicted, self.counts.correct
        );
        let _ = writeln!(
            s,
            "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
            self.accuracy, self.precision, self.recall, self.f1
        );
        for (kind, sc) in &self.per_type {
            let _ = writeln!(
                s,
                "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
                kind, sc.precision, sc.recall, sc.f1, sc.predicted
            );
        }
        s
    }
}

/// Scores predicted tag sequences against gold ones, utterance by utterance.
/// `ids` names utterances in length-mismatch errors.
pub fn evaluate<G, P, S, T>(ids: &[String], gold: &[G], predicted: &[P]) -> Result<Report>
where
    G: AsRef<[S]>,
    P: AsRef<[T]>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if gold.len() != predicted.len() {
        return Err(Error::Data(format!(
            "{} gold utterances but {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counter = Counter::new();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g.len() != p.len() {
            let id = ids.get(i).cloned().unwrap_or_else(|| (i + 1).to_string());
            return Err(Error::Data(format!(
                "utterance `{id}`: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
        for (gt, pt) in g.iter().zip(p) {
            counter.step(parse_tag(gt.as_ref()), parse_tag(pt.as_ref()), false);
        }
        counter.step(OUTSIDE, OUTSIDE, true);
    }
    let (overall, per_type, tokens, correct_tags) = counter.finish();
    let sc = Scores::from(overall);
    Ok(Report {
        precision: sc.precision,
        recall: sc.recall,
        f1: sc.f1,
        per_type: per_type.into_iter().map(|(k, c)| (k, c.into())).collect(),
        counts: overall,
        tokens,
        accuracy: if tokens == 0 {
            0.0
        } else {
            100.0 * correct_tags as f64 / tokens as f64
        },
    })
}

/// Slot types occurring in a tag set.
pub fn chunk_types<S: AsRef<str>>(tags: &[S]) -> BTreeSet<String> {
    extract_chunks(tags).into_iter().map(|c| c.kind).collect()
}
