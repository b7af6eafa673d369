//! Synthetic flight-query corpus where one slot can only be resolved
//! through the parse.
//!
//! Every utterance contains a period-of-day word (`morning`, `evening`, …)
//! tagged either `depart_time.period_of_day` or `arrive_time.period_of_day`
//! depending on which verb governs it. Two template families make the
//! left context insufficient:
//!
//! * trailing: `which flights leave on monday from montreal and arrive in
//!   chicago in the morning`. The final phrase attaches to either verb at
//!   random, so only the parse tells which one governs it.
//! * fronted: `in the evening which flights arrive in denver from boston`.
//!   The governing verb comes after the period word.
//!
//! Each utterance is emitted with a dependency tree and an AMR-style graph
//! (unaligned concept nodes, re-entrant `flight` node in the trailing
//! family) over the same tokens.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{format_corpus, Utterance};
use crate::error::{Error, Result};
use crate::knowledge::{format_amr, format_dependency, Edge, KnowledgeParse, ParseNode};

const CITIES: &[&str] = &[
    "boston",
    "denver",
    "chicago",
    "montreal",
    "seattle",
    "dallas",
    "atlanta",
    "pittsburgh",
    "baltimore",
    "philadelphia",
    "oakland",
    "houston",
    "memphis",
    "toronto",
    "san francisco",
    "new york",
    "los angeles",
    "salt lake city",
    "kansas city",
    "las vegas",
];
const PERIODS: &[&str] = &["morning", "afternoon", "evening", "night"];
const DAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const LEAVE_VERBS: &[&str] = &["leave", "depart"];
const ARRIVE_VERBS: &[&str] = &["arrive", "land"];
const DETERMINERS: &[&str] = &["which", "what", "all"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub utterances: usize,
    /// Number of distinct cities drawn from the built-in pool (max 20).
    pub cities: usize,
    /// Number of distinct period-of-day words (max 4).
    pub periods: usize,
    /// Number of distinct weekday names (max 7).
    pub days: usize,
    /// Share of utterances using the fronted template.
    pub fronted_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            utterances: 500,
            cities: CITIES.len(),
            periods: PERIODS.len(),
            days: DAYS.len(),
            fronted_fraction: 0.5,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, n: usize, max: usize| {
            if n == 0 {
                Err(Error::Config(format!("synthetic config has no {name}: empty tag set")))
            } else if n > max {
                Err(Error::Config(format!(
                    "synthetic config asks for {n} {name}, pool has {max}"
                )))
            } else {
                Ok(())
            }
        };
        check("cities", self.cities, CITIES.len())?;
        check("periods", self.periods, PERIODS.len())?;
        check("days", self.days, DAYS.len())?;
        if !(0.0..=1.0).contains(&self.fronted_fraction) {
            return Err(Error::Config("fronted_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Where the disambiguation lives in one generated utterance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disambiguation {
    /// Position of the period-of-day word.
    pub ambiguous: usize,
    /// Position of the verb governing it.
    pub governor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub utterances: Vec<Utterance>,
    /// Dependency trees, one per utterance.
    pub dependency: Vec<KnowledgeParse>,
    /// AMR-style graphs, one per utterance.
    pub amr: Vec<KnowledgeParse>,
    pub disambiguation: Vec<Disambiguation>,
}

impl SyntheticCorpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Writes `<stem>.txt`, `<stem>.dep.conllu` and `<stem>.amr` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.txt")), format_corpus(&self.utterances))?;
        std::fs::write(
            dir.join(format!("{stem}.dep.conllu")),
            format_dependency(&self.dependency)?,
        )?;
        std::fs::write(dir.join(format!("{stem}.amr")), format_amr(&self.amr))?;
        Ok(())
    }
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum Side {
    Depart,
    Arrive,
}

impl Side {
    fn date_tag(self) -> &'static str {
        match self {
            Side::Depart => "B-depart_date.day_name",
            Side::Arrive => "B-arrive_date.day_name",
        }
    }

    fn period_tag(self) -> &'static str {
        match self {
            Side::Depart => "B-depart_time.period_of_day",
            Side::Arrive => "B-arrive_time.period_of_day",
        }
    }

    fn frame(self) -> &'static str {
        match self {
            Side::Depart => "leave-01",
            Side::Arrive => "arrive-01",
        }
    }
}

/// Accumulates tokens, tags, dependency heads and the AMR graph together.
#[derive(Default)]
struct Builder {
    words: Vec<String>,
    tags: Vec<String>,
    heads: Vec<Option<usize>>,
    amr_nodes: Vec<ParseNode>,
    amr_edges: Vec<Edge>,
}

impl Builder {
    fn token(&mut self, word: &str, tag: &str) -> usize {
        self.words.push(word.to_string());
        self.tags.push(tag.to_string());
        self.heads.push(None);
        self.words.len() - 1
    }

    fn attach(&mut self, dependent: usize, head: usize) {
        self.heads[dependent] = Some(head);
    }

    /// Adds a possibly multi-word city; returns all token positions. The
    /// last word heads the others.
    fn city(&mut self, city: &str, slot: &str) -> Vec<usize> {
        let toks: Vec<usize> = city
            .split(' ')
            .enumerate()
            .map(|(i, w)| {
                let prefix = if i == 0 { "B" } else { "I" };
                self.token(w, &format!("{prefix}-{slot}"))
            })
            .collect();
        let head = *toks.last().unwrap();
        for &t in &toks[..toks.len() - 1] {
            self.attach(t, head);
        }
        toks
    }

    fn concept(&mut self, token: Option<usize>, concept: &str) -> usize {
        self.amr_nodes.push(ParseNode {
            name: format!("n{}", self.amr_nodes.len()),
            token,
            label: Some(concept.to_string()),
        });
        self.amr_nodes.len() - 1
    }

    fn relate(&mut self, head: usize, relation: &str, dependent: usize) {
        self.amr_edges.push(Edge {
            head,
            dependent,
            relation: Some(relation.to_string()),
        });
    }

    /// `city :name (name :op1 w1 :op2 w2 …)` with each name word aligned.
    fn amr_city(&mut self, tokens: &[usize]) -> usize {
        let city = self.concept(None, "city");
        let name = self.concept(None, "name");
        self.relate(city, "name", name);
        for (i, &t) in tokens.iter().enumerate() {
            let word = self.words[t].clone();
            let op = self.concept(Some(t), &format!("\"{word}\""));
            self.relate(name, &format!("op{}", i + 1), op);
        }
        city
    }

    fn amr_weekday(&mut self, token: usize) -> usize {
        let date = self.concept(None, "date-entity");
        let day = self.concept(Some(token), &self.words[token].clone());
        self.relate(date, "weekday", day);
        date
    }

    fn amr_period(&mut self, token: usize) -> usize {
        let date = self.concept(None, "date-entity");
        let period = self.concept(Some(token), &self.words[token].clone());
        self.relate(date, "dayperiod", period);
        date
    }

    fn finish(self, id: String) -> Result<(Utterance, KnowledgeParse, KnowledgeParse)> {
        let heads: Vec<usize> = self.heads.iter().map(|h| h.map_or(0, |h| h + 1)).collect();
        let dep = KnowledgeParse::from_heads(id.clone(), &self.words, &heads)?;
        let root = {
            let mut has_parent = vec![false; self.amr_nodes.len()];
            self.amr_edges.iter().for_each(|e| has_parent[e.dependent] = true);
            has_parent.iter().position(|p| !p).expect("amr root")
        };
        let amr = KnowledgeParse::new(id.clone(), self.amr_nodes, self.amr_edges, root)?;
        let utt = Utterance::new(id, self.words, self.tags)?;
        Ok((utt, dep, amr))
    }
}

struct Pools<'a> {
    cities: &'a [&'a str],
    periods: &'a [&'a str],
    days: &'a [&'a str],
}

/// Generates `config.utterances` utterances with matching parses.
/// Identical config and seed give identical output.
pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools = Pools {
        cities: &CITIES[..config.cities],
        periods: &PERIODS[..config.periods],
        days: &DAYS[..config.days],
    };
    let mut out = SyntheticCorpus {
        utterances: Vec::with_capacity(config.utterances),
        dependency: Vec::with_capacity(config.utterances),
        amr: Vec::with_capacity(config.utterances),
        disambiguation: Vec::with_capacity(config.utterances),
    };
    for i in 0..config.utterances {
        let fronted = rng.gen_bool(config.fronted_fraction);
        let (builder, dis) = if fronted {
            fronted_utterance(&mut rng, &pools)
        } else {
            trailing_utterance(&mut rng, &pools)
        };
        let (u, dep, amr) = builder.finish(i.to_string())?;
        out.utterances.push(u);
        out.dependency.push(dep);
        out.amr.push(amr);
        out.disambiguation.push(dis);
    }
    Ok(out)
}

fn two_cities<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> (&'a str, &'a str) {
    let from = *pool.choose(rng).unwrap();
    if pool.len() == 1 {
        return (from, from);
    }
    loop {
        let to = *pool.choose(rng).unwrap();
        if to != from {
            return (from, to);
        }
    }
}

/// `DET flights V1 … and V2 … in the PERIOD`, period governed by either verb.
fn trailing_utterance(rng: &mut ChaCha8Rng, pools: &Pools) -> (Builder, Disambiguation) {
    let mut b = Builder::default();
    let leave_first = rng.gen_bool(0.5);
    let period_side = if rng.gen_bool(0.5) { Side::Depart } else { Side::Arrive };
    let day_side = if rng.gen_bool(0.5) { Side::Depart } else { Side::Arrive };
    let with_day = rng.gen_bool(0.7);
    let (from, to) = two_cities(rng, pools.cities);
    let day = *pools.days.choose(rng).unwrap();
    let period = *pools.periods.choose(rng).unwrap();
    let leave_verb = *LEAVE_VERBS.choose(rng).unwrap();
    let arrive_verb = *ARRIVE_VERBS.choose(rng).unwrap();

    let det = b.token(DETERMINERS.choose(rng).unwrap(), "O");
    let flights = b.token("flights", "O");
    b.attach(det, flights);

    let amr_and = b.concept(None, "and");
    let amr_flight = b.concept(Some(flights), "flight");
    let amr_det = b.concept(Some(det), "amr-unknown");
    b.relate(amr_flight, "mod", amr_det);

    let sides = if leave_first {
        [Side::Depart, Side::Arrive]
    } else {
        [Side::Arrive, Side::Depart]
    };
    let mut verbs = [0usize; 2];
    let mut amr_verbs = [0usize; 2];
    for (k, &side) in sides.iter().enumerate() {
        if k == 1 {
            let and = b.token("and", "O");
            verbs[k] = b.token(if side == Side::Depart { leave_verb } else { arrive_verb }, "O");
            b.attach(and, verbs[k]);
        } else {
            verbs[k] = b.token(if side == Side::Depart { leave_verb } else { arrive_verb }, "O");
        }
        let v = verbs[k];
        b.attach(v, flights);
        let amr_v = b.concept(Some(v), side.frame());
        amr_verbs[k] = amr_v;
        b.relate(amr_and, &format!("op{}", k + 1), amr_v);
        b.relate(amr_v, "ARG1", amr_flight);

        if with_day && day_side == side {
            let on = b.token("on", "O");
            let d = b.token(day, side.date_tag());
            b.attach(on, d);
            b.attach(d, v);
            let date = b.amr_weekday(d);
            b.relate(amr_v, "time", date);
        }
        let (prep, city, slot, role) = match side {
            Side::Depart => ("from", from, "fromloc.city_name", "ARG3"),
            Side::Arrive => ("in", to, "toloc.city_name", "ARG4"),
        };
        let p = b.token(prep, "O");
        let toks = b.city(city, slot);
        let head = *toks.last().unwrap();
        b.attach(p, head);
        b.attach(head, v);
        let c = b.amr_city(&toks);
        b.relate(amr_v, role, c);
    }

    let in_ = b.token("in", "O");
    let the = b.token("the", "O");
    let per = b.token(period, period_side.period_tag());
    b.attach(in_, per);
    b.attach(the, per);
    let k = sides.iter().position(|&s| s == period_side).unwrap();
    b.attach(per, verbs[k]);
    let date = b.amr_period(per);
    b.relate(amr_verbs[k], "time", date);

    (
        b,
        Disambiguation {
            ambiguous: per,
            governor: verbs[k],
        },
    )
}

/// `in the PERIOD DET flights V …` with the single verb after the period.
fn fronted_utterance(rng: &mut ChaCha8Rng, pools: &Pools) -> (Builder, Disambiguation) {
    let mut b = Builder::default();
    let side = if rng.gen_bool(0.5) { Side::Depart } else { Side::Arrive };
    let with_day = rng.gen_bool(0.5);
    let (from, to) = two_cities(rng, pools.cities);
    let day = *pools.days.choose(rng).unwrap();
    let period = *pools.periods.choose(rng).unwrap();
    let verb = match side {
        Side::Depart => *LEAVE_VERBS.choose(rng).unwrap(),
        Side::Arrive => *ARRIVE_VERBS.choose(rng).unwrap(),
    };

    let in_ = b.token("in", "O");
    let the = b.token("the", "O");
    let per = b.token(period, side.period_tag());
    b.attach(in_, per);
    b.attach(the, per);
    let det = b.token(DETERMINERS.choose(rng).unwrap(), "O");
    let flights = b.token("flights", "O");
    b.attach(det, flights);
    let v = b.token(verb, "O");
    b.attach(v, flights);
    b.attach(per, v);

    let amr_v = b.concept(Some(v), side.frame());
    let amr_flight = b.concept(Some(flights), "flight");
    let amr_det = b.concept(Some(det), "amr-unknown");
    b.relate(amr_v, "ARG1", amr_flight);
    b.relate(amr_flight, "mod", amr_det);
    let date = b.amr_period(per);
    b.relate(amr_v, "time", date);

    // city order follows the verb: leave from X to Y / arrive in Y from X
    let legs: [(&str, &str, &str, &str); 2] = match side {
        Side::Depart => [
            ("from", from, "fromloc.city_name", "ARG3"),
            ("to", to, "toloc.city_name", "ARG4"),
        ],
        Side::Arrive => [
            ("in", to, "toloc.city_name", "ARG4"),
            ("from", from, "fromloc.city_name", "ARG3"),
        ],
    };
    for (prep, city, slot, role) in legs {
        let p = b.token(prep, "O");
        let toks = b.city(city, slot);
        let head = *toks.last().unwrap();
        b.attach(p, head);
        b.attach(head, v);
        let c = b.amr_city(&toks);
        b.relate(amr_v, role, c);
    }
    if with_day {
        let on = b.token("on", "O");
        let d = b.token(day, side.date_tag());
        b.attach(on, d);
        b.attach(d, v);
        let date = b.amr_weekday(d);
        b.relate(amr_v, "time", date);
    }
    (
        b,
        Disambiguation {
            ambiguous: per,
            governor: v,
        },
    )
}
