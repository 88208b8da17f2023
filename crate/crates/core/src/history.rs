//! Queries, histories, and the derived notions `Issued`, `Pending`,
//! coherence, completeness and attainability.
//!
//! A history's linear pre-order is stored as an ordered list of rounds:
//! replies in one round arrived simultaneously, earlier rounds strictly
//! before later ones. Initial segments are then exactly the round prefixes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::eval_program;
use crate::structures::{Element, Location, Rename, Renaming, State};
use crate::syntax::{Program, Vocabulary, REPLY_LOCATION_LABEL};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuerySlot {
    Elem(Element),
    Label(String),
}

impl QuerySlot {
    fn is_reply_marker(&self) -> bool {
        matches!(self, QuerySlot::Label(l) if l == REPLY_LOCATION_LABEL)
    }
}

/// A finite tuple over elements and labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query(Vec<QuerySlot>);

/// Serialized as its literal text, e.g. `<q 0 'a'>`.
impl Serialize for Query {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Query {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        crate::parser::parse_query(&text).map_err(|e| serde::de::Error::custom(e.message))
    }
}

impl Query {
    pub fn new(slots: Vec<QuerySlot>) -> Self {
        Query(slots)
    }

    /// A query made of labels only, e.g. `<q0>`.
    pub fn labels(labels: &[&str]) -> Self {
        Query(labels.iter().map(|l| QuerySlot::Label(l.to_string())).collect())
    }

    pub fn slots(&self) -> &[QuerySlot] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_reply_marker(&self) -> bool {
        self.0.iter().any(QuerySlot::is_reply_marker)
    }

    /// Splits at the first `rl`: the query part, and the slots after the
    /// marker if there is one.
    pub fn split_reply_location(&self) -> (Query, Option<&[QuerySlot]>) {
        match self.0.iter().position(QuerySlot::is_reply_marker) {
            Some(i) => (Query(self.0[..i].to_vec()), Some(&self.0[i + 1..])),
            None => (self.clone(), None),
        }
    }

    /// The query that counts as issued when this one is caused.
    pub fn issued_part(&self) -> Query {
        self.split_reply_location().0
    }

    /// The reply location announced after `rl`, if it names a
    /// reply-available dynamic symbol with the right number of arguments.
    pub fn reply_location(&self, vocab: &Vocabulary) -> Option<Location> {
        let (_, rest) = self.split_reply_location();
        let (head, args) = rest?.split_first()?;
        let QuerySlot::Label(f) = head else {
            return None;
        };
        let sig = vocab.get(f)?;
        if !sig.reply_available || sig.arity != args.len() {
            return None;
        }
        let args = args
            .iter()
            .map(|s| match s {
                QuerySlot::Elem(e) => Some(e.clone()),
                QuerySlot::Label(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Location::new(f.clone(), args))
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('<')?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            match s {
                QuerySlot::Elem(e) => write!(f, "{e}")?,
                QuerySlot::Label(l) => f.write_str(l)?,
            }
        }
        f.write_char('>')
    }
}

impl Rename for Query {
    fn rename(&self, r: &Renaming) -> Self {
        Query(
            self.0
                .iter()
                .map(|s| match s {
                    QuerySlot::Elem(e) => QuerySlot::Elem(r.element(e)),
                    label => label.clone(),
                })
                .collect(),
        )
    }
}

pub type QuerySet = BTreeSet<Query>;

/// Replies that arrived simultaneously.
pub type Round = BTreeMap<Query, Element>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("a round must contain at least one reply")]
    EmptyRound,
    #[error("query {0} already has a reply")]
    Duplicate(Query),
    #[error("query {0} contains the reply-location marker")]
    ReplyMarker(Query),
    #[error("query {0} is not in the history")]
    NotInDomain(Query),
}

/// An answer function with a linear pre-order on its domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct History {
    rounds: Vec<Round>,
}

impl History {
    pub fn empty() -> Self {
        History::default()
    }

    pub fn from_rounds(rounds: impl IntoIterator<Item = Round>) -> Result<Self, HistoryError> {
        let mut h = History::empty();
        for r in rounds {
            h.push_round(r)?;
        }
        Ok(h)
    }

    pub fn push_round(&mut self, round: Round) -> Result<(), HistoryError> {
        if round.is_empty() {
            return Err(HistoryError::EmptyRound);
        }
        for q in round.keys() {
            if q.contains_reply_marker() {
                return Err(HistoryError::ReplyMarker(q.clone()));
            }
            if self.contains(q) {
                return Err(HistoryError::Duplicate(q.clone()));
            }
        }
        self.rounds.push(round);
        Ok(())
    }

    pub fn extended(&self, round: Round) -> Result<History, HistoryError> {
        let mut h = self.clone();
        h.push_round(round)?;
        Ok(h)
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn get(&self, q: &Query) -> Option<&Element> {
        self.rounds.iter().find_map(|r| r.get(q))
    }

    pub fn contains(&self, q: &Query) -> bool {
        self.get(q).is_some()
    }

    pub fn round_of(&self, q: &Query) -> Option<usize> {
        self.rounds.iter().position(|r| r.contains_key(q))
    }

    pub fn domain(&self) -> QuerySet {
        self.rounds.iter().flat_map(|r| r.keys().cloned()).collect()
    }

    pub fn domain_len(&self) -> usize {
        self.rounds.iter().map(BTreeMap::len).sum()
    }

    /// The first `k` rounds.
    pub fn prefix(&self, k: usize) -> History {
        History {
            rounds: self.rounds[..k.min(self.rounds.len())].to_vec(),
        }
    }

    /// All initial segments, from the empty history to the whole one.
    pub fn initial_segments(&self) -> Vec<History> {
        (0..=self.rounds.len()).map(|k| self.prefix(k)).collect()
    }

    /// `ξ ↾ (< q)`: the rounds strictly before the round of `q`.
    pub fn restrict_before(&self, q: &Query) -> Result<History, HistoryError> {
        self.round_of(q)
            .map(|k| self.prefix(k))
            .ok_or_else(|| HistoryError::NotInDomain(q.clone()))
    }

    pub fn is_initial_segment_of(&self, other: &History) -> bool {
        self.rounds.len() <= other.rounds.len() && other.rounds[..self.rounds.len()] == self.rounds[..]
    }

    /// `round k: <q> -> v` lines, rounds numbered from 1.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, r) in self.rounds.iter().enumerate() {
            for (q, v) in r {
                let _ = writeln!(out, "round {}: {q} -> {v}", k + 1);
            }
        }
        out
    }

    /// Compact one-line form: `ε` or `{<a> = 1} {<b> = 2, <c> = 0}`.
    pub fn render_compact(&self) -> String {
        if self.rounds.is_empty() {
            return "ε".to_string();
        }
        self.rounds
            .iter()
            .map(|r| {
                let inner = r
                    .iter()
                    .map(|(q, v)| format!("{q} = {v}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("{{{inner}}}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Rename for History {
    fn rename(&self, r: &Renaming) -> Self {
        History {
            rounds: self
                .rounds
                .iter()
                .map(|round| round.iter().map(|(q, v)| (q.rename(r), v.rename(r))).collect())
                .collect(),
        }
    }
}

/// `Issued_X(ξ)`: rl-free queries caused by some initial segment, either
/// directly or as the part before the first `rl` of a caused query.
pub fn issued(program: &Program, state: &State, history: &History) -> QuerySet {
    history
        .initial_segments()
        .iter()
        .flat_map(|eta| eval_program(program, state, eta).caused)
        .map(|q| q.issued_part())
        .collect()
}

pub fn pending(program: &Program, state: &State, history: &History) -> QuerySet {
    issued(program, state, history)
        .into_iter()
        .filter(|q| !history.contains(q))
        .collect()
}

/// Every query in the domain was issued before its reply arrived.
pub fn is_coherent(program: &Program, state: &State, history: &History) -> bool {
    // issued(ξ↾(<q)) depends only on q's round, so compute it once per round
    history.rounds().iter().enumerate().all(|(k, round)| {
        let before = issued(program, state, &history.prefix(k));
        round.keys().all(|q| before.contains(q))
    })
}

pub fn is_complete(program: &Program, state: &State, history: &History) -> bool {
    pending(program, state, history).is_empty()
}

/// Coherent, and no proper initial segment is final.
pub fn is_attainable(program: &Program, state: &State, history: &History) -> bool {
    is_coherent(program, state, history)
        && (0..history.round_count()).all(|k| !eval_program(program, state, &history.prefix(k)).is_final())
}
