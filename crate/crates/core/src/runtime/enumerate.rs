//! Exhaustive search for the final attainable histories of one step.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::eval::{eval_program, Verdict};
use crate::history::{History, Query, QuerySet, Round};
use crate::structures::{render_updates, Element, State, UpdateSet};
use crate::syntax::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_rounds: usize,
    /// Largest number of replies in one round.
    pub max_width: usize,
    /// Histories visited before giving up.
    pub max_nodes: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_rounds: 3,
            max_width: 3,
            max_nodes: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("search exceeded {0} histories")]
    TooManyNodes(usize),
    #[error("reply alphabet is empty")]
    EmptyAlphabet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Enumerated {
    pub history: History,
    pub verdict: Verdict,
    pub updates: UpdateSet,
    pub pending: QuerySet,
}

impl fmt::Display for Enumerated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pending: Vec<String> = self.pending.iter().map(ToString::to_string).collect();
        write!(
            f,
            "{}; {}; updates: {{{}}}; pending: {{{}}}",
            self.history.render_compact(),
            self.verdict,
            render_updates(&self.updates),
            pending.join(", ")
        )
    }
}

/// All final attainable histories reachable within `bounds`, each branch
/// stopping at its first final history. Sorted by number of rounds, then
/// by rendering.
pub fn enumerate_attainable(
    program: &Program,
    state: &State,
    alphabet: &[Element],
    bounds: Bounds,
) -> Result<Vec<Enumerated>, EnumerateError> {
    if alphabet.is_empty() {
        return Err(EnumerateError::EmptyAlphabet);
    }
    let mut search = Search {
        program,
        state,
        alphabet,
        bounds,
        visited: 0,
        found: Vec::new(),
    };
    search.visit(History::empty(), QuerySet::new())?;
    let mut found = search.found;
    found.sort_by_cached_key(|e| (e.history.round_count(), e.to_string()));
    Ok(found)
}

struct Search<'a> {
    program: &'a Program,
    state: &'a State,
    alphabet: &'a [Element],
    bounds: Bounds,
    visited: usize,
    found: Vec<Enumerated>,
}

impl Search<'_> {
    /// `issued_before` is Issued of the proper prefixes of `history`.
    fn visit(&mut self, history: History, issued_before: QuerySet) -> Result<(), EnumerateError> {
        self.visited += 1;
        if self.visited > self.bounds.max_nodes {
            return Err(EnumerateError::TooManyNodes(self.bounds.max_nodes));
        }
        let outcome = eval_program(self.program, self.state, &history);
        let mut issued = issued_before;
        issued.extend(outcome.caused.iter().map(Query::issued_part));
        let pending: QuerySet = issued.iter().filter(|q| !history.contains(q)).cloned().collect();
        if outcome.is_final() {
            self.found.push(Enumerated {
                history,
                verdict: outcome.verdict,
                updates: outcome.updates,
                pending,
            });
            return Ok(());
        }
        if history.round_count() >= self.bounds.max_rounds {
            return Ok(());
        }
        let pending: Vec<Query> = pending.into_iter().collect();
        for round in rounds(&pending, self.alphabet, self.bounds.max_width) {
            let next = history.extended(round).expect("rounds use fresh pending queries");
            self.visit(next, issued.clone())?;
        }
        Ok(())
    }
}

/// Every nonempty assignment of alphabet values to at most `width` of the
/// queries.
fn rounds(queries: &[Query], alphabet: &[Element], width: usize) -> Vec<Round> {
    let mut out = Vec::new();
    let n = queries.len();
    for mask in 1u64..(1u64 << n) {
        let chosen: Vec<&Query> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &queries[i]).collect();
        if chosen.len() > width {
            continue;
        }
        let mut counters = vec![0usize; chosen.len()];
        loop {
            out.push(
                chosen
                    .iter()
                    .zip(&counters)
                    .map(|(q, &c)| ((*q).clone(), alphabet[c].clone()))
                    .collect(),
            );
            let mut k = 0;
            while k < counters.len() {
                counters[k] += 1;
                if counters[k] < alphabet.len() {
                    break;
                }
                counters[k] = 0;
                k += 1;
            }
            if k == counters.len() {
                break;
            }
        }
    }
    out
}
