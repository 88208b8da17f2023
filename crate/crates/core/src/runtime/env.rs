//! Environment models: who answers the machine's queries, and when.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::history::{Query, QuerySet, Round};
use crate::structures::Element;

use super::scenario::{Scenario, Timing};

pub trait Environment {
    /// The next round of replies in `step`, drawn from `pending`. An empty
    /// round means nothing more will be answered in this step.
    fn next_round(&mut self, step: usize, pending: &QuerySet) -> Round;

    /// Late replies available at the boundary after `step` for the given
    /// awaiting persistent queries, earliest-precedence first.
    fn late_replies(&mut self, step: usize, awaiting: &[Query]) -> Vec<(Query, Element)>;

    /// Diagnostics accumulated since the last call.
    fn take_warnings(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// Never answers anything.
pub struct SilentEnv;

impl Environment for SilentEnv {
    fn next_round(&mut self, _: usize, _: &QuerySet) -> Round {
        Round::new()
    }

    fn late_replies(&mut self, _: usize, _: &[Query]) -> Vec<(Query, Element)> {
        Vec::new()
    }
}

/// Plays a scenario file. Directive order breaks ties.
pub struct ScenarioEnv {
    scenario: Scenario,
    consumed: BTreeSet<usize>,
    warnings: Vec<String>,
}

impl ScenarioEnv {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioEnv {
            scenario,
            consumed: BTreeSet::new(),
            warnings: Vec::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }
}

impl Environment for ScenarioEnv {
    /// Takes the lowest-numbered unplayed round of `step` that answers at
    /// least one pending query. Directives of skipped rounds are dropped.
    fn next_round(&mut self, step: usize, pending: &QuerySet) -> Round {
        let mut rounds: Vec<usize> = self
            .scenario
            .within_step(step)
            .filter(|(i, _)| !self.consumed.contains(i))
            .filter_map(|(_, d)| match d.timing {
                Timing::WithinStep { round, .. } => Some(round),
                Timing::AfterStep(_) => None,
            })
            .collect();
        rounds.sort_unstable();
        rounds.dedup();
        for r in rounds {
            let group: Vec<usize> = self
                .scenario
                .within_step(step)
                .filter(|(_, d)| matches!(d.timing, Timing::WithinStep { round, .. } if round == r))
                .map(|(i, _)| i)
                .collect();
            let mut out = Round::new();
            for i in group {
                self.consumed.insert(i);
                let d = &self.scenario.directives[i];
                if pending.contains(&d.query) {
                    out.insert(d.query.clone(), d.reply.clone());
                } else {
                    self.warnings.push(format!("`{d}` ignored: {} is not pending", d.query));
                }
            }
            if !out.is_empty() {
                return out;
            }
        }
        Round::new()
    }

    fn late_replies(&mut self, step: usize, awaiting: &[Query]) -> Vec<(Query, Element)> {
        let mut out = Vec::new();
        for (i, d) in self.scenario.directives.iter().enumerate() {
            if self.consumed.contains(&i) {
                continue;
            }
            if matches!(d.timing, Timing::AfterStep(k) if k <= step) && awaiting.contains(&d.query) {
                self.consumed.insert(i);
                out.push((d.query.clone(), d.reply.clone()));
            }
        }
        out
    }

    fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }
}

/// Answers a random nonempty subset of the pending queries in every round,
/// and each awaiting persistent query at a boundary with probability 1/2.
pub struct RandomEnv {
    rng: ChaCha8Rng,
    alphabet: Vec<Element>,
}

impl RandomEnv {
    /// `alphabet` must be nonempty.
    pub fn new(seed: u64, alphabet: Vec<Element>) -> Self {
        assert!(!alphabet.is_empty(), "reply alphabet is empty");
        RandomEnv {
            rng: ChaCha8Rng::seed_from_u64(seed),
            alphabet,
        }
    }

    fn value(&mut self, defined: bool) -> Option<Element> {
        let choices: Vec<&Element> = self
            .alphabet
            .iter()
            .filter(|e| !defined || **e != Element::Undef)
            .collect();
        choices.choose(&mut self.rng).map(|e| (*e).clone())
    }
}

impl Environment for RandomEnv {
    fn next_round(&mut self, _: usize, pending: &QuerySet) -> Round {
        let queries: Vec<&Query> = pending.iter().collect();
        if queries.is_empty() {
            return Round::new();
        }
        let mut round = Round::new();
        let first = self.rng.gen_range(0..queries.len());
        for (i, q) in queries.iter().enumerate() {
            if i == first || self.rng.gen_bool(0.5) {
                if let Some(v) = self.value(false) {
                    round.insert((*q).clone(), v);
                }
            }
        }
        round
    }

    fn late_replies(&mut self, _: usize, awaiting: &[Query]) -> Vec<(Query, Element)> {
        let mut out = Vec::new();
        for q in awaiting {
            if self.rng.gen_bool(0.5) {
                if let Some(v) = self.value(true) {
                    out.push((q.clone(), v));
                }
            }
        }
        out
    }
}
