//! Scripted environment behaviour read from `.env` files.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::history::Query;
use crate::structures::Element;
use crate::syntax::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Timing {
    /// Answer inside the step, as part of the given round.
    WithinStep { step: usize, round: usize },
    /// Late reply, available at the boundary after the given step.
    AfterStep(usize),
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timing::WithinStep { step, round } => write!(f, "step {step} round {round}"),
            Timing::AfterStep(k) => write!(f, "afterstep {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub query: Query,
    pub reply: Element,
    pub timing: Timing,
    pub span: Span,
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "when {} reply {} {}", self.query, self.reply, self.timing)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub directives: Vec<Directive>,
}

impl Scenario {
    pub fn empty() -> Self {
        Scenario::default()
    }

    /// Directives answering within `step`, in file order.
    pub fn within_step(&self, step: usize) -> impl Iterator<Item = (usize, &Directive)> {
        self.directives
            .iter()
            .enumerate()
            .filter(move |(_, d)| matches!(d.timing, Timing::WithinStep { step: s, .. } if s == step))
    }

    /// The late reply for `query` that is due once `step` has ended.
    pub fn due_after(&self, query: &Query, step: usize) -> Option<(usize, &Directive)> {
        self.directives
            .iter()
            .enumerate()
            .find(|(_, d)| &d.query == query && matches!(d.timing, Timing::AfterStep(k) if k <= step))
    }
}
