//! Run traces, as text lines or JSON.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::history::{Query, Round};
use crate::structures::{Element, Location, UpdateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVerdict {
    Success,
    Fail,
    Stuck,
}

impl fmt::Display for StepVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepVerdict::Success => "success",
            StepVerdict::Fail => "fail",
            StepVerdict::Stuck => "stuck",
        })
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunEnd {
    Halted,
    Failed,
    Stuck,
    Limit,
}

impl RunEnd {
    pub fn exit_code(self) -> i32 {
        match self {
            RunEnd::Halted => 0,
            RunEnd::Failed => 2,
            RunEnd::Stuck => 3,
            RunEnd::Limit => 4,
        }
    }
}

impl fmt::Display for RunEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunEnd::Halted => "HALTED",
            RunEnd::Failed => "FAILED",
            RunEnd::Stuck => "STUCK",
            RunEnd::Limit => "LIMIT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    StepStart {
        step: usize,
    },
    Issued {
        query: Query,
        locations: Vec<Location>,
    },
    Round {
        round: usize,
        replies: Vec<(Query, Element)>,
    },
    StepEnd {
        step: usize,
        verdict: StepVerdict,
        updates: Vec<String>,
    },
    LateDelivery {
        query: Query,
        location: Location,
        value: Element,
    },
    End {
        end: RunEnd,
    },
}

impl Event {
    pub fn round(index: usize, round: &Round) -> Event {
        Event::Round {
            round: index,
            replies: round.iter().map(|(q, v)| (q.clone(), v.clone())).collect(),
        }
    }

    pub fn step_end(step: usize, verdict: StepVerdict, updates: &UpdateSet) -> Event {
        Event::StepEnd {
            step,
            verdict,
            updates: updates.iter().map(ToString::to_string).collect(),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::StepStart { step } => write!(f, "STEP {step} BEGIN"),
            Event::Issued { query, locations } => {
                write!(f, "ISSUED {query}")?;
                if !locations.is_empty() {
                    let locs: Vec<String> = locations.iter().map(ToString::to_string).collect();
                    write!(f, " -> {}", locs.join(", "))?;
                }
                Ok(())
            }
            Event::Round { round, replies } => {
                let parts: Vec<String> = replies.iter().map(|(q, v)| format!("{q} = {v}")).collect();
                write!(f, "ROUND {round}: {}", parts.join(", "))
            }
            Event::StepEnd { step, verdict, updates } => {
                write!(f, "STEP {step} END {verdict}; updates:")?;
                if !updates.is_empty() {
                    write!(f, " {}", updates.join(","))?;
                }
                Ok(())
            }
            Event::LateDelivery { query, location, value } => write!(f, "LATE {query} -> {location} = {value}"),
            Event::End { end } => write!(f, "{end}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn push(&mut self, e: Event) {
        log::debug!("{e}");
        self.events.push(e);
    }

    pub fn end(&self) -> Option<RunEnd> {
        match self.events.last() {
            Some(Event::End { end }) => Some(*end),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
