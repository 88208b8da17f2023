//! The session state machine shared by scripted runs and the stepper
//! service.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{eval_program, RuleOutcome, Verdict};
use crate::history::{is_attainable, History, HistoryError, Query, QuerySet, Round};
use crate::structures::{Element, Location, State, StructureError, Update, UpdateSet};
use crate::syntax::{Program, HALT};

use super::env::Environment;
use super::registry::{Registry, RegistryEntry};
use super::trace::{Event, RunEnd, StepVerdict, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_steps: usize,
    pub max_rounds: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 100,
            max_rounds: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "end", rename_all = "snake_case")]
pub enum Phase {
    /// Between steps; deliveries may be made before the next step starts.
    Boundary,
    InStep,
    Ended(RunEnd),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("empty reply round")]
    EmptyRound,
    #[error("{0} is not pending")]
    NotPending(Query),
    #[error("{0} is not an element of the state")]
    UnknownElement(Element),
    #[error("reply to persistent query {0} must not be undef")]
    UndefReply(Query),
    #[error("{0} is not an awaiting persistent query")]
    NotAwaiting(Query),
    #[error("no reply available for {0}")]
    NoReply(Query),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: usize,
    pub final_history: History,
    pub verdict: StepVerdict,
    pub updates: UpdateSet,
    pub issued_with_locations: Vec<(Query, Location)>,
}

/// Snapshot for clients of the stepper service.
#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub step: usize,
    pub round: usize,
    #[serde(flatten)]
    pub phase: Phase,
    pub pending: Vec<Query>,
    pub history: History,
    pub registry: Vec<RegistryEntry>,
    pub state: String,
    pub warnings: Vec<String>,
}

pub struct Machine {
    program: Arc<Program>,
    state: State,
    registry: Registry,
    limits: Limits,
    step: usize,
    history: History,
    outcome: Option<RuleOutcome>,
    issued: QuerySet,
    issued_pairs: BTreeSet<(Query, Option<Location>)>,
    phase: Phase,
    trace: Trace,
    warnings: Vec<String>,
    steps: Vec<StepResult>,
}

impl Machine {
    pub fn new(program: Arc<Program>, state: State, limits: Limits) -> Self {
        Machine {
            program,
            state,
            registry: Registry::new(),
            limits,
            step: 0,
            history: History::empty(),
            outcome: None,
            issued: QuerySet::new(),
            issued_pairs: BTreeSet::new(),
            phase: Phase::Boundary,
            trace: Trace::default(),
            warnings: Vec::new(),
            steps: Vec::new(),
        }
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.program
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn steps(&self) -> &[StepResult] {
        &self.steps
    }

    pub fn into_parts(self) -> (Trace, State, Vec<StepResult>, Vec<String>) {
        (self.trace, self.state, self.steps, self.warnings)
    }

    /// Issued queries of the current step still lacking a reply.
    pub fn pending(&self) -> QuerySet {
        self.issued
            .iter()
            .filter(|q| !self.history.contains(q))
            .cloned()
            .collect()
    }

    pub fn status(&self) -> Status {
        Status {
            step: self.step,
            round: self.history.round_count(),
            phase: self.phase,
            pending: self.pending().into_iter().collect(),
            history: self.history.clone(),
            registry: self.registry.entries().cloned().collect(),
            state: self.state.dump(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn expect_phase(&self, phase: Phase) -> Result<(), RuntimeError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(RuntimeError::WrongPhase(self.phase))
        }
    }

    fn end(&mut self, end: RunEnd) {
        self.trace.push(Event::End { end });
        self.phase = Phase::Ended(end);
    }

    fn halted(&self) -> bool {
        self.state
            .lookup(HALT, &[])
            .map(|v| v == Element::True)
            .unwrap_or(false)
    }

    /// Starts the next step from the empty history, or ends the run if
    /// `Halt` holds or the step budget is spent.
    pub fn begin_step(&mut self) -> Result<(), RuntimeError> {
        self.expect_phase(Phase::Boundary)?;
        if self.halted() {
            self.end(RunEnd::Halted);
            return Ok(());
        }
        if self.step >= self.limits.max_steps {
            self.end(RunEnd::Limit);
            return Ok(());
        }
        self.step += 1;
        self.history = History::empty();
        self.issued.clear();
        self.issued_pairs.clear();
        self.phase = Phase::InStep;
        self.trace.push(Event::StepStart { step: self.step });
        self.settle()
    }

    /// Evaluates the rule under the current history, records what it
    /// issued, and ends the step if the history is final.
    fn settle(&mut self) -> Result<(), RuntimeError> {
        let outcome = eval_program(&self.program, &self.state, &self.history);
        let mut fresh: BTreeMap<Query, Vec<Location>> = BTreeMap::new();
        for q in &outcome.caused {
            let base = q.issued_part();
            let loc = q.reply_location(self.program.vocabulary());
            if !self.issued_pairs.insert((base.clone(), loc.clone())) {
                continue;
            }
            let new_query = self.issued.insert(base.clone());
            if let Some(loc) = loc {
                self.registry.record(&base, loc.clone(), self.step);
                fresh.entry(base).or_default().push(loc);
            } else if new_query {
                fresh.entry(base).or_default();
            }
        }
        for (query, locations) in fresh {
            self.trace.push(Event::Issued { query, locations });
        }
        let is_final = outcome.is_final();
        self.outcome = Some(outcome);
        if is_final {
            self.end_step()
        } else if self.history.round_count() >= self.limits.max_rounds {
            self.end(RunEnd::Limit);
            Ok(())
        } else {
            Ok(())
        }
    }

    /// Appends one round of simultaneous replies to the current step.
    pub fn post_round(&mut self, round: Round) -> Result<(), RuntimeError> {
        self.expect_phase(Phase::InStep)?;
        if round.is_empty() {
            return Err(RuntimeError::EmptyRound);
        }
        let pending = self.pending();
        for (q, v) in &round {
            if !pending.contains(q) {
                return Err(RuntimeError::NotPending(q.clone()));
            }
            if !self.state.contains(v) {
                return Err(RuntimeError::UnknownElement(v.clone()));
            }
            if *v == Element::Undef && self.registry.is_persistent(q) {
                return Err(RuntimeError::UndefReply(q.clone()));
            }
        }
        self.history.push_round(round.clone())?;
        for (q, v) in &round {
            self.registry.answer(q, v.clone(), self.step);
        }
        self.trace.push(Event::round(self.history.round_count(), &round));
        self.settle()
    }

    /// The environment will answer nothing more in this step.
    pub fn declare_stuck(&mut self) -> Result<(), RuntimeError> {
        self.expect_phase(Phase::InStep)?;
        self.trace
            .push(Event::step_end(self.step, StepVerdict::Stuck, &UpdateSet::new()));
        self.record_step(StepVerdict::Stuck, UpdateSet::new());
        self.end(RunEnd::Stuck);
        Ok(())
    }

    fn record_step(&mut self, verdict: StepVerdict, updates: UpdateSet) {
        let issued_with_locations = self
            .issued_pairs
            .iter()
            .filter_map(|(q, l)| l.clone().map(|l| (q.clone(), l)))
            .collect();
        self.steps.push(StepResult {
            step: self.step,
            final_history: self.history.clone(),
            verdict,
            updates,
            issued_with_locations,
        });
    }

    fn end_step(&mut self) -> Result<(), RuntimeError> {
        let outcome = self.outcome.take().expect("step has been evaluated");
        assert!(
            is_attainable(&self.program, &self.state, &self.history),
            "step {} ended on a history that is not attainable",
            self.step
        );
        match outcome.verdict {
            Verdict::Success => {
                self.trace
                    .push(Event::step_end(self.step, StepVerdict::Success, &outcome.updates));
                self.state = self.state.apply_updates(&outcome.updates)?;
                self.record_step(StepVerdict::Success, outcome.updates);
                self.phase = Phase::Boundary;
            }
            Verdict::Fail => {
                self.trace
                    .push(Event::step_end(self.step, StepVerdict::Fail, &outcome.updates));
                self.record_step(StepVerdict::Fail, outcome.updates);
                self.end(RunEnd::Failed);
            }
            Verdict::NotFinal => unreachable!("end_step on a non-final history"),
        }
        Ok(())
    }

    /// Writes replies into reply locations at the boundary after a step:
    /// first the on-time replies of the step, then `late` in order. When
    /// two replies target one location the first one wins.
    pub fn boundary(&mut self, late: Vec<(Query, Element)>) -> Result<(), RuntimeError> {
        self.expect_phase(Phase::Boundary)?;
        let mut deliveries: Vec<(Query, Element)> = self
            .registry
            .answered()
            .map(|(e, v)| (e.query.clone(), v.clone()))
            .collect();
        let mut seen: BTreeSet<Query> = deliveries.iter().map(|(q, _)| q.clone()).collect();
        for (q, v) in late {
            let awaiting = self.registry.awaiting().any(|e| e.query == q);
            if !awaiting || !seen.insert(q.clone()) {
                return Err(RuntimeError::NotAwaiting(q));
            }
            if v == Element::Undef {
                return Err(RuntimeError::UndefReply(q));
            }
            if !self.state.contains(&v) {
                return Err(RuntimeError::UnknownElement(v));
            }
            deliveries.push((q, v));
        }
        let mut writes: BTreeMap<Location, (Query, Element)> = BTreeMap::new();
        let mut events = Vec::new();
        let mut dropped = Vec::new();
        for (q, v) in &deliveries {
            let entry = self.registry.get(q).expect("delivery for a registered query");
            for loc in &entry.locations {
                if let Some((winner, w)) = writes.get(loc) {
                    if w != v {
                        dropped.push(format!("{q} -> {loc} = {v} dropped; {winner} wrote {w} first"));
                    }
                    continue;
                }
                writes.insert(loc.clone(), (q.clone(), v.clone()));
                events.push(Event::LateDelivery {
                    query: q.clone(),
                    location: loc.clone(),
                    value: v.clone(),
                });
            }
        }
        let updates: UpdateSet = writes
            .iter()
            .map(|(loc, (_, v))| Update::new(loc.clone(), v.clone()))
            .collect();
        self.state = self.state.apply_updates(&updates)?;
        for (q, v) in deliveries {
            self.registry.mark_delivered(&q, v, self.step);
        }
        for e in events {
            self.trace.push(e);
        }
        for msg in dropped {
            self.warn(msg);
        }
        Ok(())
    }

    /// Runs the current step to its end against `env`.
    pub fn run_step(&mut self, env: &mut dyn Environment) -> Result<(), RuntimeError> {
        self.begin_step()?;
        while self.phase == Phase::InStep {
            let round = env.next_round(self.step, &self.pending());
            for w in env.take_warnings() {
                self.warn(w);
            }
            if round.is_empty() {
                self.declare_stuck()?;
            } else {
                self.post_round(round)?;
            }
        }
        Ok(())
    }

    /// Boundary deliveries requested from `env` for awaiting queries.
    pub fn deliver_late_replies(&mut self, env: &mut dyn Environment) -> Result<(), RuntimeError> {
        let awaiting: Vec<Query> = self.registry.awaiting().map(|e| e.query.clone()).collect();
        let late = env.late_replies(self.step, &awaiting);
        self.boundary(late)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: Trace,
    pub final_state: State,
    pub steps: Vec<StepResult>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn end(&self) -> RunEnd {
        self.trace.end().expect("finished runs end with an end event")
    }
}

/// Alternates steps and boundaries until the run ends.
pub fn run(
    program: Arc<Program>,
    state: State,
    env: &mut dyn Environment,
    limits: Limits,
) -> Result<RunReport, RuntimeError> {
    let mut m = Machine::new(program, state, limits);
    loop {
        m.run_step(env)?;
        if matches!(m.phase(), Phase::Ended(_)) {
            break;
        }
        m.deliver_late_replies(env)?;
    }
    let (trace, final_state, steps, warnings) = m.into_parts();
    Ok(RunReport {
        trace,
        final_state,
        steps,
        warnings,
    })
}
