//! Values, q-values, caused queries, finality and update sets of terms,
//! guards and rules under a state and a history.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{History, Query, QuerySet};
use crate::structures::{has_clash, Element, Location, Rename, Renaming, State, StructureError, Update, UpdateSet};
use crate::syntax::{instantiate_template, Guard, Head, Program, Rule, Term, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermOutcome {
    pub value: Option<Element>,
    /// Present for query-terms whose arguments all have values.
    pub qvalue: Option<Query>,
    pub caused: QuerySet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardOutcome {
    pub value: Option<bool>,
    pub caused: QuerySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    NotFinal,
    Success,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NotFinal => "notfinal",
            Verdict::Success => "success",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleOutcome {
    pub caused: QuerySet,
    pub verdict: Verdict,
    pub updates: UpdateSet,
    pub clash: bool,
}

impl RuleOutcome {
    pub fn is_final(&self) -> bool {
        self.verdict != Verdict::NotFinal
    }

    fn not_final(caused: QuerySet) -> Self {
        RuleOutcome {
            caused,
            verdict: Verdict::NotFinal,
            updates: UpdateSet::new(),
            clash: false,
        }
    }
}

impl Rename for TermOutcome {
    fn rename(&self, r: &Renaming) -> Self {
        TermOutcome {
            value: self.value.as_ref().map(|v| v.rename(r)),
            qvalue: self.qvalue.as_ref().map(|q| q.rename(r)),
            caused: self.caused.rename(r),
        }
    }
}

impl Rename for GuardOutcome {
    fn rename(&self, r: &Renaming) -> Self {
        GuardOutcome {
            value: self.value,
            caused: self.caused.rename(r),
        }
    }
}

impl Rename for RuleOutcome {
    fn rename(&self, r: &Renaming) -> Self {
        RuleOutcome {
            caused: self.caused.rename(r),
            verdict: self.verdict,
            updates: self.updates.rename(r),
            clash: self.clash,
        }
    }
}

/// Evaluates program fragments against one state and one history.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    vocab: &'a Vocabulary,
    state: &'a State,
    history: &'a History,
}

impl<'a> Evaluator<'a> {
    pub fn new(program: &'a Program, state: &'a State, history: &'a History) -> Self {
        Evaluator {
            vocab: program.vocabulary(),
            state,
            history,
        }
    }

    fn with_history<'b>(&self, history: &'b History) -> Evaluator<'b>
    where
        'a: 'b,
    {
        Evaluator {
            vocab: self.vocab,
            state: self.state,
            history,
        }
    }

    /// Values of `args`, or the union of queries caused by the undefined ones.
    fn args(&self, args: &[Term]) -> Result<Vec<Element>, QuerySet> {
        let mut values = Vec::with_capacity(args.len());
        let mut caused = QuerySet::new();
        let mut undefined = false;
        for a in args {
            let out = self.term(a);
            match out.value {
                Some(v) => values.push(v),
                None => {
                    undefined = true;
                    caused.extend(out.caused);
                }
            }
        }
        if undefined {
            Err(caused)
        } else {
            Ok(values)
        }
    }

    /// The q-value a query-term would have from the given argument values.
    fn query_for(&self, symbol: &str, values: &[Element]) -> Query {
        let template = self
            .vocab
            .template(symbol)
            .unwrap_or_else(|| panic!("external `{symbol}` has no template"));
        instantiate_template(template, values).expect("template arity checked at declaration")
    }

    pub fn term(&self, term: &Term) -> TermOutcome {
        let values = match self.args(&term.args) {
            Ok(v) => v,
            Err(caused) => {
                return TermOutcome {
                    value: None,
                    qvalue: None,
                    caused,
                }
            }
        };
        match &term.head {
            Head::Literal(e) => TermOutcome {
                value: Some(e.clone()),
                qvalue: None,
                caused: QuerySet::new(),
            },
            Head::State(f) => {
                let value = self
                    .state
                    .lookup(f, &values)
                    .unwrap_or_else(|e| panic!("ill-formed term: {e}"));
                TermOutcome {
                    value: Some(value),
                    qvalue: None,
                    caused: QuerySet::new(),
                }
            }
            Head::External(g) => {
                let q = self.query_for(g, &values);
                // a reply to <q rl l> is a reply to q
                match self.history.get(&q.issued_part()) {
                    Some(v) => TermOutcome {
                        value: Some(v.clone()),
                        qvalue: Some(q),
                        caused: QuerySet::new(),
                    },
                    None => TermOutcome {
                        value: None,
                        qvalue: Some(q.clone()),
                        caused: [q].into(),
                    },
                }
            }
            Head::ReplyLocation => {
                panic!("reply-location sugar reached the evaluator; desugar the program first")
            }
        }
    }

    pub fn guard(&self, guard: &Guard) -> GuardOutcome {
        match guard {
            Guard::Term(t) => {
                let out = self.term(t);
                GuardOutcome {
                    value: out.value.map(|v| v == Element::True),
                    caused: out.caused,
                }
            }
            Guard::Timing { earlier, later, .. } => {
                let s = self.term(earlier);
                let t = self.term(later);
                let value = match (&s.value, &t.value) {
                    (Some(_), Some(_)) => Some(self.history.initial_segments().iter().all(|eta| {
                        let ev = self.with_history(eta);
                        ev.term(later).value.is_none() || ev.term(earlier).value.is_some()
                    })),
                    (Some(_), None) => Some(true),
                    (None, Some(_)) => Some(false),
                    (None, None) => None,
                };
                let caused = if value.is_some() {
                    QuerySet::new()
                } else {
                    s.caused.into_iter().chain(t.caused).collect()
                };
                GuardOutcome { value, caused }
            }
            Guard::And(a, b) => self.kleene(a, b, false),
            Guard::Or(a, b) => self.kleene(a, b, true),
            Guard::Not(g) => {
                let out = self.guard(g);
                GuardOutcome {
                    value: out.value.map(|v| !v),
                    caused: out.caused,
                }
            }
        }
    }

    /// Strong Kleene connective; `dominant` is the value that decides it
    /// (false for conjunction, true for disjunction).
    fn kleene(&self, a: &Guard, b: &Guard, dominant: bool) -> GuardOutcome {
        let x = self.guard(a);
        let y = self.guard(b);
        match (x.value, y.value) {
            (Some(u), _) if u == dominant => decided(dominant),
            (_, Some(v)) if v == dominant => decided(dominant),
            (Some(_), Some(_)) => decided(!dominant),
            (Some(_), None) => GuardOutcome {
                value: None,
                caused: y.caused,
            },
            (None, Some(_)) => GuardOutcome {
                value: None,
                caused: x.caused,
            },
            (None, None) => GuardOutcome {
                value: None,
                caused: x.caused.into_iter().chain(y.caused).collect(),
            },
        }
    }

    pub fn rule(&self, rule: &Rule) -> RuleOutcome {
        match rule {
            Rule::Update {
                symbol, args, value, ..
            } => {
                let mut all = args.to_vec();
                all.push(value.clone());
                match self.args(&all) {
                    Ok(mut values) => {
                        let v = values.pop().expect("value term present");
                        RuleOutcome {
                            caused: QuerySet::new(),
                            verdict: Verdict::Success,
                            updates: [Update::new(Location::new(symbol.clone(), values), v)].into(),
                            clash: false,
                        }
                    }
                    Err(caused) => RuleOutcome::not_final(caused),
                }
            }
            Rule::Issue { term, .. } => {
                let symbol = term.symbol().expect("issue argument is a query-term");
                match self.args(&term.args) {
                    Ok(values) => {
                        let q = self.query_for(symbol, &values);
                        let caused = if self.history.contains(&q.issued_part()) {
                            QuerySet::new()
                        } else {
                            [q].into()
                        };
                        RuleOutcome {
                            caused,
                            verdict: Verdict::Success,
                            updates: UpdateSet::new(),
                            clash: false,
                        }
                    }
                    Err(caused) => RuleOutcome::not_final(caused),
                }
            }
            Rule::Fail { .. } => RuleOutcome {
                caused: QuerySet::new(),
                verdict: Verdict::Fail,
                updates: UpdateSet::new(),
                clash: false,
            },
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
                ..
            } => {
                let g = self.guard(guard);
                match g.value {
                    None => RuleOutcome::not_final(g.caused),
                    Some(true) => self.rule(then_branch),
                    Some(false) => self.rule(else_branch),
                }
            }
            Rule::Par { rules, .. } => {
                let outs: Vec<RuleOutcome> = rules.iter().map(|r| self.rule(r)).collect();
                let caused: QuerySet = outs.iter().flat_map(|o| o.caused.iter().cloned()).collect();
                let updates: UpdateSet = outs.iter().flat_map(|o| o.updates.iter().cloned()).collect();
                let clash = has_clash(&updates);
                let all_final = outs.iter().all(RuleOutcome::is_final);
                let verdict = if !all_final {
                    Verdict::NotFinal
                } else if clash || outs.iter().any(|o| o.verdict == Verdict::Fail) {
                    Verdict::Fail
                } else {
                    Verdict::Success
                };
                RuleOutcome {
                    caused,
                    verdict,
                    updates,
                    clash,
                }
            }
        }
    }
}

fn decided(value: bool) -> GuardOutcome {
    GuardOutcome {
        value: Some(value),
        caused: QuerySet::new(),
    }
}

pub fn eval_term(program: &Program, term: &Term, state: &State, history: &History) -> TermOutcome {
    Evaluator::new(program, state, history).term(term)
}

pub fn eval_guard(program: &Program, guard: &Guard, state: &State, history: &History) -> GuardOutcome {
    Evaluator::new(program, state, history).guard(guard)
}

pub fn eval_rule(program: &Program, rule: &Rule, state: &State, history: &History) -> RuleOutcome {
    Evaluator::new(program, state, history).rule(rule)
}

/// Outcome of the program's underlying rule.
pub fn eval_program(program: &Program, state: &State, history: &History) -> RuleOutcome {
    eval_rule(program, program.rule(), state, history)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuccessorError {
    #[error("successor requested for a history that is {0}")]
    NotSuccessful(Verdict),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// `τ(X, ξ)`: the state after applying a successful outcome's updates.
pub fn successor(state: &State, outcome: &RuleOutcome) -> Result<State, SuccessorError> {
    if outcome.verdict != Verdict::Success {
        return Err(SuccessorError::NotSuccessful(outcome.verdict));
    }
    Ok(state.apply_updates(&outcome.updates)?)
}
