//! Where caused queries come from: origins of a query in a term, guard or
//! rule, and the syntactic classification of query-term occurrences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eval::Evaluator;
use crate::history::{History, Query};
use crate::structures::State;
use crate::syntax::{Diagnostic, Guard, Head, NodeId, Program, Rule, Term};

pub type OriginSet = BTreeSet<NodeId>;

/// Occurrence context of a query-term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextClass {
    /// Anywhere inside either operand of a timing guard.
    TimingSubterm,
    /// Anywhere inside an operand of a Kleene connective.
    KleeneSubterm,
    /// The argument of an `issue` rule.
    IssueArgument,
    BlockingContext,
}

impl ContextClass {
    pub fn is_blocking(self) -> bool {
        self == ContextClass::BlockingContext
    }
}

impl fmt::Display for ContextClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextClass::TimingSubterm => "timing-subterm",
            ContextClass::KleeneSubterm => "kleene-subterm",
            ContextClass::IssueArgument => "issue-argument",
            ContextClass::BlockingContext => "blocking",
        })
    }
}

/// A program fragment that can be asked for origins.
#[derive(Clone, Copy)]
pub enum Node<'p> {
    Term(&'p Term),
    Guard(&'p Guard),
    Rule(&'p Rule),
}

/// Computes origins under a fixed state and history.
pub struct OriginFinder<'a> {
    ev: Evaluator<'a>,
}

impl<'a> OriginFinder<'a> {
    pub fn new(program: &'a Program, state: &'a State, history: &'a History) -> Self {
        OriginFinder {
            ev: Evaluator::new(program, state, history),
        }
    }

    pub fn node(&self, q: &Query, node: Node<'_>) -> OriginSet {
        let mut out = OriginSet::new();
        match node {
            Node::Term(t) => self.term(q, t, &mut out),
            Node::Guard(g) => self.guard(q, g, &mut out),
            Node::Rule(r) => self.rule(q, r, &mut out),
        }
        out
    }

    fn causes_term(&self, q: &Query, t: &Term) -> bool {
        self.ev.term(t).caused.contains(q)
    }

    fn term(&self, q: &Query, t: &Term, out: &mut OriginSet) {
        if !self.causes_term(q, t) {
            return;
        }
        self.args_or_self(q, t, out);
    }

    /// Origins among undefined arguments, or the term itself when all
    /// arguments have values.
    fn args_or_self(&self, q: &Query, t: &Term, out: &mut OriginSet) {
        if t.args.iter().all(|a| self.ev.term(a).value.is_some()) {
            out.insert(t.id);
        } else {
            for a in &t.args {
                self.term(q, a, out);
            }
        }
    }

    fn guard(&self, q: &Query, g: &Guard, out: &mut OriginSet) {
        if !self.ev.guard(g).caused.contains(q) {
            return;
        }
        match g {
            Guard::Term(t) => self.term(q, t, out),
            Guard::Timing { earlier, later, .. } => {
                self.term(q, earlier, out);
                self.term(q, later, out);
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                self.guard(q, a, out);
                self.guard(q, b, out);
            }
            Guard::Not(inner) => self.guard(q, inner, out),
        }
    }

    fn rule(&self, q: &Query, r: &Rule, out: &mut OriginSet) {
        if !self.ev.rule(r).caused.contains(q) {
            return;
        }
        match r {
            Rule::Update { args, value, .. } => {
                for t in args.iter().chain(std::iter::once(value)) {
                    self.term(q, t, out);
                }
            }
            Rule::Issue { term, .. } => self.args_or_self(q, term, out),
            Rule::Fail { .. } => {}
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
                ..
            } => match self.ev.guard(guard).value {
                None => self.guard(q, guard, out),
                Some(true) => self.rule(q, then_branch, out),
                Some(false) => self.rule(q, else_branch, out),
            },
            Rule::Par { rules, .. } => {
                for r in rules {
                    self.rule(q, r, out);
                }
            }
        }
    }
}

/// Origins of `q` in the program's rule.
pub fn origins(program: &Program, q: &Query, state: &State, history: &History) -> OriginSet {
    OriginFinder::new(program, state, history).node(q, Node::Rule(program.rule()))
}

/// Labels every query-term occurrence of the program with its context.
/// Timing beats Kleene when they nest.
pub fn classify_occurrence_contexts(program: &Program) -> BTreeMap<NodeId, ContextClass> {
    let mut out = BTreeMap::new();
    classify_rule(program.rule(), &mut out);
    out
}

fn classify_rule(r: &Rule, out: &mut BTreeMap<NodeId, ContextClass>) {
    match r {
        Rule::Update { args, value, .. } => {
            for t in args.iter().chain(std::iter::once(value)) {
                mark(t, ContextClass::BlockingContext, out);
            }
        }
        Rule::Issue { term, .. } => {
            for a in &term.args {
                mark(a, ContextClass::BlockingContext, out);
            }
            if term.is_query_term() {
                out.insert(term.id, ContextClass::IssueArgument);
            }
        }
        Rule::Fail { .. } => {}
        Rule::Cond {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            classify_guard(guard, None, out);
            classify_rule(then_branch, out);
            classify_rule(else_branch, out);
        }
        Rule::Par { rules, .. } => rules.iter().for_each(|r| classify_rule(r, out)),
    }
}

fn classify_guard(g: &Guard, inherited: Option<ContextClass>, out: &mut BTreeMap<NodeId, ContextClass>) {
    match g {
        Guard::Term(t) => mark(t, inherited.unwrap_or(ContextClass::BlockingContext), out),
        Guard::Timing { earlier, later, .. } => {
            mark(earlier, ContextClass::TimingSubterm, out);
            mark(later, ContextClass::TimingSubterm, out);
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            let class = Some(ContextClass::KleeneSubterm);
            classify_guard(a, class, out);
            classify_guard(b, class, out);
        }
        Guard::Not(inner) => classify_guard(inner, inherited, out),
    }
}

fn mark(t: &Term, class: ContextClass, out: &mut BTreeMap<NodeId, ContextClass>) {
    t.walk(&mut |s| {
        if s.is_query_term() {
            out.insert(s.id, class);
        }
    });
}

/// Warns about reply locations attached to queries in blocking contexts,
/// where the step cannot end before the reply anyway.
pub fn check_reply_location_placement(program: &Program) -> Vec<Diagnostic> {
    let classes = classify_occurrence_contexts(program);
    let vocab = program.vocabulary();
    let mut diags = Vec::new();
    program.rule().for_each_term(&mut |t| {
        t.walk(&mut |s| {
            let Head::External(name) = &s.head else { return };
            let Some(pair) = vocab.get(name).and_then(|sig| sig.reply_pair.as_ref()) else {
                return;
            };
            let class = classes[&s.id];
            if class.is_blocking() {
                let mut d = Diagnostic::warning(
                    s.span,
                    format!(
                        "reply location `{}` on query `{}` in a blocking context is never used late",
                        pair.location, pair.query
                    ),
                );
                d.class = Some(class.to_string());
                diags.push(d);
            }
        })
    });
    diags
}
