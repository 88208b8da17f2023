//! Invariants of the one-step semantics, phrased as proptest checks.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

use iasm::eval::Evaluator;
use iasm::history::{is_attainable, is_coherent, is_complete, issued, pending, History, Query, QuerySet, Round};
use iasm::origins::{classify_occurrence_contexts, Node, OriginFinder};
use iasm::structures::{Element, Rename, Renaming};
use iasm::syntax::{Guard, NodeId, Program, Rule, Term};

use super::gen::{self, Case};

pub const CASES: u32 = 1250;

/// Every term, guard and rule node of the program.
pub fn nodes(program: &Program) -> Vec<Node<'_>> {
    let mut out = Vec::new();
    collect_rule(program.rule(), &mut out);
    out
}

fn collect_rule<'p>(r: &'p Rule, out: &mut Vec<Node<'p>>) {
    out.push(Node::Rule(r));
    match r {
        Rule::Cond {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            collect_guard(guard, out);
            collect_rule(then_branch, out);
            collect_rule(else_branch, out);
        }
        Rule::Par { rules, .. } => rules.iter().for_each(|r| collect_rule(r, out)),
        other => other.for_each_term(&mut |t| t.walk(&mut |s| out.push(Node::Term(s)))),
    }
}

fn collect_guard<'p>(g: &'p Guard, out: &mut Vec<Node<'p>>) {
    out.push(Node::Guard(g));
    match g {
        Guard::And(a, b) | Guard::Or(a, b) => {
            collect_guard(a, out);
            collect_guard(b, out);
        }
        Guard::Not(a) => collect_guard(a, out),
        other => other.for_each_term(&mut |t| t.walk(&mut |s| out.push(Node::Term(s)))),
    }
}

fn terms_by_id(program: &Program) -> BTreeMap<NodeId, &Term> {
    let mut out = BTreeMap::new();
    program.rule().for_each_term(&mut |t| {
        t.walk(&mut |s| {
            out.insert(s.id, s);
        })
    });
    out
}

/// Everything a node yields under one history, for comparisons.
#[derive(Debug, PartialEq)]
enum Outcome {
    Term(Option<Element>, Option<Query>, QuerySet),
    Guard(Option<bool>, QuerySet),
    Rule(QuerySet, iasm::Verdict, iasm::UpdateSet, bool),
}

fn outcome(ev: &Evaluator<'_>, node: Node<'_>) -> Outcome {
    match node {
        Node::Term(t) => {
            let o = ev.term(t);
            Outcome::Term(o.value, o.qvalue, o.caused)
        }
        Node::Guard(g) => {
            let o = ev.guard(g);
            Outcome::Guard(o.value, o.caused)
        }
        Node::Rule(r) => {
            let o = ev.rule(r);
            Outcome::Rule(o.caused, o.verdict, o.updates, o.clash)
        }
    }
}

fn rename_outcome(o: Outcome, r: &Renaming) -> Outcome {
    match o {
        Outcome::Term(v, q, c) => Outcome::Term(v.map(|v| v.rename(r)), q.map(|q| q.rename(r)), c.rename(r)),
        Outcome::Guard(v, c) => Outcome::Guard(v, c.rename(r)),
        Outcome::Rule(c, v, u, k) => Outcome::Rule(c.rename(r), v, u.rename(r), k),
    }
}

fn caused(ev: &Evaluator<'_>, node: Node<'_>) -> QuerySet {
    match node {
        Node::Term(t) => ev.term(t).caused,
        Node::Guard(g) => ev.guard(g).caused,
        Node::Rule(r) => ev.rule(r).caused,
    }
}

/// Walks coherent histories from the empty one, answering a nonempty
/// subset of the pending queries each round. Stops when `stop` holds or
/// nothing is pending.
pub fn walk(case: &Case, choices: &[u64], atoms: bool, stop: impl Fn(&History) -> bool) -> History {
    let alpha = gen::alphabet(atoms);
    let mut h = History::empty();
    let mut it = choices.iter().copied().cycle();
    for _ in 0..32 {
        if stop(&h) {
            break;
        }
        let p: Vec<Query> = pending(&case.program, &case.state, &h).into_iter().collect();
        if p.is_empty() {
            break;
        }
        let n = p.len().min(20);
        let mask = it.next().unwrap() % ((1u64 << n) - 1) + 1;
        let bits = it.next().unwrap();
        let round: Round = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| (p[i].clone(), alpha[(bits >> i) as usize % alpha.len()].clone()))
            .collect();
        h.push_round(round).unwrap();
    }
    h
}

/// (a) Defined values persist into extensions.
pub fn persistence(case: &Case, h: &History, extra: &History) -> Result<(), TestCaseError> {
    let mut longer = h.clone();
    for r in extra.rounds() {
        let fresh: Round = r
            .iter()
            .filter(|(q, _)| !h.contains(q))
            .map(|(q, v)| (q.clone(), v.clone()))
            .collect();
        if !fresh.is_empty() {
            longer.push_round(fresh).unwrap();
        }
    }
    let p = &case.program;
    let (short, long) = (
        Evaluator::new(p, &case.state, h),
        Evaluator::new(p, &case.state, &longer),
    );
    for node in nodes(p) {
        match node {
            Node::Term(t) => {
                if let Some(v) = short.term(t).value {
                    prop_assert_eq!(Some(v), long.term(t).value, "term {:?}", t.id);
                }
            }
            Node::Guard(g) => {
                if let Some(v) = short.guard(g).value {
                    prop_assert_eq!(Some(v), long.guard(g).value);
                }
            }
            Node::Rule(r) => {
                let a = short.rule(r);
                if a.is_final() {
                    let b = long.rule(r);
                    prop_assert_eq!((a.verdict, a.updates), (b.verdict, b.updates));
                }
            }
        }
    }
    Ok(())
}

/// (b) No node causes a query that already has a reply.
pub fn caused_fresh(case: &Case, h: &History) -> Result<(), TestCaseError> {
    let ev = Evaluator::new(&case.program, &case.state, h);
    for node in nodes(&case.program) {
        for q in caused(&ev, node) {
            prop_assert!(
                !h.contains(&q.issued_part()),
                "{} caused but answered in {}",
                q,
                h.render_compact()
            );
        }
    }
    Ok(())
}

/// (c) Issued grows along initial segments and never carries a reply marker.
pub fn issued_monotone(case: &Case, h: &History) -> Result<(), TestCaseError> {
    let mut before = QuerySet::new();
    for seg in h.initial_segments() {
        let now = issued(&case.program, &case.state, &seg);
        prop_assert!(before.is_subset(&now));
        prop_assert!(now.iter().all(|q| !q.contains_reply_marker()));
        before = now;
    }
    Ok(())
}

/// (d) At most one issued query per query-term occurrence.
pub fn issued_bounded(case: &Case, h: &History) -> Result<(), TestCaseError> {
    let n = issued(&case.program, &case.state, h).len();
    prop_assert!(
        n <= case.program.query_term_count(),
        "{} issued, {} occurrences",
        n,
        case.program.query_term_count()
    );
    Ok(())
}

/// (e) A node causes `q` exactly when `q` has origins there, and each
/// origin is a query-term that itself causes `q`.
pub fn origins_match(case: &Case, h: &History) -> Result<(), TestCaseError> {
    let p = &case.program;
    let ev = Evaluator::new(p, &case.state, h);
    let finder = OriginFinder::new(p, &case.state, h);
    let terms = terms_by_id(p);
    let mut candidates: QuerySet = gen::universe(false).into_iter().collect();
    for node in nodes(p) {
        candidates.extend(caused(&ev, node));
    }
    for node in nodes(p) {
        let c = caused(&ev, node);
        for q in &candidates {
            let orig = finder.node(q, node);
            prop_assert_eq!(c.contains(q), !orig.is_empty(), "{}", q);
            for id in orig.iter() {
                let t = terms[id];
                let o = ev.term(t);
                prop_assert!(t.is_query_term());
                prop_assert_eq!(o.qvalue.as_ref(), Some(q));
                prop_assert!(o.caused.contains(q));
            }
        }
    }
    Ok(())
}

/// (f) A query still unanswered when the step ends was caused only from
/// non-blocking positions.
pub fn source(case: &Case, choices: &[u64]) -> Result<(), TestCaseError> {
    let p = &case.program;
    let ctx = classify_occurrence_contexts(p);
    let xi = walk(case, choices, false, |h| {
        Evaluator::new(p, &case.state, h).rule(p.rule()).is_final()
    });
    if !Evaluator::new(p, &case.state, &xi).rule(p.rule()).is_final() {
        return Ok(());
    }
    prop_assert!(is_attainable(p, &case.state, &xi));
    for eta in xi.initial_segments() {
        let ev = Evaluator::new(p, &case.state, &eta);
        let finder = OriginFinder::new(p, &case.state, &eta);
        for q in ev.rule(p.rule()).caused {
            if xi.contains(&q.issued_part()) {
                continue;
            }
            let orig = finder.node(&q, Node::Rule(p.rule()));
            prop_assert!(!orig.is_empty());
            for id in orig.iter() {
                let class = ctx[id];
                prop_assert!(!class.is_blocking(), "{} from blocking occurrence {:?}", q, id);
            }
        }
    }
    Ok(())
}

/// (g) Renaming atoms commutes with evaluation.
pub fn equivariance(case: &Case, h: &History, swap: bool) -> Result<(), TestCaseError> {
    let r = if swap {
        Renaming::swap("p", "q")
    } else {
        Renaming::identity()
    };
    let p = &case.program;
    let (s2, h2) = (case.state.rename(&r), h.rename(&r));
    let (ev, ev2) = (Evaluator::new(p, &case.state, h), Evaluator::new(p, &s2, &h2));
    for node in nodes(p) {
        prop_assert_eq!(rename_outcome(outcome(&ev, node), &r), outcome(&ev2, node));
    }
    Ok(())
}

/// (h) Every complete coherent history passes through a final one.
pub fn complete_has_final(case: &Case, choices: &[u64]) -> Result<(), TestCaseError> {
    let p = &case.program;
    let xi = walk(case, choices, false, |_| false);
    prop_assert!(is_coherent(p, &case.state, &xi));
    prop_assert!(
        is_complete(p, &case.state, &xi),
        "walk stopped early at {}",
        xi.render_compact()
    );
    let found = xi
        .initial_segments()
        .iter()
        .any(|seg| Evaluator::new(p, &case.state, seg).rule(p.rule()).is_final());
    prop_assert!(found, "no final segment of {}", xi.render_compact());
    Ok(())
}

fn dbg<V: std::fmt::Debug>(e: TestError<V>) -> TestError<String> {
    match e {
        TestError::Abort(m) => TestError::Abort(m),
        TestError::Fail(m, v) => TestError::Fail(m, format!("{v:?}")),
    }
}

/// Runs every property for `cases` cases each. Returns the failures as
/// `(name, message)` pairs.
pub fn run_all(cases: u32) -> Vec<(&'static str, String)> {
    let config = || Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();
    let mut check = |name: &'static str, r: Result<(), TestError<String>>| {
        if let Err(e) = r {
            failures.push((name, e.to_string()));
        }
    };
    let mut run = TestRunner::new(config());
    check(
        "persistence",
        run.run(
            &(gen::case(false), gen::history(false), gen::history(false)),
            |(c, h, e)| persistence(&c, &h, &e),
        )
        .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "caused-fresh",
        run.run(&(gen::case(false), gen::history(false)), |(c, h)| caused_fresh(&c, &h))
            .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "issued-monotone",
        run.run(&(gen::case(false), gen::history(false)), |(c, h)| {
            issued_monotone(&c, &h)
        })
        .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "issued-bounded",
        run.run(&(gen::case(false), gen::history(false)), |(c, h)| {
            issued_bounded(&c, &h)
        })
        .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "origins",
        run.run(&(gen::case(false), gen::history(false)), |(c, h)| origins_match(&c, &h))
            .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "source",
        run.run(&(gen::case(false), gen::walk()), |(c, w)| source(&c, &w))
            .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "equivariance",
        run.run(&(gen::case(true), gen::history(true), any::<bool>()), |(c, h, s)| {
            equivariance(&c, &h, s)
        })
        .map_err(dbg),
    );
    let mut run = TestRunner::new(config());
    check(
        "complete-final",
        run.run(&(gen::case(false), gen::walk()), |(c, w)| complete_has_final(&c, &w))
            .map_err(dbg),
    );
    failures
}
