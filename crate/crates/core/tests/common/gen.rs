//! Random small programs, states and histories for property tests.

use std::fmt;
use std::sync::Arc;

use proptest::prelude::*;

use iasm::history::{History, Query, Round};
use iasm::load::{load_program, load_state};
use iasm::parser::parse_query;
use iasm::structures::{Element, State};
use iasm::syntax::Program;

pub const MAX_RULE_NODES: usize = 6;

const HEADER: &str = "external a/0
external b/0
external g/1
dynamic x/0
dynamic y/0
dynamic r/0 relational
dynamic l/0
dynamic m/1
";

#[derive(Debug, Clone)]
pub enum T {
    Lit(i64),
    X,
    A,
    B,
    /// `<b =: l>` outside an issue rule.
    Loc,
    G(Box<T>),
    Plus(Box<T>, Box<T>),
}

#[derive(Debug, Clone)]
pub enum BT {
    Eq(T, T),
    R,
}

#[derive(Debug, Clone)]
pub enum G {
    B(BT),
    Timing(T, T),
    And(Box<G>, Box<G>),
    Or(Box<G>, Box<G>),
    Not(Box<G>),
}

#[derive(Debug, Clone)]
pub enum I {
    A,
    G(T),
    LocA,
    /// `<g(t) =: m(k)>`, `k` in `0, 1, x`.
    LocG(T, u8),
}

#[derive(Debug, Clone)]
pub enum R {
    SetX(T),
    SetY(T),
    SetRel(BT),
    Issue(I),
    Fail,
    Cond(G, Box<R>, Box<R>),
    Par(Vec<R>),
}

impl R {
    pub fn nodes(&self) -> usize {
        match self {
            R::Cond(_, a, b) => 1 + a.nodes() + b.nodes(),
            R::Par(rs) => 1 + rs.iter().map(R::nodes).sum::<usize>(),
            _ => 1,
        }
    }
}

impl fmt::Display for T {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            T::Lit(i) => write!(f, "{i}"),
            T::X => f.write_str("x"),
            T::A => f.write_str("a"),
            T::B => f.write_str("b"),
            T::Loc => f.write_str("<b =: l>"),
            T::G(t) => write!(f, "g({t})"),
            T::Plus(s, t) => write!(f, "({s} + {t})"),
        }
    }
}

impl fmt::Display for BT {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BT::Eq(s, t) => write!(f, "({s} = {t})"),
            BT::R => f.write_str("r"),
        }
    }
}

impl fmt::Display for G {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            G::B(b) => write!(f, "{b}"),
            G::Timing(s, t) => write!(f, "({s} <~ {t})"),
            G::And(a, b) => write!(f, "({a} /\\ {b})"),
            G::Or(a, b) => write!(f, "({a} \\/ {b})"),
            G::Not(g) => write!(f, "!{g}"),
        }
    }
}

impl fmt::Display for I {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            I::A => f.write_str("a"),
            I::G(t) => write!(f, "g({t})"),
            I::LocA => f.write_str("<a =: l>"),
            I::LocG(t, k) => {
                let k = ["0", "1", "x"][*k as usize % 3];
                write!(f, "<g({t}) =: m({k})>")
            }
        }
    }
}

impl fmt::Display for R {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            R::SetX(t) => write!(f, "x := {t}"),
            R::SetY(t) => write!(f, "y := {t}"),
            R::SetRel(b) => write!(f, "r := {b}"),
            R::Issue(i) => write!(f, "issue {i}"),
            R::Fail => f.write_str("fail"),
            R::Cond(g, a, b) => write!(f, "if {g} then {a} else {b} endif"),
            R::Par(rs) => {
                f.write_str("par")?;
                for r in rs {
                    write!(f, " {r}")?;
                }
                f.write_str(" endpar")
            }
        }
    }
}

pub fn term() -> impl Strategy<Value = T> {
    let leaf = prop_oneof![
        (0i64..2).prop_map(T::Lit),
        Just(T::X),
        Just(T::A),
        Just(T::B),
        Just(T::Loc),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| T::G(Box::new(t))),
            (inner.clone(), inner).prop_map(|(s, t)| T::Plus(Box::new(s), Box::new(t))),
        ]
    })
}

pub fn bool_term() -> impl Strategy<Value = BT> {
    prop_oneof![3 => (term(), term()).prop_map(|(s, t)| BT::Eq(s, t)), 1 => Just(BT::R)]
}

pub fn guard() -> impl Strategy<Value = G> {
    let leaf = prop_oneof![
        bool_term().prop_map(G::B),
        (term(), term()).prop_map(|(s, t)| G::Timing(s, t)),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| G::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| G::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|g| G::Not(Box::new(g))),
        ]
    })
}

fn issue_arg() -> impl Strategy<Value = I> {
    prop_oneof![
        Just(I::A),
        term().prop_map(I::G),
        Just(I::LocA),
        (term(), 0u8..3).prop_map(|(t, k)| I::LocG(t, k)),
    ]
}

pub fn rule() -> impl Strategy<Value = R> {
    let leaf = prop_oneof![
        1 => term().prop_map(R::SetX),
        1 => term().prop_map(R::SetY),
        1 => bool_term().prop_map(R::SetRel),
        3 => issue_arg().prop_map(R::Issue),
        1 => Just(R::Fail),
    ];
    leaf.prop_recursive(3, MAX_RULE_NODES as u32, 3, |inner| {
        prop_oneof![
            (guard(), inner.clone(), inner.clone()).prop_map(|(g, a, b)| R::Cond(g, Box::new(a), Box::new(b))),
            prop::collection::vec(inner, 0..3).prop_map(R::Par),
        ]
    })
    .prop_filter("too many rule nodes", |r| r.nodes() <= MAX_RULE_NODES)
}

/// A generated program with its initial state.
#[derive(Clone)]
pub struct Case {
    pub source: String,
    pub program: Arc<Program>,
    pub state: State,
}

impl fmt::Debug for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n--state--\n{}", self.source, self.state.dump())
    }
}

/// Initial values for `x` and `y`; `atoms` adds `atom p q` and lets them
/// hold atoms.
pub fn case(atoms: bool) -> impl Strategy<Value = Case> {
    let init = if atoms {
        prop::sample::select(vec!["undef", "0", "p", "q"])
    } else {
        prop::sample::select(vec!["undef", "0", "1"])
    };
    (rule(), init.clone(), init).prop_map(move |(r, x, y)| {
        let source = format!("{HEADER}rule\n{r}\n");
        let program = load_program("gen", &source).unwrap_or_else(|e| panic!("{e}\n{source}"));
        let state_text = format!("{}x = {x}\ny = {y}\n", if atoms { "atom p q\n" } else { "" });
        let state = load_state("gen", &state_text, &program).unwrap_or_else(|e| panic!("{e}\n{state_text}"));
        Case {
            source,
            program: Arc::new(program),
            state,
        }
    })
}

pub fn alphabet(atoms: bool) -> Vec<Element> {
    if atoms {
        vec![Element::atom("p"), Element::atom("q")]
    } else {
        vec![Element::Int(0), Element::Int(1)]
    }
}

/// Queries the generated programs can ask, plus a few they cannot.
pub fn universe(atoms: bool) -> Vec<Query> {
    let mut names = vec![
        "<a>",
        "<b>",
        "<g 0>",
        "<g 1>",
        "<g 2>",
        "<g undef>",
        "<g true>",
        "<g false>",
    ];
    if atoms {
        names.extend(["<g 'p'>", "<g 'q'>"]);
    }
    names.into_iter().map(|s| parse_query(s).unwrap()).collect()
}

/// An arbitrary history over [`universe`]: up to three rounds.
pub fn history(atoms: bool) -> impl Strategy<Value = History> {
    let u = universe(atoms);
    let n = u.len();
    let alpha = alphabet(atoms);
    prop::collection::vec((0..n, 0..alpha.len(), 0usize..3), 0..6).prop_map(move |picks| {
        let mut rounds = vec![Round::new(); 3];
        let mut seen = std::collections::BTreeSet::new();
        for (qi, vi, ri) in picks {
            if seen.insert(qi) {
                rounds[ri].insert(u[qi].clone(), alpha[vi].clone());
            }
        }
        History::from_rounds(rounds.into_iter().filter(|r| !r.is_empty())).unwrap()
    })
}

/// Choices that drive a walk through coherent histories.
pub fn walk() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(any::<u64>(), 16)
}
