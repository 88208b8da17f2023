#![allow(dead_code)]

pub mod criteria;
pub mod gen;
pub mod props;

use std::path::PathBuf;
use std::sync::Arc;

use iasm::history::{History, Query, Round};
use iasm::load::{load_program, load_scenario, load_state};
use iasm::runtime::scenario::Scenario;
use iasm::structures::{Element, State};
use iasm::syntax::Program;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Program `<name>.iasm` with `<state>.state`.
pub fn load(name: &str, state: &str) -> (Arc<Program>, State) {
    let p = load_program(name, &fixture(&format!("{name}.iasm"))).unwrap();
    let s = load_state(state, &fixture(&format!("{state}.state")), &p).unwrap();
    (Arc::new(p), s)
}

pub fn scenario(name: &str, state: &State) -> Scenario {
    load_scenario(name, &fixture(&format!("{name}.env")), state).unwrap()
}

pub fn q(label: &str) -> Query {
    Query::labels(&[label])
}

pub fn hist(rounds: &[&[(&str, Element)]]) -> History {
    History::from_rounds(
        rounds
            .iter()
            .map(|r| r.iter().map(|(l, v)| (q(l), v.clone())).collect::<Round>()),
    )
    .unwrap()
}
