//! Interactive small-step abstract state machines with persistent queries
//! and reply locations.
//!
//! The pipeline is [`parser`] → [`syntax::desugar_reply_locations`] →
//! [`syntax::validate_program`]; [`load`] bundles it. Semantics live in
//! [`eval`] and [`history`], origin analysis in [`origins`], multi-step
//! execution in [`runtime`], and the HTTP stepper in [`service`].

pub mod cli;
pub mod eval;
pub mod history;
pub mod load;
pub mod origins;
pub mod parser;
pub mod runtime;
pub mod service;
pub mod structures;
pub mod syntax;

pub use eval::{RuleOutcome, Verdict};
pub use history::{History, Query, QuerySet, Round};
pub use load::{check_source, load_program, load_scenario, load_state, LoadError};
pub use runtime::RuntimeError;
pub use structures::{Element, Location, State, Update, UpdateSet};
pub use syntax::{Diagnostic, Program};

/// Any error the engine reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}
