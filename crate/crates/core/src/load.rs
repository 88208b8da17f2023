//! Loading program, state and scenario text into checked values.

use std::sync::Arc;

use thiserror::Error;

use crate::history::QuerySlot;
use crate::origins::check_reply_location_placement;
use crate::parser::{parse_program, parse_scenario, parse_state, ParseError};
use crate::runtime::scenario::Scenario;
use crate::structures::{Element, State};
use crate::syntax::{desugar_reply_locations, validate_program, Diagnostic, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{}", render_all(file, diagnostics))]
    Invalid { file: String, diagnostics: Vec<Diagnostic> },
    #[error("{file}: error: {message}")]
    Scenario { file: String, message: String },
}

fn render_all(file: &str, diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.render(file)).collect::<Vec<_>>().join("\n")
}

/// Result of checking a program: all diagnostics, and the program when
/// none of them is an error.
#[derive(Debug, Clone)]
pub struct Checked {
    pub program: Option<Program>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn check_source(file: &str, text: &str) -> Result<Checked, ParseError> {
    let raw = parse_program(file, text)?;
    let program = match desugar_reply_locations(raw) {
        Ok(p) => p,
        Err(diagnostics) => {
            return Ok(Checked {
                program: None,
                diagnostics,
            })
        }
    };
    let mut diagnostics = validate_program(&program);
    if !diagnostics.iter().any(Diagnostic::is_error) {
        diagnostics.extend(check_reply_location_placement(&program));
    }
    let ok = !diagnostics.iter().any(Diagnostic::is_error);
    Ok(Checked {
        program: ok.then_some(program),
        diagnostics,
    })
}

/// Parses, desugars and validates; warnings are dropped.
pub fn load_program(file: &str, text: &str) -> Result<Program, LoadError> {
    let checked = check_source(file, text)?;
    checked.program.ok_or_else(|| LoadError::Invalid {
        file: file.to_string(),
        diagnostics: checked.diagnostics,
    })
}

pub fn load_state(file: &str, text: &str, program: &Program) -> Result<State, LoadError> {
    Ok(parse_state(file, text, Arc::new(program.vocabulary().clone()))?)
}

/// Parses a scenario whose atoms must all be elements of `state`.
pub fn load_scenario(file: &str, text: &str, state: &State) -> Result<Scenario, LoadError> {
    let scenario = parse_scenario(file, text)?;
    for d in &scenario.directives {
        let elems = d
            .query
            .slots()
            .iter()
            .filter_map(|s| match s {
                QuerySlot::Elem(e) => Some(e),
                QuerySlot::Label(_) => None,
            })
            .chain(std::iter::once(&d.reply));
        for e in elems {
            if matches!(e, Element::Atom(_)) && !state.contains(e) {
                return Err(LoadError::Scenario {
                    file: file.to_string(),
                    message: format!("`{d}` uses {e}, which the state does not declare"),
                });
            }
        }
    }
    Ok(scenario)
}
