//! The `iasm` command line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::load::{check_source, load_program, load_scenario, load_state, LoadError};
use crate::parser::parse_literal;
use crate::runtime::enumerate::{enumerate_attainable, Bounds};
use crate::runtime::{run, Environment, Limits, RandomEnv, ScenarioEnv, SilentEnv};
use crate::structures::Element;
use crate::syntax::Diagnostic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;

#[derive(Debug, Parser)]
#[command(name = "iasm", version, about = "Run and analyze interactive small-step ASMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a program and lint its reply locations.
    Check {
        program: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a program until Halt, failure, a stuck step, or the limits.
    Run {
        program: PathBuf,
        state: PathBuf,
        /// Scripted environment; without it the environment is silent,
        /// or random when --seed is given.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = Limits::default().max_steps)]
        max_steps: usize,
        #[arg(long, default_value_t = Limits::default().max_rounds)]
        max_rounds: usize,
        /// Seed for the random environment.
        #[arg(long, conflicts_with = "scenario")]
        seed: Option<u64>,
        /// Reply values for the random environment.
        #[arg(long, value_delimiter = ',', default_value = "true,false")]
        alphabet: Vec<String>,
        /// Print the trace as JSON.
        #[arg(long)]
        json: bool,
    },
    /// List the final attainable histories of the first step.
    Enumerate {
        program: PathBuf,
        state: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
        #[arg(long, default_value_t = Bounds::default().max_rounds)]
        max_rounds: usize,
        /// Most replies in a single round.
        #[arg(long, default_value_t = Bounds::default().max_width)]
        max_width: usize,
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP stepper service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
    },
}

struct Failure(i32, String);

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure(EXIT_DATA, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_NO_INPUT, format!("{}: {e}", path.display())))
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn alphabet(values: &[String]) -> Result<Vec<Element>, Failure> {
    values
        .iter()
        .map(|v| parse_literal(v.trim()).map_err(|e| Failure(EXIT_USAGE, format!("--alphabet: {}", e.message))))
        .collect()
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        // load errors already carry their location and severity
        Err(Failure(EXIT_DATA, msg)) => {
            let _ = writeln!(err, "{msg}");
            EXIT_DATA
        }
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| Failure(EXIT_ERROR, e.to_string());
    match cmd {
        Command::Check { program, json } => {
            let name = file_name(&program);
            let text = read(&program)?;
            let checked = match check_source(&name, &text) {
                Ok(c) => c,
                Err(e) if json => {
                    let d = [Diagnostic::error(e.span, e.message)];
                    let s = serde_json::to_string_pretty(&d).expect("diagnostics serialize");
                    writeln!(out, "{s}").map_err(io)?;
                    return Ok(EXIT_ERROR);
                }
                Err(e) => {
                    writeln!(out, "{e}").map_err(io)?;
                    return Ok(EXIT_ERROR);
                }
            };
            if json {
                let s = serde_json::to_string_pretty(&checked.diagnostics).expect("diagnostics serialize");
                writeln!(out, "{s}").map_err(io)?;
            } else {
                for d in &checked.diagnostics {
                    writeln!(out, "{}", d.render(&name)).map_err(io)?;
                }
            }
            Ok(if checked.program.is_some() { EXIT_OK } else { EXIT_ERROR })
        }
        Command::Run {
            program,
            state,
            scenario,
            max_steps,
            max_rounds,
            seed,
            alphabet: values,
            json,
        } => {
            let prog = load_program(&file_name(&program), &read(&program)?)?;
            let st = load_state(&file_name(&state), &read(&state)?, &prog)?;
            let mut env: Box<dyn Environment> = match (&scenario, seed) {
                (Some(path), _) => Box::new(ScenarioEnv::new(load_scenario(&file_name(path), &read(path)?, &st)?)),
                (None, Some(seed)) => {
                    let values = alphabet(&values)?;
                    if let Some(bad) = values.iter().find(|v| !st.contains(v)) {
                        return Err(Failure(
                            EXIT_USAGE,
                            format!("--alphabet: {bad} is not an element of the state"),
                        ));
                    }
                    Box::new(RandomEnv::new(seed, values))
                }
                (None, None) => Box::new(SilentEnv),
            };
            let limits = Limits { max_steps, max_rounds };
            let report = run(Arc::new(prog), st, env.as_mut(), limits)
                .map_err(|e| Failure(EXIT_ERROR, format!("runtime error: {e}")))?;
            for w in &report.warnings {
                writeln!(err, "warning: {w}").map_err(io)?;
            }
            if json {
                writeln!(out, "{}", report.trace.to_json()).map_err(io)?;
            } else {
                write!(out, "{}", report.trace.render()).map_err(io)?;
            }
            Ok(report.end().exit_code())
        }
        Command::Enumerate {
            program,
            state,
            alphabet: values,
            max_rounds,
            max_width,
            json,
        } => {
            let prog = load_program(&file_name(&program), &read(&program)?)?;
            let st = load_state(&file_name(&state), &read(&state)?, &prog)?;
            let values = alphabet(&values)?;
            let bounds = Bounds {
                max_rounds,
                max_width,
                ..Bounds::default()
            };
            let found =
                enumerate_attainable(&prog, &st, &values, bounds).map_err(|e| Failure(EXIT_ERROR, e.to_string()))?;
            if json {
                let s = serde_json::to_string_pretty(&found).expect("histories serialize");
                writeln!(out, "{s}").map_err(io)?;
            } else {
                for e in &found {
                    writeln!(out, "{e}").map_err(io)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new().map_err(io)?;
            writeln!(err, "serving on http://{addr}").map_err(io)?;
            rt.block_on(crate::service::serve(addr)).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}
