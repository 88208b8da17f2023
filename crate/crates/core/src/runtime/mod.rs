//! Multi-step execution with persistent queries and late replies.

pub mod enumerate;
pub mod env;
pub mod machine;
pub mod registry;
pub mod scenario;
pub mod trace;

pub use env::{Environment, RandomEnv, ScenarioEnv, SilentEnv};
pub use machine::{run, Limits, Machine, Phase, RunReport, RuntimeError, Status, StepResult};
pub use trace::{Event, RunEnd, StepVerdict, Trace};
