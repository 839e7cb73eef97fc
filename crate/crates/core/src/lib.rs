//! Household task planning with a human in the loop.
//!
//! The crate is organised bottom-up:
//!
//! - [`world`]: a deterministic household scene and the twelve atomic actions.
//! - [`skills`]: skill expansions into atomic actions, plan execution and goals.
//! - [`planscript`]: the line-oriented skill-script language (parse, validate, serialize).
//! - [`llm`]: chat backends (live HTTP, scripted mock, record/replay).
//! - [`pipeline`]: the session state machine driving decomposition, code
//!   generation, feedback, execution with refinement and allocation.
//! - [`allocation`]: affordance-based skill allocation between human and robot.
//! - [`harness`]: suite runner and OCR/SER/CASR/OER metrics.
//! - [`prompts`]: prompt templates.

pub mod allocation;
pub mod fixtures;
pub mod harness;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod planscript;
pub mod prompts;
pub mod skills;
pub mod world;

pub use world::{AgentId, AtomicAction, ExecutionError, ErrorKind, Scene};
