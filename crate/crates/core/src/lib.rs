//! Core types and deterministic pipeline stages for computer-use trajectories.
//!
//! Raw demonstrations (input events plus extracted frames) are validated,
//! reduced to a compact action sequence, and aligned to keyframes.

pub mod aligner;
pub mod dsl;
pub mod interchange;
pub mod keys;
pub mod model;
pub mod reducer;
pub mod response;
pub mod sim;
pub mod synth;
pub mod validate;

pub use dsl::{
    parse_action, parse_action_with, parse_program, render_action, DslError, ParseOptions,
};
pub use keys::Key;
pub use model::*;
pub use response::{extract_response, split_sections, ParsedResponse};
