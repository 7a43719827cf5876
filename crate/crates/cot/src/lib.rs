//! Reflective chain-of-thought synthesis over a pluggable model client and
//! emission of chat-format training samples.

pub mod client;
pub mod cues;
pub mod emit;
pub mod error;
mod mock;
pub mod pipeline;
pub mod prompts;
pub mod tags;

pub use client::{
    BackendConfig, BackendKind, CachedClient, HttpClient, Message, MockClient, ModelClient,
    ModelRequest, Part, RequestKind, Role, ScriptedClient,
};
pub use cues::{cue_layout, render_visual_cues, write_cue_image};
pub use emit::{emit_training_samples, ChatMessage, ChatSample, Emitted, SampleConfig, Skip};
pub use error::CotError;
pub use pipeline::{Annotator, RetryPolicy};
