//! Generative emotion recognition in conversation, as a data pipeline.
//!
//! Conversations are ingested and validated ([`corpus`]), optionally merged
//! into a unified nine-label corpus with global speaker ids ([`unify`]), and
//! turned into instruction prompts ([`prompt`]) enriched with a retrieved
//! demonstration ([`retrieval`], [`embed`]). Training files for the two-stage
//! schedule come from [`export`]; [`backend`] talks to completion services or
//! deterministic mocks; [`eval`] turns completions into weighted-F1 reports.
//! [`mixing`] draws scaled training subsets and [`pipeline`] wires everything
//! into reproducible, config-driven runs.

pub mod backend;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod export;
pub mod fixtures;
pub mod jsonl;
pub mod mixing;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod unify;

pub use error::{Error, Result};
