//! File-level tooling around `qrelcmp-core`: loading TREC files, running the
//! significance analysis in parallel, comparing and sweeping candidate qrels,
//! LLM labelling, and CSV/JSON/SVG output.

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod llm;
pub mod parallel;
pub mod plot;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};
