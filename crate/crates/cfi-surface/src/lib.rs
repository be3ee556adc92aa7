//! Facts file IO, deterministic corpus generation, the analysis
//! pipeline, and report rendering for the `cfi-surface` command line.

pub mod cli;
pub mod generate;
pub mod io;
pub mod report;
