//! Core engines for control-flow-integrity target analysis.
//!
//! This crate models a whole program as an immutable facts snapshot
//! (classes, functions, virtual tables, indirect callsites), derives the
//! hierarchy structures CFI policies reason over, evaluates eight target
//! restriction policies per callsite, and aggregates the resulting target
//! sets into reduction metrics and policy rankings.
//!
//! The crate is `no_std` (with `alloc`) so the engines can be embedded in
//! other frontends; file formats, corpus generation and the command line
//! live in the companion `cfi-surface` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod facts;
pub mod hierarchy;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod signature;
pub mod types;
pub mod validate;

pub use facts::{
    Callsite, CallsiteId, CallsiteKind, ClassId, ClassRecord, EntryKind, FunctionId,
    FunctionRecord, GadgetAnnotations, ProgramFacts, SourceLoc, VTableEntry, VTableId,
    VTableRecord,
};
pub use metrics::{Decimal2, Distribution, MetricsError};
pub use policy::{EngineOptions, Evaluator, PolicyError, PolicyId, TargetSet};
pub use types::{ParseTypeError, TypeExpr};
pub use validate::{validate_facts, Diagnostic, DiagnosticCode};
