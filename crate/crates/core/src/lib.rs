//! Thread-partitioning static analysis of mobile systems written in the
//! pi-calculus.
//!
//! The pipeline is: [`syntax`] parses and desugars a system, [`index`]
//! builds its static maps, [`concrete`] runs the labelled non-standard
//! semantics, [`partition`] describes how threads are grouped into
//! computation units, and [`engine`] iterates the environment analysis
//! ([`env`]) and the contents analysis ([`contents`], over the numeric
//! domain in [`numeric`]) to a fixpoint. [`analyzer`] ties it together.

pub mod analyzer;
pub mod concrete;
pub mod contents;
pub mod corpus;
pub mod engine;
pub mod env;
pub mod index;
pub mod numeric;
pub mod partition;
pub mod syntax;

pub use index::{check_wellformed, LabelId, SystemIndex, VarId};
pub use syntax::{desugar_bang, parse_system, Label, Process, Var};
