//! Satisfiability for bounded-density multimodal logics.

pub mod ccs;
pub mod error;
pub mod formula;
pub mod generate;
pub mod oracle;
pub mod semantics;
pub mod solver;
pub mod universe;
pub mod window;

pub use error::{Error, Result};
pub use formula::{parse, Formula, FormulaSet, Syntax};
