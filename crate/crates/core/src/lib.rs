//! Conjunctive queries with a min-predicate or min/max ranking: classification,
//! predicate elimination, direct access, counting and enumeration, with a
//! brute-force oracle for cross-checking.

pub mod access;
pub mod elim;
pub mod enumerate;
pub mod error;
pub mod gen;
pub mod instance;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod qmodel;
pub mod reduce;
pub mod semiring;
pub mod structure;

pub use error::{Error, Result};
pub use par::Exec;
