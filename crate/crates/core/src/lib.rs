//! Journal citation indicators with fractional (citing-side) normalization,
//! percentile ranks, and between-field variance analysis.
//!
//! The usual pipeline: load a corpus and journal master ([`corpus`]), resolve
//! cited references ([`refmatch`]), count citations ([`counts`]), turn counts
//! into indicators ([`indicators`]), rank them ([`percentile`]) and measure
//! how much of their variance is explained by field ([`stats`]).
//! [`synthgen`] builds synthetic corpora with known structure.

pub mod cli;
pub mod corpus;
pub mod counts;
pub mod error;
pub mod indicators;
pub mod percentile;
pub mod refmatch;
pub mod stats;
pub mod synthgen;
mod tsv;

pub use error::{Error, RecordError, Result};
pub use tsv::CompensatedSum;
