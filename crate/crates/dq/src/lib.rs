//! Snapshot loading, rule and schema files, parallel evaluation and the
//! `dq` command line.

pub mod cli;
pub mod csv;
pub mod formats;
pub mod pipeline;
pub mod snapshot;
