//! Data-quality evaluation core.
//!
//! Business rules are categorized under the fifteen inherent quality
//! properties. Evaluating them against a repository snapshot yields base
//! measures (compliant items `A` over applicable items `B`), which are
//! aggregated into property quality values in `[0, 100]`, discretized into
//! quality levels, and combined per characteristic through a profiling
//! function. A repository is eligible for certification when every evaluated
//! characteristic reaches level 3.
//!
//! The crate is `no_std` (with `alloc`); file formats, parallel evaluation
//! and the command line live in the `dq` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod expr;
pub mod pattern;
pub mod render;
pub mod report;
pub mod rules;
pub mod scenario;
pub mod schema;
pub mod scoring;
pub mod synth;
pub mod table;
pub mod taxonomy;
pub mod validate;
pub mod value;
