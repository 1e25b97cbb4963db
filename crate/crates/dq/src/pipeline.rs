//! Evaluation on a thread pool and the steps shared by the commands.

use std::time::Instant;

use rayon::prelude::*;

use dq_core::engine::{collect, eval_rule, EvalErrors, MeasureSet};
use dq_core::report::{build_report, EvaluationReport};
use dq_core::rules::RuleSet;
use dq_core::scoring::{score_all, ScoringConfig, ScoringError};
use dq_core::table::Repository;

use crate::formats::write_ruleset;
use crate::snapshot::{sha256_hex, snapshot_fingerprint};

pub const TOOL_VERSION: &str = concat!("dq ", env!("CARGO_PKG_VERSION"));

pub fn ruleset_fingerprint(rs: &RuleSet) -> String {
    sha256_hex(&[write_ruleset(rs).as_bytes()])
}

/// Evaluates the rules on `jobs` threads. The result does not depend on
/// `jobs` or on scheduling.
pub fn evaluate(
    rs: &RuleSet,
    repo: &Repository,
    jobs: usize,
) -> Result<MeasureSet, EvalErrors> {
    let snap = snapshot_fingerprint(repo);
    let rsf = ruleset_fingerprint(rs);
    let run = || {
        rs.rules()
            .par_iter()
            .map(|rule| {
                let start = Instant::now();
                eval_rule(rule, repo, rs).map(|mut m| {
                    m.elapsed = start.elapsed();
                    m
                })
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    collect(results, snap, rsf)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Eval(#[from] EvalErrors),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

pub fn evaluate_report(
    rs: &RuleSet,
    repo: &Repository,
    config: &ScoringConfig,
    jobs: usize,
) -> Result<(MeasureSet, EvaluationReport), PipelineError> {
    let ms = evaluate(rs, repo, jobs)?;
    let scores = score_all(&ms, rs, config)?;
    let report = build_report(rs, repo, &ms, &scores, config, TOOL_VERSION);
    Ok((ms, report))
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}
