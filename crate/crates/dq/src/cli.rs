//! The `dq` command line.
//!
//! Exit codes: 0 ok or eligible, 1 usage or IO, 2 not eligible (`certify`
//! only), 3 invalid rules or schema, 4 evaluation error, 5 inputs that do
//! not belong together.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use dq_core::engine::{EvalErrors, MeasureSet};
use dq_core::render::{render_comparison, render_report};
use dq_core::report::{build_improvement, compare, EvaluationReport};
use dq_core::rules::RuleSet;
use dq_core::scenario::{scenario, SCENARIOS};
use dq_core::schema::SchemaCatalog;
use dq_core::scoring::{ScoringConfig, ScoringError, Verdict};
use dq_core::synth::generate;
use dq_core::taxonomy::{CharacteristicId, PropertyId};
use dq_core::validate::{has_errors, validate_ruleset, Diagnostic};

use crate::formats::{
    parse_catalog, parse_config, parse_ruleset, parse_synth_spec, to_canonical_json,
    write_catalog, write_ruleset, ParseError,
};
use crate::pipeline::{default_jobs, evaluate, evaluate_report, PipelineError};
use crate::snapshot::{load_snapshot, write_snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_ELIGIBLE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_EVAL: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "dq", version, about = "Rule-based data-quality evaluation and certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a rules file against a schema.
    Validate(ValidateArgs),
    /// Evaluate a snapshot and write report.json.
    Evaluate(EvaluateArgs),
    /// Write improvement manifests for the failing records behind a report.
    Improve(ImproveArgs),
    /// Compare two evaluation reports.
    Compare(CompareArgs),
    /// Check certification eligibility of a report.
    Certify(CertifyArgs),
    /// Generate a synthetic snapshot with known measures.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct Inputs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Snapshot directory holding one `<entity>.csv` per schema entity.
    #[arg(long)]
    data: PathBuf,
    /// Scoring configuration (thresholds, profiling tables, aggregation).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluate only these characteristics.
    #[arg(long, value_delimiter = ',')]
    chars: Vec<String>,
    /// Evaluate only these properties.
    #[arg(long, value_delimiter = ',')]
    props: Vec<String>,
    /// Directory for report.json (and report.txt with `--format text`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct ImproveArgs {
    /// Report produced by `evaluate` on the same rules and snapshot.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    /// Directory for comparison.json and comparison.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    report: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Built-in scenario; writes its schema, rules and spec next to the data.
    #[arg(long, conflicts_with_all = ["spec", "rules", "schema"])]
    scenario: Option<String>,
    #[arg(long, requires_all = ["rules", "schema"])]
    spec: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Replaces the seed of the spec or scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out, err),
        Command::Improve(a) => cmd_improve(a, out, err),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Certify(a) => cmd_certify(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::new(EXIT_USAGE, format!("stdout: {e}")))
}

fn parsed<T>(path: &Path, r: Result<T, ParseError>, code: i32) -> Result<T, Failure> {
    r.map_err(|e| Failure::new(code, format!("{}: {e}", path.display())))
}

fn load_inputs(inputs: &Inputs) -> Result<(RuleSet, SchemaCatalog), Failure> {
    let catalog = parsed(&inputs.schema, parse_catalog(&read(&inputs.schema)?), EXIT_INVALID)?;
    let rs = parsed(&inputs.rules, parse_ruleset(&read(&inputs.rules)?), EXIT_INVALID)?;
    Ok((rs, catalog))
}

fn load_report(path: &Path) -> Result<EvaluationReport, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: not a valid report: {e}", path.display())))
}

fn print_diagnostics(diags: &[Diagnostic], err: &mut dyn Write) {
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

/// Validates `rs` against `catalog`; errors stop the command with exit 3.
fn check(rs: &RuleSet, catalog: &SchemaCatalog, err: &mut dyn Write) -> Result<(), Failure> {
    let diags = validate_ruleset(rs, catalog);
    print_diagnostics(&diags, err);
    if has_errors(&diags) {
        let n = diags.iter().filter(|d| d.is_error()).count();
        return Err(Failure::new(EXIT_INVALID, format!("rules have {n} error(s)")));
    }
    Ok(())
}

fn jobs(j: Option<usize>) -> Result<usize, Failure> {
    match j {
        Some(0) => Err(Failure::new(EXIT_USAGE, "--jobs must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(default_jobs()),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        // Every rule was not applicable to the snapshot.
        PipelineError::Scoring(ScoringError::NothingEvaluated) => Failure::new(
            EXIT_MISMATCH,
            "no rule has an applicable item in this snapshot; nothing can be scored",
        ),
        e => Failure::new(EXIT_EVAL, e.to_string()),
    }
}

fn eval_failure(e: EvalErrors) -> Failure {
    Failure::new(EXIT_EVAL, e.to_string())
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let (rs, catalog) = load_inputs(&a.inputs)?;
    let diags = validate_ruleset(&rs, &catalog);
    let errors = diags.iter().filter(|d| d.is_error()).count();
    let warnings = diags.len() - errors;
    match a.format {
        Format::Text => {
            print_diagnostics(&diags, err);
            emit(
                out,
                &format!(
                    "{}: {} rules, {errors} errors, {warnings} warnings\n",
                    rs.name(),
                    rs.rules().len()
                ),
            )?;
        }
        Format::Json => {
            let items: Vec<_> = diags
                .iter()
                .map(|d| {
                    serde_json::json!({
                        "level": if d.is_error() { "error" } else { "warning" },
                        "rule_id": d.rule_id,
                        "message": d.message,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "ruleset": rs.name(),
                "rules": rs.rules().len(),
                "errors": errors,
                "warnings": warnings,
                "diagnostics": items,
            });
            emit(out, &to_canonical_json(&doc))?;
        }
    }
    Ok(if errors > 0 { EXIT_INVALID } else { EXIT_OK })
}

fn parse_names<T: std::str::FromStr + Ord>(
    names: &[String],
    what: &str,
) -> Result<BTreeSet<T>, Failure> {
    names
        .iter()
        .map(|n| {
            n.trim()
                .parse()
                .map_err(|_| Failure::new(EXIT_USAGE, format!("unknown {what} `{n}`")))
        })
        .collect()
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let chars: BTreeSet<CharacteristicId> = parse_names(&a.chars, "characteristic")?;
    let props: BTreeSet<PropertyId> = parse_names(&a.props, "property")?;
    let jobs = jobs(a.jobs)?;
    let config = match &a.config {
        Some(p) => parsed(p, parse_config(&read(p)?), EXIT_USAGE)?,
        None => ScoringConfig::default(),
    };
    let (rs, catalog) = load_inputs(&a.inputs)?;
    let rs = if chars.is_empty() && props.is_empty() {
        rs
    } else {
        rs.subset(|p| {
            (chars.is_empty() || chars.contains(&p.characteristic()))
                && (props.is_empty() || props.contains(&p))
        })
        .map_err(|e| Failure::new(EXIT_USAGE, format!("selection: {e}")))?
    };
    check(&rs, &catalog, err)?;
    let repo = load_snapshot(&a.data, &catalog).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let (_, report) = evaluate_report(&rs, &repo, &config, jobs).map_err(pipeline_failure)?;
    let json = to_canonical_json(&report);
    let text = render_report(&report);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write(&dir.join("report.json"), &json)?;
        if a.format == Format::Text {
            write(&dir.join("report.txt"), &text)?;
        }
    }
    emit(out, if a.format == Format::Json { &json } else { &text })?;
    Ok(EXIT_OK)
}

fn cmd_improve(a: ImproveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let jobs = jobs(a.jobs)?;
    let report = load_report(&a.report)?;
    let (rs, catalog) = load_inputs(&a.inputs)?;
    let evaluated: BTreeSet<PropertyId> = report.properties.iter().map(|p| p.property).collect();
    let rs = rs
        .subset(|p| evaluated.contains(&p))
        .map_err(|_| {
            Failure::new(
                EXIT_MISMATCH,
                "the rules file has no rules for the properties in the report",
            )
        })?;
    check(&rs, &catalog, err)?;
    let repo = load_snapshot(&a.data, &catalog).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let ms: MeasureSet = evaluate(&rs, &repo, jobs).map_err(eval_failure)?;
    let manifests = build_improvement(&report, &ms, &rs, &repo)
        .map_err(|e| Failure::new(EXIT_MISMATCH, e.to_string()))?;
    create_dir(&a.out)?;
    let mut index = Vec::with_capacity(manifests.len());
    for m in &manifests {
        let file = m.file_name();
        write(&a.out.join(&file), &to_canonical_json(m))?;
        let failing: u64 = m.rules.iter().map(|r| r.failing_count).sum();
        index.push(serde_json::json!({
            "file": file,
            "entity": m.entity,
            "property": m.property,
            "characteristic": m.characteristic,
            "weakness": m.weakness,
            "rules": m.rules.len(),
            "failing_count": failing,
        }));
    }
    let doc = serde_json::json!({
        "ruleset_name": report.metadata.ruleset_name,
        "ruleset_version": report.metadata.ruleset_version,
        "snapshot_fingerprint": report.metadata.snapshot_fingerprint,
        "manifests": index,
    });
    write(&a.out.join("index.json"), &to_canonical_json(&doc))?;
    emit(
        out,
        &format!("{} manifests written to {}\n", manifests.len(), a.out.display()),
    )?;
    Ok(EXIT_OK)
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> Outcome {
    let first = load_report(&a.first)?;
    let second = load_report(&a.second)?;
    let c = compare(&first, &second).map_err(|e| Failure::new(EXIT_MISMATCH, e.to_string()))?;
    let json = to_canonical_json(&c);
    let text = render_comparison(&c);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write(&dir.join("comparison.json"), &json)?;
        write(&dir.join("comparison.txt"), &text)?;
    }
    emit(out, if a.format == Format::Json { &json } else { &text })?;
    Ok(EXIT_OK)
}

fn cmd_certify(a: CertifyArgs, out: &mut dyn Write) -> Outcome {
    let report = load_report(&a.report)?;
    match a.format {
        Format::Json => emit(out, &to_canonical_json(&report.verdict))?,
        Format::Text => {
            let mut text = String::new();
            for c in &report.characteristics {
                if let Some(level) = c.level {
                    text.push_str(&format!("{}: level {level}\n", c.characteristic));
                }
            }
            match &report.verdict {
                Verdict::Eligible => text.push_str("ELIGIBLE for certification\n"),
                Verdict::NotEligible { reasons } => {
                    text.push_str("NOT ELIGIBLE for certification; below level 3:\n");
                    for r in reasons {
                        text.push_str(&format!("  {} (level {})\n", r.characteristic, r.level));
                    }
                }
            }
            emit(out, &text)?;
        }
    }
    Ok(if report.verdict.is_eligible() {
        EXIT_OK
    } else {
        EXIT_NOT_ELIGIBLE
    })
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Outcome {
    let (catalog, rs, mut spec) = if let Some(name) = &a.scenario {
        let s = scenario(name).ok_or_else(|| {
            Failure::new(
                EXIT_USAGE,
                format!("unknown scenario `{name}` (known: {})", SCENARIOS.join(", ")),
            )
        })?;
        (s.catalog, s.ruleset, s.synth)
    } else {
        let (Some(spec), Some(rules), Some(schema)) = (&a.spec, &a.rules, &a.schema) else {
            return Err(Failure::new(
                EXIT_USAGE,
                "give either --scenario or --spec with --rules and --schema",
            ));
        };
        let (rs, catalog) = load_inputs(&Inputs {
            rules: rules.clone(),
            schema: schema.clone(),
        })?;
        let spec = parsed(spec, parse_synth_spec(&read(spec)?), EXIT_USAGE)?;
        (catalog, rs, spec)
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let generated =
        generate(&spec, &catalog, &rs).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    write_snapshot(&a.out, &generated.entities).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    write(
        &a.out.join("expected_measures.json"),
        &to_canonical_json(&generated.expected),
    )?;
    if a.scenario.is_some() {
        write(&a.out.join("schema.json"), &write_catalog(&catalog))?;
        write(&a.out.join("rules.json"), &write_ruleset(&rs))?;
        write(&a.out.join("synth.json"), &to_canonical_json(&spec))?;
    }
    let rows: usize = generated.entities.iter().map(|e| e.len()).sum();
    emit(
        out,
        &format!(
            "{} entities, {rows} rows written to {}\n",
            generated.entities.len(),
            a.out.display()
        ),
    )?;
    Ok(EXIT_OK)
}

