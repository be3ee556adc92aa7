//! The `cfi-surface` command line.
//!
//! Exit codes: 0 success; 1 the input data failed to decode or validate;
//! 2 an I/O failure reading or writing files; 3 usage errors. Reports are
//! rendered fully in memory before the output path is touched, so a
//! failing run leaves no partial output behind. Output is plain text
//! (`NO_COLOR` is trivially honored).

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use cfi_core::policy::{EngineOptions, PolicyId};
use cfi_core::validate::{validate_facts, validate_gadgets};
use cfi_core::facts::{GadgetAnnotations, ProgramFacts};

use crate::generate::{generate_corpus, GeneratorConfig};
use crate::io;
use crate::report::{self, AnalysisRequest, BaselineChoice, Scope};

#[derive(Debug, Parser)]
#[command(
    name = "cfi-surface",
    version,
    about = "Model CFI policies over program facts and report calltarget reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run policies over a facts file and render the metrics report.
    Analyze(AnalyzeArgs),
    /// Render the per-callsite target disclosure table.
    PerCallsite(PerCallsiteArgs),
    /// Generate a deterministic synthetic facts corpus.
    Generate(GenerateArgs),
    /// Emit only the policy ranking.
    Rank(RankArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Facts file (.cfifacts.json).
    #[arg(long)]
    facts: PathBuf,
    /// Comma-separated policy list (names or numbers 1-8), or `all`.
    #[arg(long, default_value = "all")]
    policies: String,
    /// Callsite scope: `virtual` or `all`.
    #[arg(long, default_value = "virtual")]
    scope: String,
    /// Baseline: `all-functions`, `virtual-functions` or `auto`.
    #[arg(long, default_value = "auto")]
    baseline: String,
    /// Output format: `csv`, `json` or `md`.
    #[arg(long, default_value = "md")]
    format: String,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gadget annotations file enabling the fCGA/bCGA totals.
    #[arg(long)]
    gadgets: Option<PathBuf>,
    /// Also compute return-target reduction per policy.
    #[arg(long)]
    rtr: bool,
}

#[derive(Debug, Args)]
struct PerCallsiteArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Add one detail row per legitimate target.
    #[arg(long)]
    expand: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    classes: u32,
    /// Free (non-virtual) functions to generate.
    #[arg(long, default_value_t = 20)]
    functions: u32,
    #[arg(long, default_value_t = 40)]
    callsites: u32,
    #[arg(long, default_value_t = 2)]
    max_bases: u32,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Facts file, or a precomputed normalized-aggregates file
    /// (`{"aggregates": [{"policy", "avg", "sd", "p90"}, ...]}`).
    #[command(flatten)]
    common: CommonArgs,
}

enum CliError {
    /// Input data failed to decode or validate.
    Data(String),
    Io(String),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Io(_) => 2,
            CliError::Usage(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
    Md,
}

/// Parse the command line and run it, returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            // clap renders its own message (help text or error + usage).
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cfi-surface: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::PerCallsite(args) => cmd_per_callsite(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Rank(args) => cmd_rank(args),
    }
}

// --- argument decoding ----------------------------------------------------

fn parse_policies(list: &str) -> Result<Vec<PolicyId>, CliError> {
    if list.trim() == "all" {
        return Ok(PolicyId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for item in list.split(',') {
        let item = item.trim();
        let policy: PolicyId = item
            .parse()
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        if !out.contains(&policy) {
            out.push(policy);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no policies selected".to_string()));
    }
    Ok(out)
}

fn parse_scope(s: &str) -> Result<Scope, CliError> {
    match s {
        "virtual" => Ok(Scope::Virtual),
        "all" => Ok(Scope::All),
        other => Err(CliError::Usage(format!(
            "unknown scope '{other}' (expected 'virtual' or 'all')"
        ))),
    }
}

fn parse_baseline(s: &str) -> Result<BaselineChoice, CliError> {
    match s {
        "all-functions" => Ok(BaselineChoice::AllFunctions),
        "virtual-functions" => Ok(BaselineChoice::VirtualFunctions),
        "auto" => Ok(BaselineChoice::Auto),
        other => Err(CliError::Usage(format!(
            "unknown baseline '{other}' (expected 'all-functions', 'virtual-functions' or 'auto')"
        ))),
    }
}

fn parse_format(s: &str) -> Result<Format, CliError> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        "md" => Ok(Format::Md),
        other => Err(CliError::Usage(format!(
            "unknown format '{other}' (expected 'csv', 'json' or 'md')"
        ))),
    }
}

fn check_scope(scope: Scope, policies: &[PolicyId]) -> Result<(), CliError> {
    if scope == Scope::All {
        if let Some(p) = policies.iter().find(|p| p.requires_virtual_dispatch()) {
            return Err(CliError::Usage(format!(
                "policy '{p}' applies to virtual callsites only; use --scope virtual"
            )));
        }
    }
    Ok(())
}

// --- file plumbing ---------------------------------------------------------

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_facts(path: &Path) -> Result<ProgramFacts, CliError> {
    let bytes = read_file(path)?;
    let facts = io::parse_facts(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let diagnostics = validate_facts(&facts);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("{d}");
        }
        return Err(CliError::Data(format!(
            "{} failed validation with {} diagnostic(s)",
            path.display(),
            diagnostics.len()
        )));
    }
    Ok(facts)
}

fn load_gadgets(path: &Path, facts: &ProgramFacts) -> Result<GadgetAnnotations, CliError> {
    let bytes = read_file(path)?;
    let gadgets = io::parse_gadgets(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let diagnostics = validate_gadgets(facts, &gadgets);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("{d}");
        }
        return Err(CliError::Data(format!(
            "{} failed validation with {} diagnostic(s)",
            path.display(),
            diagnostics.len()
        )));
    }
    Ok(gadgets)
}

/// Write the fully rendered document; stdout when no path was given.
fn emit(out: Option<&Path>, rendered: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

// --- subcommands -------------------------------------------------------------

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let policies = parse_policies(&args.common.policies)?;
    let scope = parse_scope(&args.common.scope)?;
    let baseline = parse_baseline(&args.common.baseline)?;
    let format = parse_format(&args.common.format)?;
    check_scope(scope, &policies)?;

    let facts = load_facts(&args.common.facts)?;
    let gadgets = args
        .gadgets
        .as_deref()
        .map(|p| load_gadgets(p, &facts))
        .transpose()?;

    let request = AnalysisRequest {
        facts: &facts,
        policies,
        scope,
        baseline,
        gadgets: gadgets.as_ref(),
        with_rtr: args.rtr,
        options: EngineOptions::default(),
    };
    let doc = report::run_analysis(&request).map_err(|e| CliError::Data(e.to_string()))?;
    let rendered = match format {
        Format::Csv => report::render_report_csv(&doc),
        Format::Json => report::render_report_json(&doc),
        Format::Md => report::render_report_md(&doc),
    };
    emit(args.common.out.as_deref(), &rendered)
}

fn cmd_per_callsite(args: PerCallsiteArgs) -> Result<(), CliError> {
    let policies = parse_policies(&args.common.policies)?;
    let scope = parse_scope(&args.common.scope)?;
    let format = parse_format(&args.common.format)?;
    check_scope(scope, &policies)?;

    let facts = load_facts(&args.common.facts)?;
    let request = AnalysisRequest {
        facts: &facts,
        policies,
        scope,
        baseline: BaselineChoice::Auto,
        gadgets: None,
        with_rtr: false,
        options: EngineOptions::default(),
    };
    let doc =
        report::run_per_callsite(&request, args.expand).map_err(|e| CliError::Data(e.to_string()))?;
    let rendered = match format {
        Format::Csv => report::render_per_callsite_csv(&doc),
        Format::Json => report::render_per_callsite_json(&doc),
        Format::Md => report::render_per_callsite_md(&doc),
    };
    emit(args.common.out.as_deref(), &rendered)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let config = GeneratorConfig {
        seed: args.seed,
        n_classes: args.classes,
        n_free_functions: args.functions,
        n_callsites: args.callsites,
        max_bases: args.max_bases,
        ..GeneratorConfig::default()
    };
    let facts = generate_corpus(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let bytes = io::write_facts(&facts);
    eprintln!(
        "generated {} classes, {} functions, {} vtables, {} callsites (seed {})",
        facts.classes.len(),
        facts.functions.len(),
        facts.vtables.len(),
        facts.callsites.len(),
        args.seed
    );
    match args.out.as_deref() {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    let policies = parse_policies(&args.common.policies)?;
    let scope = parse_scope(&args.common.scope)?;
    let baseline = parse_baseline(&args.common.baseline)?;
    let format = parse_format(&args.common.format)?;
    check_scope(scope, &policies)?;

    let bytes = read_file(&args.common.facts)?;
    let probe: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Data(format!("{}: not valid JSON: {e}", args.common.facts.display())))?;

    let ranking = if probe.get("aggregates").is_some() {
        // Externally supplied normalized aggregates.
        let aggregates = io::parse_aggregates(&bytes)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.common.facts.display())))?;
        cfi_core::metrics::rank(&aggregates)
    } else {
        let facts = load_facts(&args.common.facts)?;
        let request = AnalysisRequest {
            facts: &facts,
            policies,
            scope,
            baseline,
            gadgets: None,
            with_rtr: false,
            options: EngineOptions::default(),
        };
        let doc = report::run_analysis(&request).map_err(|e| CliError::Data(e.to_string()))?;
        doc.ranking.ok_or_else(|| {
            CliError::Data("ranking unavailable: a selected policy has no callsite data".to_string())
        })?
    };

    let rendered = match format {
        Format::Csv => report::render_ranking_csv(&ranking),
        Format::Json => report::render_ranking_json(&ranking),
        Format::Md => report::render_ranking_md(&ranking),
    };
    emit(args.common.out.as_deref(), &rendered)
}
