//! The `tea` command-line tool.
//!
//! Exit codes: 0 on success, 1 when error-severity findings exist (or the
//! root claim is unsupported for `eval`, or `--strict` coverage fails), 2 on
//! usage, I/O or parse failures.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;
use tea_core::canonical::{from_canonical_json, to_canonical_bytes, to_canonical_json};
use tea_core::diagnostic::{count_by_severity, sort_diagnostics};
use tea_core::dsl::{format as format_tea, parse_bytes};
use tea_core::evaluate::{evaluate_case_with_map, EvaluationResult, FsStores, Status};
use tea_core::fairness::{load_map, map_coverage, ConsiderationMap, CoverageStatus, DEFAULT_MAP};
use tea_core::lifecycle::{stage_coverage, stage_registry};
use tea_core::report::{export_dot, render_report, ReportInputs};
use tea_core::validate::validate_with_map;
use tea_core::{AssuranceCase, Diagnostic};
use tea_service::bodies;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

/// Environment variable naming a directory searched for `{map}.json` before
/// the bundled maps.
pub const MAP_DIR_ENV: &str = "TEA_MAP_DIR";

#[derive(Debug, Parser)]
#[command(name = "tea", version, about = "Author, check and evaluate fairness assurance cases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
    #[value(name = "md", alias = "markdown")]
    Markdown,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a case.
    Check {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[arg(long, default_value = DEFAULT_MAP)]
        map: String,
    },
    /// Report lifecycle stage and consideration coverage.
    Coverage {
        file: PathBuf,
        #[arg(long, default_value = DEFAULT_MAP)]
        map: String,
        /// Fail when a stage is uncovered or a consideration is unaddressed.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Evaluate evidence and propagate support to the root claim.
    Eval {
        file: PathBuf,
        #[arg(long)]
        evidence_dir: PathBuf,
        /// Dataset directory; defaults to `<evidence-dir>/datasets`.
        #[arg(long)]
        datasets: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_MAP)]
        map: String,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Render the case as DOT, canonical JSON or a Markdown report.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// Evaluate first and include statuses in DOT and Markdown output.
        #[arg(long)]
        evidence_dir: Option<PathBuf>,
        #[arg(long)]
        datasets: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_MAP)]
        map: String,
    },
    /// Print the case in canonical `.tea` form.
    Fmt {
        file: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Serve the HTTP API over a store directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "store")]
        store: PathBuf,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
}

/// Failure that ends the command with exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn json(&mut self, value: &Value) -> Result<(), Fatal> {
        self.out.write_all(&to_canonical_bytes(value))?;
        Ok(())
    }
}

/// Runs the tool with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(Fatal(message)) => {
            let _ = writeln!(io.err, "tea: {message}");
            EXIT_FATAL
        }
    }
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Result<i32, Fatal> {
    match command {
        Command::Check { file, format, map } => check(&file, format, &map, io),
        Command::Coverage {
            file,
            map,
            strict,
            format,
        } => coverage(&file, &map, strict, format, io),
        Command::Eval {
            file,
            evidence_dir,
            datasets,
            map,
            format,
        } => eval(&file, &evidence_dir, datasets, &map, format, io),
        Command::Export {
            file,
            format,
            output,
            evidence_dir,
            datasets,
            map,
        } => export(&file, format, output.as_deref(), evidence_dir, datasets, &map, io),
        Command::Fmt { file, write } => fmt(&file, write, io),
        Command::Serve { port, store, host } => {
            let addr = SocketAddr::new(host, port);
            let _ = writeln!(io.err, "serving {} on http://{addr}", store.display());
            tea_service::serve(addr, store)?;
            Ok(EXIT_OK)
        }
    }
}

fn map_dir() -> Option<PathBuf> {
    std::env::var_os(MAP_DIR_ENV).map(PathBuf::from)
}

fn load(map_id: &str) -> Result<ConsiderationMap, Fatal> {
    Ok(load_map(map_id, map_dir().as_deref())?)
}

fn print_diagnostic(sink: &mut dyn Write, path: &Path, d: &Diagnostic) {
    let _ = writeln!(sink, "{}: {d}", path.display());
}

/// A parsed case plus parser warnings. Parse errors are printed and end the
/// command.
struct Loaded {
    case: AssuranceCase,
    warnings: Vec<Diagnostic>,
}

fn read_case(path: &Path, io: &mut Io<'_>, json_errors: bool) -> Result<Result<Loaded, i32>, Fatal> {
    let bytes = std::fs::read(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let case = from_canonical_json(&bytes).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
        return Ok(Ok(Loaded {
            case,
            warnings: Vec::new(),
        }));
    }
    let outcome = parse_bytes(&bytes);
    match outcome.case {
        Some(case) => Ok(Ok(Loaded {
            case,
            warnings: outcome.diagnostics,
        })),
        None => {
            if json_errors {
                let mut sorted = outcome.diagnostics.clone();
                sort_diagnostics(&mut sorted);
                io.json(&bodies::diagnostics(&sorted))?;
            }
            for d in &outcome.diagnostics {
                print_diagnostic(io.err, path, d);
            }
            Ok(Err(EXIT_FATAL))
        }
    }
}

macro_rules! load_case {
    ($path:expr, $io:expr, $json:expr) => {
        match read_case($path, $io, $json)? {
            Ok(loaded) => loaded,
            Err(code) => return Ok(code),
        }
    };
}

fn check(path: &Path, format: OutputFormat, map_id: &str, io: &mut Io<'_>) -> Result<i32, Fatal> {
    let map = load(map_id)?;
    let loaded = load_case!(path, io, format == OutputFormat::Json);
    let mut diags = loaded.warnings;
    diags.extend(validate_with_map(&loaded.case, &map));
    sort_diagnostics(&mut diags);
    let (errors, warnings) = count_by_severity(&diags);
    match format {
        OutputFormat::Json => io.json(&bodies::diagnostics(&diags))?,
        OutputFormat::Text => {
            for d in &diags {
                print_diagnostic(io.out, path, d);
            }
            writeln!(io.out, "{errors} errors, {warnings} warnings")?;
        }
    }
    Ok(if errors > 0 { EXIT_FINDINGS } else { EXIT_OK })
}

fn coverage(path: &Path, map_id: &str, strict: bool, format: OutputFormat, io: &mut Io<'_>) -> Result<i32, Fatal> {
    let map = load(map_id)?;
    let loaded = load_case!(path, io, false);
    let case = &loaded.case;
    let stages = stage_coverage(case);
    let considerations = map_coverage(case, &map);
    let unaddressed: Vec<&str> = considerations.unaddressed().collect();
    match format {
        OutputFormat::Json => io.json(&bodies::coverage(case, &map))?,
        OutputFormat::Text => {
            writeln!(io.out, "Lifecycle stages")?;
            for s in stage_registry() {
                writeln!(io.out, "  {:<36} {}", s.id, stages.count(s.id))?;
            }
            let uncovered = if stages.uncovered.is_empty() {
                "none".to_owned()
            } else {
                stages.uncovered.join(", ")
            };
            writeln!(io.out, "Uncovered stages: {uncovered}")?;
            writeln!(io.out, "Considerations ({})", map.id)?;
            for (id, status) in &considerations.per_consideration {
                let claims = &considerations.addressing_claims[id];
                let by = if *status == CoverageStatus::Addressed {
                    let ids: Vec<&str> = claims.iter().map(|c| c.as_str()).collect();
                    format!(" ({})", ids.join(", "))
                } else {
                    String::new()
                };
                writeln!(io.out, "  {id:<10} {status}{by}")?;
            }
        }
    }
    if strict {
        for s in &stages.uncovered {
            writeln!(io.err, "{}: error: stage {s} is not covered by any claim", path.display())?;
        }
        for c in &unaddressed {
            writeln!(io.err, "{}: error: consideration {c} is unaddressed", path.display())?;
        }
        if !stages.uncovered.is_empty() || !unaddressed.is_empty() {
            return Ok(EXIT_FINDINGS);
        }
    }
    Ok(EXIT_OK)
}

fn evaluate(
    case: &AssuranceCase,
    evidence_dir: &Path,
    datasets: Option<PathBuf>,
    map: &ConsiderationMap,
) -> Result<EvaluationResult, Vec<Diagnostic>> {
    let datasets = datasets.unwrap_or_else(|| evidence_dir.join("datasets"));
    let fs = FsStores::new(evidence_dir, datasets);
    evaluate_case_with_map(case, fs.stores(), map).map_err(|e| e.diagnostics)
}

fn eval(
    path: &Path,
    evidence_dir: &Path,
    datasets: Option<PathBuf>,
    map_id: &str,
    format: OutputFormat,
    io: &mut Io<'_>,
) -> Result<i32, Fatal> {
    let map = load(map_id)?;
    let loaded = load_case!(path, io, false);
    let case = &loaded.case;
    let result = match evaluate(case, evidence_dir, datasets, &map) {
        Ok(r) => r,
        Err(diags) => {
            if format == OutputFormat::Json {
                let mut body = bodies::error(
                    "PreconditionFailed",
                    format!(
                        "case has {} blocking diagnostic(s); evaluation requires a structurally valid case",
                        diags.len()
                    ),
                );
                body["diagnostics"] = bodies::diagnostics(&diags);
                io.json(&body)?;
            }
            for d in &diags {
                print_diagnostic(io.err, path, d);
            }
            return Ok(EXIT_FINDINGS);
        }
    };
    match format {
        OutputFormat::Json => io.json(&bodies::evaluation(case, &result))?,
        OutputFormat::Text => {
            let root = result.root_status;
            let attested = if root.attested_only == Some(true) {
                " (attested only)"
            } else {
                ""
            };
            writeln!(io.out, "root {}: {}{attested}", case.root_id, root.status)?;
            writeln!(io.out, "Claims")?;
            for (id, s) in &result.claim_statuses {
                writeln!(io.out, "  {:<10} {}", id.as_str(), s.status)?;
            }
            writeln!(io.out, "Evidence")?;
            for (id, v) in &result.evidence_verdicts {
                writeln!(io.out, "  {:<10} {:<13} {}", id.as_str(), v.verdict.to_string(), v.notes.join("; "))?;
            }
        }
    }
    Ok(if result.root_status.status == Status::Unsupported {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn export(
    path: &Path,
    format: ExportFormat,
    output: Option<&Path>,
    evidence_dir: Option<PathBuf>,
    datasets: Option<PathBuf>,
    map_id: &str,
    io: &mut Io<'_>,
) -> Result<i32, Fatal> {
    let map = load(map_id)?;
    let loaded = load_case!(path, io, false);
    let case = &loaded.case;
    let evaluation = match &evidence_dir {
        Some(dir) => evaluate(case, dir, datasets, &map).ok(),
        None => None,
    };
    let bytes = match format {
        ExportFormat::Json => to_canonical_json(case),
        ExportFormat::Dot => export_dot(case, evaluation.as_ref()).into_bytes(),
        ExportFormat::Markdown => {
            let mut diags = loaded.warnings;
            diags.extend(validate_with_map(case, &map));
            sort_diagnostics(&mut diags);
            render_report(&ReportInputs {
                case,
                diagnostics: &diags,
                stages: &stage_coverage(case),
                map: &map,
                coverage: &map_coverage(case, &map),
                evaluation: evaluation.as_ref(),
            })
            .into_bytes()
        }
    };
    match output {
        Some(out) => std::fs::write(out, &bytes).map_err(|e| Fatal(format!("{}: {e}", out.display())))?,
        None => io.out.write_all(&bytes)?,
    }
    Ok(EXIT_OK)
}

fn fmt(path: &Path, write: bool, io: &mut Io<'_>) -> Result<i32, Fatal> {
    let loaded = load_case!(path, io, false);
    let text = format_tea(&loaded.case);
    if write {
        let current = std::fs::read(path).unwrap_or_default();
        if current != text.as_bytes() {
            std::fs::write(path, &text).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
        }
    } else {
        io.out.write_all(text.as_bytes())?;
    }
    Ok(EXIT_OK)
}
