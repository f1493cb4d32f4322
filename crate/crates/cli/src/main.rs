mod repro;
mod settings;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use hrpart::analysis::{emit_csv_digits, emit_fit_csv, scan, Variant};
use hrpart::estimators::{Estimator, EstimatorKind};
use hrpart::fitting::pipelines::{self, FitConfig, Pipeline, PipelineOutput};
use hrpart::fitting::{GridConfig, NRange, NSpec};
use hrpart::{Error, Execution, Real};
use serde_json::json;

use crate::repro::{Section, Suite};
use crate::settings::{Format, Settings, CACHE_ENV, MAX_DIGITS, MIN_DIGITS};

const EXIT_REPRO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Exact partition numbers, revised Hardy-Ramanujan estimates and the fits
/// behind their coefficients.
#[derive(Parser, Debug)]
#[command(name = "hrpart", version, after_help = after_help())]
struct Cli {
    /// JSON file whose keys mirror the global flags (plus a "fit" object);
    /// flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for cached exact tables.
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Build exact tables in memory only.
    #[arg(long, global = true)]
    no_cache: bool,

    /// Coefficient registry JSON replacing the published values.
    #[arg(long, global = true, value_name = "FILE")]
    coeffs: Option<PathBuf>,

    /// Significant digits for real-valued output.
    #[arg(long, global = true, value_name = "N")]
    digits: Option<usize>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Disable data-parallel evaluation.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!(
        "Ranges are written n, start:stop or start:stop:step.\n\
         Exact tables are cached in --cache-dir, ${CACHE_ENV}, or the user cache directory.\n\
         Exit status: 0 success, 1 failure, 2 usage error, 3 fit divergence."
    )
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print exact partition numbers p(n).
    Exact {
        #[arg(value_name = "N|RANGE")]
        range: NRange,
    },
    /// Evaluate an estimator.
    Estimate {
        #[arg(value_name = "KIND")]
        kind: EstimatorKind,
        #[arg(value_name = "N|RANGE")]
        range: NRange,
        /// Round half up to the nearest integer.
        #[arg(long)]
        round: bool,
    },
    /// Run a fitting pipeline.
    Fit(Box<FitArgs>),
    /// Relative-error report of an estimator against exact values.
    Report {
        #[arg(value_name = "KIND")]
        kind: EstimatorKind,
        #[arg(value_name = "RANGE")]
        range: NRange,
        /// Compare the rounded estimate.
        #[arg(long)]
        round: bool,
        /// Write to this file instead of standard output.
        #[arg(long, short, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Check every published claim: exact values, thresholds and fits.
    Repro {
        /// Run only these sections.
        #[arg(long, value_enum, value_delimiter = ',')]
        only: Vec<Section>,
        /// Write the error tables and fit traces as CSV into this directory.
        #[arg(long, value_name = "DIR")]
        emit_tables: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(value_name = "PIPELINE")]
    pipeline: Pipeline,
    /// Dataset n values.
    #[arg(long)]
    range: Option<NRange>,
    /// Grid for the shift parameter: low:high:step:digits.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridConfig>,
    /// Starting shift of the iteration, or the fixed shift of c1-linear.
    #[arg(long, allow_hyphen_values = true)]
    init_c2: Option<Real>,
    /// Starting exponent of the iteration, or the fixed exponent.
    #[arg(long, allow_hyphen_values = true)]
    init_e2: Option<Real>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Keep the exponent fixed during iteration.
    #[arg(long)]
    fix_e2: bool,
    /// Re-evaluate the scale from the data between shift steps.
    #[arg(long)]
    double_a: bool,
    /// Fit C4 at this shift instead of searching for it.
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<Real>,
    /// Largest odd n of the second odd-C2 cubic.
    #[arg(long)]
    split: Option<u64>,
    /// Write the result JSON here (a .meta.json sidecar is written beside it).
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Write the refit coefficient set as registry JSON.
    #[arg(long, value_name = "FILE")]
    emit_coeffs: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<GridConfig, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step, digits] = parts.as_slice() else {
        return Err("expected low:high:step:digits".into());
    };
    let digits: u32 = digits.parse().map_err(|_| format!("invalid digit count {digits:?}"))?;
    GridConfig::new(lo, hi, step, digits).map_err(|e| e.to_string())
}

impl FitArgs {
    /// Flags laid over the config file's fit section.
    fn merge(&self, mut base: FitConfig) -> FitConfig {
        if let Some(r) = self.range {
            base.range = Some(NSpec::Range(r));
        }
        if let Some(g) = &self.grid {
            base.grid = Some(g.clone());
        }
        if let Some(v) = &self.init_c2 {
            base.init_c2 = Some(v.clone());
        }
        if let Some(v) = &self.init_e2 {
            base.init_e2 = Some(v.clone());
        }
        if let Some(v) = self.max_iter {
            base.max_iter = Some(v);
        }
        if let Some(v) = &self.t0 {
            base.t0 = Some(v.clone());
        }
        if let Some(v) = self.split {
            base.split = Some(v);
        }
        base.fix_e2 |= self.fix_e2;
        base.double_a |= self.double_a;
        base
    }
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Config(_)) => EXIT_USAGE,
            Some(Error::FitDiverged(_)) => EXIT_DIVERGED,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow!(msg.into()),
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let file = match &cli.config {
        Some(p) => settings::FileConfig::load(p).map_err(|e| Failure { code: EXIT_USAGE, error: e })?,
        None => settings::FileConfig::default(),
    };
    let digits = cli.digits.or(file.digits).unwrap_or(MIN_DIGITS);
    if !(MIN_DIGITS..=MAX_DIGITS).contains(&digits) {
        return Err(usage(format!("--digits must be between {MIN_DIGITS} and {MAX_DIGITS}")));
    }
    let coeffs = cli.coeffs.clone().or(file.coeffs.clone());
    let settings = Settings {
        cache_dir: settings::resolve_cache_dir(cli.cache_dir.clone(), file.cache_dir.clone(), cli.no_cache || file.no_cache),
        registry: settings::load_registry(coeffs.as_deref())?,
        digits,
        format: cli.format.or(file.format),
        exec: if cli.sequential || file.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Exact { range } => cmd_exact(&settings, *range, &mut out),
        Command::Estimate { kind, range, round } => cmd_estimate(&settings, *kind, *range, *round, &mut out),
        Command::Fit(args) => cmd_fit(&settings, args, args.merge(file.fit.clone()), &mut out),
        Command::Report { kind, range, round, output } => {
            cmd_report(&settings, *kind, *range, *round, output.as_deref(), &mut out)
        }
        Command::Repro { only, emit_tables } => cmd_repro(&settings, only, emit_tables.as_deref(), &mut out),
    }
}

fn io_err(e: io::Error) -> Failure {
    anyhow::Error::from(e).into()
}

fn cmd_exact(s: &Settings, range: NRange, out: &mut impl Write) -> CmdResult {
    let table = s.table(range.stop)?;
    let values: Vec<(u64, String)> = range
        .values()
        .into_iter()
        .map(|n| Ok((n, table.get(n as usize)?.to_string())))
        .collect::<hrpart::Result<_>>()?;
    match s.format_or(Format::Plain) {
        Format::Plain if values.len() == 1 => writeln!(out, "{}", values[0].1).map_err(io_err)?,
        Format::Plain => {
            for (n, p) in &values {
                writeln!(out, "{n} {p}").map_err(io_err)?;
            }
        }
        Format::Csv => {
            writeln!(out, "n,p").map_err(io_err)?;
            for (n, p) in &values {
                writeln!(out, "{n},{p}").map_err(io_err)?;
            }
        }
        Format::Json => {
            let rows: Vec<_> = values.iter().map(|(n, p)| json!({ "n": n, "p": p })).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)?).map_err(io_err)?;
        }
    }
    Ok(0)
}

fn cmd_estimate(s: &Settings, kind: EstimatorKind, range: NRange, round: bool, out: &mut impl Write) -> CmdResult {
    let est: Estimator = s.registry.estimator(kind)?;
    let ns = range.values();
    let rows: Vec<(u64, std::result::Result<String, String>)> = s
        .exec
        .map(&ns, |&n| {
            let v = if round {
                est.eval_rounded(n).map(|v| v.to_string())
            } else {
                est.eval(n).map(|v| v.to_sci_string(s.digits))
            };
            (n, v)
        })
        .into_iter()
        .map(|(n, v)| match v {
            Ok(v) => Ok((n, Ok(v))),
            Err(e @ (Error::Domain(_) | Error::Range(_))) => Ok((n, Err(e.to_string()))),
            Err(e) => Err(e),
        })
        .collect::<hrpart::Result<_>>()?;

    match s.format_or(Format::Plain) {
        Format::Plain => {
            let single = rows.len() == 1;
            for (n, v) in &rows {
                let text = match v {
                    Ok(v) => v.clone(),
                    Err(e) => format!("error: {e}"),
                };
                if single {
                    writeln!(out, "{text}").map_err(io_err)?;
                } else {
                    writeln!(out, "{n} {text}").map_err(io_err)?;
                }
            }
        }
        Format::Csv => {
            writeln!(out, "n,estimate").map_err(io_err)?;
            for (n, v) in &rows {
                match v {
                    Ok(v) => writeln!(out, "{n},{v}"),
                    Err(e) => writeln!(out, "{n},\"error: {}\"", e.replace('"', "\"\"")),
                }
                .map_err(io_err)?;
            }
        }
        Format::Json => {
            let doc: Vec<_> = rows
                .iter()
                .map(|(n, v)| match v {
                    Ok(v) => json!({ "n": n, "estimate": v }),
                    Err(e) => json!({ "n": n, "error": e }),
                })
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?).map_err(io_err)?;
        }
    }
    Ok(if rows.iter().any(|(_, v)| v.is_ok()) { 0 } else { 1 })
}

fn cmd_fit(s: &Settings, args: &FitArgs, config: FitConfig, out: &mut impl Write) -> CmdResult {
    let started = Instant::now();
    let pipeline = args.pipeline;
    let table = s.table(pipelines::required_max_n(pipeline, &config)?)?;
    let output = match pipelines::run(pipeline, &table, &config, &s.registry, s.exec) {
        Ok(o) => o,
        Err(e @ Error::FitDiverged(_)) => {
            eprintln!("{pipeline}: {e}");
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };

    let json = serde_json::to_string_pretty(&output).map_err(anyhow::Error::from)?;
    match &args.output {
        Some(path) => {
            write_file(path, json.as_bytes())?;
            write_sidecar(path, pipeline.name(), s, started)?;
            write!(out, "{}", output.summary()).map_err(io_err)?;
        }
        None => match s.format_or(Format::Json) {
            Format::Json => {
                writeln!(out, "{json}").map_err(io_err)?;
                eprint!("{}", output.summary());
            }
            Format::Plain => write!(out, "{}", output.summary()).map_err(io_err)?,
            Format::Csv => {
                for fit in &output.results {
                    emit_fit_csv(fit, &mut *out)?;
                }
            }
        },
    }

    if let Some(path) = &args.emit_coeffs {
        let set = output
            .coefficient_set()?
            .ok_or_else(|| usage(format!("{pipeline} does not determine an estimator's coefficients")))?;
        let doc = serde_json::to_string_pretty(&vec![set]).map_err(anyhow::Error::from)?;
        write_file(path, doc.as_bytes())?;
    }

    if output.diverged() {
        dump_traces(&output)?;
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn dump_traces(output: &PipelineOutput) -> std::result::Result<(), Failure> {
    let stderr = io::stderr();
    let mut err = stderr.lock();
    for fit in output.results.iter().filter(|f| f.diverged) {
        writeln!(err, "{} [{}] diverged after {} iterations; trace:", output.pipeline, fit.label, fit.trace.len())
            .map_err(io_err)?;
        emit_fit_csv(fit, &mut err)?;
    }
    Ok(())
}

fn cmd_report(
    s: &Settings,
    kind: EstimatorKind,
    range: NRange,
    round: bool,
    output: Option<&Path>,
    out: &mut impl Write,
) -> CmdResult {
    let started = Instant::now();
    let table = s.table(range.stop)?;
    let est = s.registry.estimator(kind)?;
    let variant = if round { Variant::Rounded } else { Variant::Raw };
    let report = scan(&table, &est, range, variant, s.exec)?;

    let mut body = Vec::new();
    match s.format_or(Format::Csv) {
        Format::Csv => emit_csv_digits(&report, &mut body, s.digits)?,
        Format::Json => {
            body = report.to_json()?.into_bytes();
            body.push(b'\n');
        }
        Format::Plain => {
            let d = s.digits;
            for row in &report.rows {
                let line = match &row.value {
                    hrpart::analysis::RowValue::Value { estimate, rel_error, .. } => format!(
                        "{} {} {} {}",
                        row.n,
                        estimate.to_sci_string(d),
                        row.exact,
                        rel_error.to_sci_string(d)
                    ),
                    hrpart::analysis::RowValue::Error { error } => {
                        format!("{} error: {error} {}", row.n, row.exact)
                    }
                };
                writeln!(body, "{line}").map_err(io_err)?;
            }
            if let Some(st) = report.stats() {
                writeln!(
                    body,
                    "# |rel err| min {} at n = {}, max {} at n = {}, mean {}; {} undefined",
                    st.min.1.to_sci_string(6),
                    st.min.0,
                    st.max.1.to_sci_string(6),
                    st.max.0,
                    st.mean.to_sci_string(6),
                    st.undefined
                )
                .map_err(io_err)?;
            }
        }
    }
    match output {
        Some(path) => {
            write_file(path, &body)?;
            write_sidecar(path, "report", s, started)?;
        }
        None => out.write_all(&body).map_err(io_err)?,
    }
    Ok(0)
}

fn cmd_repro(s: &Settings, only: &[Section], emit: Option<&Path>, out: &mut impl Write) -> CmdResult {
    let started = Instant::now();
    let sections: Vec<Section> = if only.is_empty() { Section::ALL.to_vec() } else { only.to_vec() };
    let table = s.table(repro::TABLE_MAX_N)?;
    let suite = Suite {
        table: &table,
        registry: &s.registry,
        exec: s.exec,
        emit_dir: emit,
    };
    let mut write_err = None;
    let checks = suite.run(&sections, |c| {
        if let Err(e) = out.write_all(c.render().as_bytes()).and_then(|_| out.flush()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_err(e));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(
        out,
        "\n{} checks: {} passed, {failed} failed ({:.1}s)",
        checks.len(),
        checks.len() - failed,
        started.elapsed().as_secs_f64()
    )
    .map_err(io_err)?;
    if let Some(dir) = emit {
        write_sidecar(&dir.join("repro"), "repro", s, started)?;
    }
    Ok(if failed == 0 { 0 } else { EXIT_REPRO })
}

fn write_file(path: &Path, bytes: &[u8]) -> std::result::Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f.write_all(bytes).and_then(|_| f.flush()).map_err(io_err)
}

/// Run metadata kept out of the data file so that the data stays
/// reproducible byte for byte.
fn write_sidecar(data: &Path, command: &str, s: &Settings, started: Instant) -> std::result::Result<(), Failure> {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "tool": "hrpart",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "execution": s.exec,
        "finished_unix": finished,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&meta).map_err(anyhow::Error::from)?;
    write_file(&data.with_file_name(name), text.as_bytes())
}
