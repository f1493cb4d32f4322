//! Relative-error reports of estimators against exact partition numbers,
//! threshold checks over them, and CSV/JSON output.

use std::fmt;
use std::io::{Read, Write};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{round_half_up, Estimator, EstimatorKind};
use crate::exact::PartitionTable;
use crate::exec::Execution;
use crate::fitting::{DataSeries, FitResult, NRange};
use crate::real::{Real, DISPLAY_DIGITS};

/// Whether the estimate is compared as a real value or after rounding to the
/// nearest integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Raw,
    Rounded,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Raw => "raw",
            Variant::Rounded => "rounded",
        })
    }
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowValue {
    Value {
        estimate: Real,
        rel_error: Real,
        abs_rel_error: Real,
    },
    /// The estimator is undefined at this `n`.
    Error { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    #[serde(with = "decimal")]
    pub exact: BigUint,
    #[serde(flatten)]
    pub value: RowValue,
}

impl ReportRow {
    pub fn abs_rel_error(&self) -> Option<&Real> {
        match &self.value {
            RowValue::Value { abs_rel_error, .. } => Some(abs_rel_error),
            RowValue::Error { .. } => None,
        }
    }

    pub fn estimate(&self) -> Option<&Real> {
        match &self.value {
            RowValue::Value { estimate, .. } => Some(estimate),
            RowValue::Error { .. } => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self.value, RowValue::Error { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: EstimatorKind,
    pub variant: Variant,
    pub range: NRange,
    pub rows: Vec<ReportRow>,
}

/// Extremes and mean of `|relative error|` over the defined rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportStats {
    pub min: (u64, Real),
    pub max: (u64, Real),
    pub mean: Real,
    pub defined: usize,
    pub undefined: usize,
}

impl ErrorReport {
    pub fn row(&self, n: u64) -> Option<&ReportRow> {
        self.rows
            .binary_search_by_key(&n, |r| r.n)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// The `n` at which the estimator was undefined.
    pub fn undefined_at(&self) -> Vec<u64> {
        self.rows.iter().filter(|r| r.is_error()).map(|r| r.n).collect()
    }

    pub fn stats(&self) -> Option<ReportStats> {
        let mut defined = self
            .rows
            .iter()
            .filter_map(|r| r.abs_rel_error().map(|e| (r.n, e)));
        let (n0, e0) = defined.next()?;
        let mut min = (n0, e0.clone());
        let mut max = (n0, e0.clone());
        let mut sum = e0.clone();
        let mut count = 1usize;
        for (n, e) in defined {
            if e < &min.1 {
                min = (n, e.clone());
            }
            if e > &max.1 {
                max = (n, e.clone());
            }
            sum = sum + e;
            count += 1;
        }
        Some(ReportStats {
            min,
            max,
            mean: sum / Real::from_u64(count as u64),
            defined: count,
            undefined: self.rows.len() - count,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Evaluates one row. Domain and range failures become error rows.
pub fn evaluate_row(table: &PartitionTable, estimator: &Estimator, variant: Variant, n: u64) -> Result<ReportRow> {
    let exact = table.get(n as usize)?.clone();
    let outcome = estimator.eval(n).and_then(|v| match variant {
        Variant::Raw => Ok(v),
        Variant::Rounded => round_half_up(&v).map(|r| Real::from_bigint(&r)),
    });
    let value = match outcome {
        Ok(estimate) => {
            let p = Real::from_biguint(&exact);
            let rel_error = (&estimate - &p) / &p;
            RowValue::Value {
                abs_rel_error: rel_error.abs(),
                rel_error,
                estimate,
            }
        }
        Err(e @ (Error::Domain(_) | Error::Range(_))) => RowValue::Error {
            error: e.to_string(),
        },
        Err(e) => return Err(e),
    };
    Ok(ReportRow { n, exact, value })
}

/// Relative errors of `estimator` over `range`.
pub fn scan(
    table: &PartitionTable,
    estimator: &Estimator,
    range: NRange,
    variant: Variant,
    exec: Execution,
) -> Result<ErrorReport> {
    range.validate()?;
    if range.stop as usize > table.max_n() {
        return Err(Error::Index {
            index: range.stop as usize,
            len: table.len(),
        });
    }
    let ns = range.values();
    if ns.is_empty() {
        return Err(Error::config("empty scan range"));
    }
    let rows = exec
        .map(&ns, |&n| evaluate_row(table, estimator, variant, n))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport {
        kind: estimator.kind(),
        variant,
        range,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Every `|relative error| < bound`.
    AllBelow,
    /// Every `|relative error| > bound`.
    AllAbove,
    /// Every relative error is exactly zero.
    AllExact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub n_low: u64,
    pub n_high: u64,
    pub bound: Real,
    pub direction: Direction,
}

impl Clause {
    pub fn below(n_low: u64, n_high: u64, bound: &str) -> Self {
        Self::make(n_low, n_high, bound, Direction::AllBelow)
    }

    pub fn above(n_low: u64, n_high: u64, bound: &str) -> Self {
        Self::make(n_low, n_high, bound, Direction::AllAbove)
    }

    pub fn exact(n_low: u64, n_high: u64) -> Self {
        Self::make(n_low, n_high, "0", Direction::AllExact)
    }

    fn make(n_low: u64, n_high: u64, bound: &str, direction: Direction) -> Self {
        Clause {
            n_low,
            n_high,
            bound: Real::parse_decimal(bound).expect("bound literal"),
            direction,
        }
    }

    fn holds(&self, e: &Real) -> bool {
        match self.direction {
            Direction::AllBelow => e < &self.bound,
            Direction::AllAbove => e > &self.bound,
            Direction::AllExact => e.is_zero(),
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.direction {
            Direction::AllBelow => format!("< {}", self.bound.to_sci_string(3)),
            Direction::AllAbove => format!("> {}", self.bound.to_sci_string(3)),
            Direction::AllExact => "= 0".to_string(),
        };
        write!(f, "|rel err| {rel} for {} ≤ n ≤ {}", self.n_low, self.n_high)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub kind: EstimatorKind,
    pub variant: Variant,
    pub clauses: Vec<Clause>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClauseOutcome {
    pub clause: Clause,
    pub passed: bool,
    /// First `n` violating the clause, with its `|relative error|`.
    pub witness: Option<(u64, Real)>,
    /// The value closest to violating the clause (largest error for
    /// `AllBelow`/`AllExact`, smallest for `AllAbove`).
    pub extreme: Option<(u64, Real)>,
    pub checked: usize,
    /// Rows skipped because the estimator is undefined there.
    pub skipped: usize,
}

/// Evaluates every clause of `spec` on `report`.
pub fn check_thresholds(report: &ErrorReport, spec: &ThresholdSpec) -> Result<Vec<ClauseOutcome>> {
    if report.kind != spec.kind || report.variant != spec.variant {
        return Err(Error::config(format!(
            "report is for {} {} but the spec is for {} {}",
            report.variant, report.kind, spec.variant, spec.kind
        )));
    }
    spec.clauses
        .iter()
        .map(|clause| {
            if clause.n_low > clause.n_high {
                return Err(Error::config(format!(
                    "clause range {}..{} is empty",
                    clause.n_low, clause.n_high
                )));
            }
            if clause.direction != Direction::AllExact && !clause.bound.is_positive() {
                return Err(Error::config("clause bound must be positive"));
            }
            let mut outcome = ClauseOutcome {
                clause: clause.clone(),
                passed: true,
                witness: None,
                extreme: None,
                checked: 0,
                skipped: 0,
            };
            for n in clause.n_low..=clause.n_high {
                let row = report.row(n).ok_or_else(|| {
                    Error::config(format!("report does not cover n = {n} required by {clause}"))
                })?;
                let Some(e) = row.abs_rel_error() else {
                    outcome.skipped += 1;
                    continue;
                };
                outcome.checked += 1;
                let more_extreme = match &outcome.extreme {
                    None => true,
                    Some((_, x)) => match clause.direction {
                        Direction::AllAbove => e < x,
                        _ => e > x,
                    },
                };
                if more_extreme {
                    outcome.extreme = Some((n, e.clone()));
                }
                if !clause.holds(e) && outcome.witness.is_none() {
                    outcome.passed = false;
                    outcome.witness = Some((n, e.clone()));
                }
            }
            Ok(outcome)
        })
        .collect()
}

/// Error bounds stated for the published estimators.
pub fn published_thresholds() -> Vec<ThresholdSpec> {
    vec![
        ThresholdSpec {
            kind: EstimatorKind::Rh,
            variant: Variant::Raw,
            clauses: vec![
                Clause::above(1, 25, "0.09"),
                Clause::above(26, 220, "0.03"),
                Clause::above(1, 1000, "0.014"),
                Clause::above(1000, 10000, "0.0044"),
            ],
        },
        ThresholdSpec {
            kind: EstimatorKind::Rh1,
            variant: Variant::Raw,
            clauses: vec![
                Clause::below(100, 10000, "6e-7"),
                Clause::below(26, 10000, "1e-3"),
                Clause::below(11, 10000, "1e-2"),
                Clause::below(1000, 3000, "1e-8"),
                Clause::below(3000, 10000, "5.3e-9"),
            ],
        },
        ThresholdSpec {
            kind: EstimatorKind::Rh3,
            variant: Variant::Rounded,
            clauses: vec![
                Clause::below(2501, 9999, "3e-9"),
                Clause::exact(2, 11),
                Clause::exact(15, 15),
            ],
        },
        ThresholdSpec {
            kind: EstimatorKind::Rh4,
            variant: Variant::Rounded,
            clauses: vec![
                Clause::below(2501, 9999, "1e-9"),
                Clause::exact(2, 11),
                Clause::exact(15, 15),
            ],
        },
        ThresholdSpec {
            kind: EstimatorKind::Rh0,
            variant: Variant::Rounded,
            clauses: vec![Clause::below(3, 80, "4e-5")],
        },
    ]
}

const REPORT_HEADER: [&str; 5] = ["n", "estimate", "exact", "rel_error", "abs_rel_error"];
const ERROR_PREFIX: &str = "error: ";

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn sci(v: &Real) -> String {
    v.to_sci_string(DISPLAY_DIGITS)
}

/// Writes a report as CSV. Undefined rows carry `error: <reason>` in the
/// estimate column and leave the error columns empty.
pub fn emit_csv<W: Write>(report: &ErrorReport, out: W) -> Result<()> {
    emit_csv_digits(report, out, DISPLAY_DIGITS)
}

/// [`emit_csv`] with `digits` significant digits per real column.
pub fn emit_csv_digits<W: Write>(report: &ErrorReport, out: W, digits: usize) -> Result<()> {
    if digits == 0 {
        return Err(Error::config("at least one significant digit is required"));
    }
    let sci = |v: &Real| v.to_sci_string(digits);
    let mut w = csv_writer(out);
    w.write_record(REPORT_HEADER)?;
    for row in &report.rows {
        let n = row.n.to_string();
        let exact = row.exact.to_string();
        match &row.value {
            RowValue::Value {
                estimate,
                rel_error,
                abs_rel_error,
            } => w.write_record([
                n,
                sci(estimate),
                exact,
                sci(rel_error),
                sci(abs_rel_error),
            ])?,
            RowValue::Error { error } => w.write_record([
                n,
                format!("{ERROR_PREFIX}{error}"),
                exact,
                String::new(),
                String::new(),
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the rows of a CSV written by [`emit_csv`].
pub fn parse_report_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let n = field(0)
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("invalid n {:?}", field(0))))?;
        let exact = field(2)
            .parse::<BigUint>()
            .map_err(|_| Error::Parse(format!("invalid exact value {:?}", field(2))))?;
        let value = match field(1).strip_prefix(ERROR_PREFIX) {
            Some(msg) => RowValue::Error {
                error: msg.to_string(),
            },
            None => RowValue::Value {
                estimate: field(1).parse()?,
                rel_error: field(3).parse()?,
                abs_rel_error: field(4).parse()?,
            },
        };
        rows.push(ReportRow { n, exact, value });
    }
    Ok(rows)
}

/// Writes `(x, y)` pairs of a data series.
pub fn emit_series_csv<W: Write>(series: &DataSeries, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["x", "y"])?;
    for (x, y) in series.points() {
        w.write_record([sci(x), sci(y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the trace of a fit, one column per coefficient. A fit without a
/// trace is written as a single row.
pub fn emit_fit_csv<W: Write>(fit: &FitResult, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let names: Vec<String> = match fit.trace.first() {
        Some(t) => t.coefficients.keys().cloned().collect(),
        None => fit.coefficients.keys().cloned().collect(),
    };
    let mut header = vec!["index".to_string()];
    header.extend(names.iter().cloned());
    header.push("avg_error".into());
    w.write_record(&header)?;
    let mut write = |index: String, cs: &std::collections::BTreeMap<String, Real>, avg: &Real| {
        let mut rec = vec![index];
        rec.extend(names.iter().map(|k| cs.get(k).map(sci).unwrap_or_default()));
        rec.push(sci(avg));
        w.write_record(&rec)
    };
    if fit.trace.is_empty() {
        write("final".into(), &fit.coefficients, &fit.avg_error)?;
    } else {
        for t in &fit.trace {
            write(t.index.to_string(), &t.coefficients, &t.avg_error)?;
        }
    }
    w.flush()?;
    Ok(())
}
