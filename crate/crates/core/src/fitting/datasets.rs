//! Data series extracted pointwise from exact partition numbers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{growth, rh, rh1, Rh1Coeffs};
use crate::exact::PartitionTable;
use crate::exec::Execution;
use crate::real::{consts, Real};

use super::DataSeries;

/// Inclusive arithmetic progression `start, start+step, …, ≤ stop`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NRange {
    pub start: u64,
    pub stop: u64,
    pub step: u64,
}

impl NRange {
    pub fn new(start: u64, stop: u64, step: u64) -> Result<Self> {
        let r = NRange { start, stop, step };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::config("range step must be at least 1"));
        }
        if self.start > self.stop {
            return Err(Error::config(format!(
                "range start {} exceeds stop {}",
                self.start, self.stop
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<u64> {
        (self.start..=self.stop).step_by(self.step as usize).collect()
    }

    /// `n = 20k + 100` for `k = 1..=395`.
    pub fn c1_default() -> Self {
        NRange { start: 120, stop: 8000, step: 20 }
    }

    /// `n = 20k + 60` for `k = 1..=397`.
    pub fn diff_default() -> Self {
        NRange { start: 80, stop: 8000, step: 20 }
    }

    /// `n = 3..=100`.
    pub fn small_default() -> Self {
        NRange { start: 3, stop: 100, step: 1 }
    }
}

impl fmt::Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Parses `start:stop[:step]` or a single `n`.
impl FromStr for NRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("invalid range bound {t:?} in {s:?}")))
        };
        match parts.as_slice() {
            [n] => NRange::new(num(n)?, num(n)?, 1),
            [a, b] => NRange::new(num(a)?, num(b)?, 1),
            [a, b, c] => NRange::new(num(a)?, num(b)?, num(c)?),
            _ => Err(Error::config(format!("invalid range {s:?}"))),
        }
    }
}

/// The `n` values of a dataset: a range or an explicit list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NSpec {
    // Listed first: serde would otherwise read `[a, b, c]` as a range.
    List(Vec<u64>),
    Range(NRange),
}

impl NSpec {
    pub fn values(&self) -> Result<Vec<u64>> {
        match self {
            NSpec::Range(r) => {
                r.validate()?;
                Ok(r.values())
            }
            NSpec::List(v) if v.is_empty() => Err(Error::config("empty n list")),
            NSpec::List(v) => Ok(v.clone()),
        }
    }
}

impl From<NRange> for NSpec {
    fn from(r: NRange) -> Self {
        NSpec::Range(r)
    }
}

fn build(
    label: &str,
    table: &PartitionTable,
    n_values: &[u64],
    exec: Execution,
    f: impl Fn(u64, &Real) -> Result<Real> + Sync + Send,
) -> Result<DataSeries> {
    if let Some(&bad) = n_values.iter().find(|&&n| n as usize > table.max_n()) {
        return Err(Error::Index {
            index: bad as usize,
            len: table.len(),
        });
    }
    let points = exec
        .map(n_values, |&n| {
            if n == 0 {
                return Err(Error::domain(format!("{label} is undefined at n = 0")));
            }
            let p = table.p_real(n as usize)?;
            Ok((Real::from_u64(n), f(n, &p)?))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    DataSeries::new(label, points)
}

/// `C₁(n) = (3/2)·ln(4√3·n·p(n))²/π² − n`, the shift that makes the
/// Hardy–Ramanujan exponent exact.
pub fn build_c1_series(table: &PartitionTable, n_values: &[u64], exec: Execution) -> Result<DataSeries> {
    build("C1", table, n_values, exec, |n, p| {
        let x = Real::from_u64(n);
        let l = (Real::from_u64(4) * consts::sqrt3() * &x * p).ln();
        Ok(Real::ratio(3, 2) * l.square() / consts::pi().square() - x)
    })
}

/// `C₂(n) = exp(K√n)/(4√3·p(n)) − n`, the shift that makes the
/// Hardy–Ramanujan denominator exact.
pub fn build_c2_series(table: &PartitionTable, n_values: &[u64], exec: Execution) -> Result<DataSeries> {
    build("C2", table, n_values, exec, |n, p| {
        let x = Real::from_u64(n);
        Ok(growth(&x) / (Real::from_u64(4) * consts::sqrt3() * p) - x)
    })
}

/// Denominator shift left over once the exponent carries the fitted `C₁`:
/// `exp(K·√(n + a/√(n+c) + b))/(4√3·p(n)) − n`.
pub fn build_residual_c2_series(
    table: &PartitionTable,
    n_values: &[u64],
    c1: &Rh1Coeffs,
    exec: Execution,
) -> Result<DataSeries> {
    build("C2 after C1", table, n_values, exec, |n, p| {
        let x = Real::from_u64(n);
        Ok(&x * (rh1(n, c1)? / p) - x)
    })
}

/// `R_h(n)/p(n)`.
pub fn build_ratio_series(table: &PartitionTable, n_values: &[u64], exec: Execution) -> Result<DataSeries> {
    build("Rh/p", table, n_values, exec, |n, p| Ok(rh(n)? / p))
}

/// `(y − 1)⁻²` of a ratio series, which is close to linear in `n`.
pub fn transform_ratio_series(ratio: &DataSeries) -> Result<DataSeries> {
    ratio.map_y("(Rh/p - 1)^-2", |x, y| {
        let excess = y - Real::one();
        if !excess.is_positive() {
            return Err(Error::domain(format!("ratio ≤ 1 at n = {x:.6}")));
        }
        Ok(excess.square().recip())
    })
}

/// Which correction term a difference series isolates.
#[derive(Clone, Debug, PartialEq)]
pub enum DiffTarget {
    /// `(π·exp(K√n)/(12√2·(R_h − p)))²`, fitted by a cubic.
    C3,
    /// `√2·t₀·π·exp(K√(n−t₀))/(24·(R_h − p))`.
    C4 { t0: Real },
    /// `π·exp(K√n)/(12√2·(R_h − p))`.
    C5,
}

pub fn build_diff_target_series(
    table: &PartitionTable,
    n_values: &[u64],
    target: &DiffTarget,
    exec: Execution,
) -> Result<DataSeries> {
    let label = match target {
        DiffTarget::C3 => "C3 target",
        DiffTarget::C4 { .. } => "C4 target",
        DiffTarget::C5 => "C5 target",
    };
    build(label, table, n_values, exec, |n, p| {
        let x = Real::from_u64(n);
        let diff = rh(n)? - p;
        if !diff.is_positive() {
            return Err(Error::domain(format!("R_h(n) − p(n) ≤ 0 at n = {n}")));
        }
        let c5 = || consts::pi() * growth(&x) / (Real::from_u64(12) * consts::sqrt2() * &diff);
        match target {
            DiffTarget::C3 => Ok(c5().square()),
            DiffTarget::C5 => Ok(c5()),
            DiffTarget::C4 { t0 } => {
                let u = &x - t0;
                if !u.is_positive() {
                    return Err(Error::domain(format!("n ≤ t₀ at n = {n}")));
                }
                Ok(consts::sqrt2() * t0 * consts::pi() * growth(&u)
                    / (Real::from_u64(24) * &diff))
            }
        }
    })
}
