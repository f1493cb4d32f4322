//! Least-squares fitting of the correction terms.
//!
//! The building blocks are [`linear_lsq`] (Householder QR at working
//! precision), the dataset builders in [`datasets`], the digit-refining grid
//! search [`grid_refine`] for a nonlinear shift parameter, and the alternating
//! refinement [`iterate_c1_fit`] of `a/(x+c)^e + b`. [`pipelines`] wires them
//! into the named fits exposed on the command line.

pub mod datasets;
mod lsq;
pub mod pipelines;
mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub use datasets::{
    build_c1_series, build_c2_series, build_diff_target_series, build_ratio_series,
    build_residual_c2_series, transform_ratio_series, DiffTarget, NRange, NSpec,
};
pub use lsq::{linear_lsq, linear_lsq_columns, residual_orthogonality, LinearFit};
pub use search::{
    fit_at_shift, fit_at_shift_result, grid_minimize, grid_refine, Candidate, GridOutcome, iterate_c1_fit, refine_exponent_scale, refine_scale,
    refine_shift, ExponentScale, GridModel, IterateConfig, RefineMode,
};

/// Ordered `(x, y)` samples to be fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    pub label: String,
    points: Vec<(Real, Real)>,
}

impl DataSeries {
    /// Requires a nonempty series with strictly increasing `x`.
    pub fn new(label: impl Into<String>, points: Vec<(Real, Real)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("data series is empty"));
        }
        if let Some(i) = (1..points.len()).find(|&i| points[i].0 <= points[i - 1].0) {
            return Err(Error::config(format!(
                "data series x values are not strictly increasing at index {i}"
            )));
        }
        Ok(DataSeries {
            label: label.into(),
            points,
        })
    }

    pub fn points(&self) -> &[(Real, Real)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = &Real> {
        self.points.iter().map(|(x, _)| x)
    }

    pub fn ys(&self) -> impl Iterator<Item = &Real> {
        self.points.iter().map(|(_, y)| y)
    }

    /// Applies `f` to every `y`, keeping `x`.
    pub fn map_y(&self, label: impl Into<String>, f: impl Fn(&Real, &Real) -> Result<Real>) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|(x, y)| Ok((x.clone(), f(x, y)?)))
            .collect::<Result<Vec<_>>>()?;
        DataSeries::new(label, points)
    }

    /// Keeps the points whose `x` satisfies `keep`.
    pub fn filter_x(&self, label: impl Into<String>, keep: impl Fn(&Real) -> bool) -> Result<Self> {
        let points = self.points.iter().filter(|(x, _)| keep(x)).cloned().collect();
        DataSeries::new(label, points)
    }
}

/// Fitted model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Model {
    /// `a/(x+c)^e + b`
    ShiftedPower,
    /// `a·√(x+c) + b`
    ShiftedSqrt,
    /// `slope·x + intercept`
    Line,
    /// `x + c`
    ShiftedLine,
    /// `a·x³ + b·x² + c·x + d`
    Cubic,
    /// `a·u^1.5 + b·u + c·u^0.5 + d`, with `u = x − t0` when `t0` is present
    #[serde(rename = "BASIS_15_10_05_CONST")]
    HalfPowers,
}

/// One iterate or grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub coefficients: BTreeMap<String, Real>,
    pub avg_error: Real,
}

/// Outcome of a fit.
///
/// For iterative and grid fits `trace` lists every evaluated state and
/// `avg_error` is the minimum over it. The shift search in
/// [`pipelines::fit_t0_and_c4`] is the exception: its trace holds the
/// shift-search objective, while `avg_error` measures the final `C₄` fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub label: String,
    pub coefficients: BTreeMap<String, Real>,
    pub avg_error: Real,
    /// Largest normalized residual/basis inner product of the final linear
    /// solve, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonality: Option<Real>,
    #[serde(default)]
    pub trace: Vec<TraceEntry>,
    #[serde(default)]
    pub diverged: bool,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Result<&Real> {
        self.coefficients
            .get(name)
            .ok_or_else(|| Error::config(format!("fit result has no coefficient {name}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Minimum `avg_error` over the trace, if any.
    pub fn trace_min(&self) -> Option<&TraceEntry> {
        self.trace.iter().fold(None, |best: Option<&TraceEntry>, e| match best {
            Some(b) if b.avg_error <= e.avg_error => Some(b),
            _ => Some(e),
        })
    }
}

/// Window and resolution of a grid search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub c_low: Real,
    pub c_high: Real,
    pub initial_step: Real,
    /// Number of scan rounds; each round divides the step by ten.
    pub significant_digits_target: u32,
}

impl GridConfig {
    pub fn new(c_low: &str, c_high: &str, initial_step: &str, digits: u32) -> Result<Self> {
        let cfg = GridConfig {
            c_low: c_low.parse()?,
            c_high: c_high.parse()?,
            initial_step: initial_step.parse()?,
            significant_digits_target: digits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_low >= self.c_high {
            return Err(Error::config("grid needs c_low < c_high"));
        }
        if !self.initial_step.is_positive() {
            return Err(Error::config("grid step must be positive"));
        }
        if self.significant_digits_target < 1 {
            return Err(Error::config("grid needs at least one significant digit"));
        }
        Ok(())
    }
}

/// Root-mean-square deviation `√(Σ(yᵢ − f(xᵢ))²/m)`.
pub fn avg_error(series: &DataSeries, f: impl Fn(&Real) -> Real) -> Real {
    rms(series.points().iter().map(|(x, y)| y - f(x)))
}

pub(crate) fn rms(residuals: impl Iterator<Item = Real>) -> Real {
    let mut m = 0u64;
    let mut sum = Real::zero();
    for r in residuals {
        sum = sum + r.square();
        m += 1;
    }
    if m == 0 {
        return Real::zero();
    }
    (sum / Real::from_u64(m)).sqrt()
}

pub(crate) fn coeffs<const N: usize>(pairs: [(&str, Real); N]) -> BTreeMap<String, Real> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> Real {
        Real::from_i64(v)
    }

    #[test]
    fn series_invariants() {
        assert!(DataSeries::new("e", vec![]).is_err());
        assert!(DataSeries::new("d", vec![(r(1), r(0)), (r(1), r(2))]).is_err());
        let s = DataSeries::new("ok", vec![(r(1), r(0)), (r(2), r(2))]).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn avg_error_examples() {
        let s = DataSeries::new("s", vec![(r(0), r(0)), (r(1), r(1))]).unwrap();
        assert!(avg_error(&s, |x| x.clone()).is_zero());
        let want = Real::ratio(1, 2).sqrt();
        assert_eq!(avg_error(&s, |_| Real::zero()), want);
    }

    #[test]
    fn grid_config_validation() {
        assert!(GridConfig::new("1", "1", "0.1", 3).is_err());
        assert!(GridConfig::new("0", "1", "0", 3).is_err());
        assert!(GridConfig::new("0", "1", "0.1", 0).is_err());
        assert!(GridConfig::new("0.5", "15", "0.1", 8).is_ok());
    }

    #[test]
    fn fit_result_json_round_trip() {
        let fit = FitResult {
            model: Model::Line,
            label: "t".into(),
            coefficients: coeffs([("slope", r(2)), ("intercept", Real::ratio(1, 4))]),
            avg_error: Real::zero(),
            orthogonality: None,
            trace: vec![],
            diverged: false,
        };
        let json = fit.to_json().unwrap();
        assert!(json.contains("\"LINE\""));
        assert_eq!(FitResult::from_json(&json).unwrap(), fit);
    }
}
