//! Nonlinear parameters: the digit-refining grid search and the alternating
//! refinement of `a/(x+c)^e + b`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::real::Real;

use super::{coeffs, linear_lsq_columns, DataSeries, FitResult, GridConfig, Model, TraceEntry};

/// Ratio of an iterate's error to the best so far beyond which the
/// alternating refinement is declared divergent.
const DIVERGENCE_FACTOR: u64 = 10;

/// One evaluated value of the searched parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub coefficients: BTreeMap<String, Real>,
    pub avg_error: Real,
    pub orthogonality: Option<Real>,
}

/// Best point of a [`grid_minimize`] run.
#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub argmin: Real,
    pub best: Candidate,
    pub trace: Vec<TraceEntry>,
}

/// Minimizes `objective` over one scalar parameter.
///
/// Each round scans `c = c_low + i·step` up to `c_high` and keeps the point
/// with the smallest error (the first one on ties). The next round scans
/// `c₀ ± 5·step` with a step ten times smaller. Points where the objective
/// fails are skipped. Candidates of a round may be evaluated in parallel; the
/// reduction runs in scan order so the outcome does not depend on `exec`.
pub fn grid_minimize<F>(config: &GridConfig, exec: Execution, objective: F) -> Result<GridOutcome>
where
    F: Fn(&Real) -> Result<Candidate> + Sync + Send,
{
    config.validate()?;
    let mut low = config.c_low.clone();
    let mut high = config.c_high.clone();
    let mut step = config.initial_step.clone();
    let mut best: Option<(Real, Candidate)> = None;
    let mut trace = Vec::new();

    for _ in 0..config.significant_digits_target {
        // Absorbs the binary rounding of decimal steps at the upper end.
        let limit = &high + &step / Real::from_u64(1000);
        let mut grid = Vec::new();
        for i in 0u64.. {
            let c = &low + &step * Real::from_u64(i);
            if c > limit {
                break;
            }
            grid.push(c);
        }
        let results = exec.map(&grid, |c| objective(c));
        for (c, result) in grid.into_iter().zip(results) {
            let Ok(cand) = result else { continue };
            trace.push(TraceEntry {
                index: trace.len(),
                coefficients: cand.coefficients.clone(),
                avg_error: cand.avg_error.clone(),
            });
            let better = match &best {
                None => true,
                Some((_, b)) => cand.avg_error < b.avg_error,
            };
            if better {
                best = Some((c, cand));
            }
        }
        let Some((c0, _)) = &best else {
            return Err(Error::FitDiverged(
                "every grid point failed its domain checks".into(),
            ));
        };
        let half_width = &step * Real::from_u64(5);
        low = c0 - &half_width;
        high = c0 + &half_width;
        step = step / Real::from_u64(10);
    }

    let (argmin, best) = best.expect("at least one round ran");
    Ok(GridOutcome {
        argmin,
        best,
        trace,
    })
}

/// Model families whose shift is found by grid search; both are linear in
/// `(a, b)` once `c` is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridModel {
    /// `a·√(x+c) + b`
    ShiftedSqrt,
    /// `a/(x+c)^e + b` with `e` held fixed
    ShiftedPower { e: Real },
}

fn is_half(e: &Real) -> bool {
    e == &Real::ratio(1, 2)
}

/// `(x+c)^(−e)`.
fn shifted_power(x: &Real, c: &Real, e: &Real) -> Result<Real> {
    let s = x + c;
    if !s.is_positive() {
        return Err(Error::domain(format!("x + c ≤ 0 at x = {x:.6}")));
    }
    Ok(if is_half(e) {
        s.sqrt().recip()
    } else {
        s.powf(&-e)
    })
}

/// Least-squares `(a, b)` for the model at a fixed shift `c`.
pub fn fit_at_shift(series: &DataSeries, model: &GridModel, c: &Real) -> Result<Candidate> {
    let col = series
        .xs()
        .map(|x| match model {
            GridModel::ShiftedSqrt => {
                let s = x + c;
                if s.is_negative() {
                    Err(Error::domain(format!("x + c < 0 at x = {x:.6}")))
                } else {
                    Ok(s.sqrt())
                }
            }
            GridModel::ShiftedPower { e } => shifted_power(x, c, e),
        })
        .collect::<Result<Vec<_>>>()?;
    let ones = vec![Real::one(); series.len()];
    let ys: Vec<Real> = series.ys().cloned().collect();
    let fit = linear_lsq_columns(&[col, ones], &ys)?;
    let [a, b]: [Real; 2] = fit.coefficients.try_into().expect("two columns");
    let mut coefficients = coeffs([("a", a), ("b", b), ("c", c.clone())]);
    if let GridModel::ShiftedPower { e } = model {
        coefficients.insert("e".into(), e.clone());
    }
    Ok(Candidate {
        coefficients,
        avg_error: fit.avg_error,
        orthogonality: Some(fit.orthogonality),
    })
}

fn grid_model(model: &GridModel) -> Model {
    match model {
        GridModel::ShiftedSqrt => Model::ShiftedSqrt,
        GridModel::ShiftedPower { .. } => Model::ShiftedPower,
    }
}

/// [`fit_at_shift`] packaged as a [`FitResult`] without a trace.
pub fn fit_at_shift_result(series: &DataSeries, model: &GridModel, c: &Real) -> Result<FitResult> {
    let cand = fit_at_shift(series, model, c)?;
    Ok(FitResult {
        model: grid_model(model),
        label: series.label.clone(),
        coefficients: cand.coefficients,
        avg_error: cand.avg_error,
        orthogonality: cand.orthogonality,
        trace: Vec::new(),
        diverged: false,
    })
}

/// Grid search for the shift `c` of a model that is linear in `(a, b)`.
pub fn grid_refine(
    series: &DataSeries,
    model: &GridModel,
    config: &GridConfig,
    exec: Execution,
) -> Result<FitResult> {
    let outcome = grid_minimize(config, exec, |c| fit_at_shift(series, model, c))?;
    Ok(FitResult {
        model: grid_model(model),
        label: series.label.clone(),
        coefficients: outcome.best.coefficients,
        avg_error: outcome.best.avg_error,
        orthogonality: outcome.best.orthogonality,
        trace: outcome.trace,
        diverged: false,
    })
}

/// Slope and intercept of `ln(b − y)` against `ln(x + c)`, and the exponent
/// and scale they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentScale {
    pub e1: Real,
    pub a1: Real,
    pub e2: Real,
    pub a: Real,
}

fn log_points(series: &DataSeries, b: &Real, c2: &Real) -> Result<(Vec<Real>, Vec<Real>)> {
    let mut lx = Vec::with_capacity(series.len());
    let mut ly = Vec::with_capacity(series.len());
    for (x, y) in series.points() {
        let shifted = x + c2;
        let gap = b - y;
        if !shifted.is_positive() || !gap.is_positive() {
            return Err(Error::domain(format!(
                "logarithm of a nonpositive value at x = {x:.6}"
            )));
        }
        lx.push(shifted.ln());
        ly.push(gap.ln());
    }
    Ok((lx, ly))
}

/// Re-estimates `e₂` and `a` from the line through `(ln(x+c₂), ln(b−y))`:
/// `e₂ = −slope`, `a = −exp(intercept)`.
pub fn refine_exponent_scale(series: &DataSeries, b: &Real, c2: &Real) -> Result<ExponentScale> {
    let (lx, ly) = log_points(series, b, c2)?;
    let ones = vec![Real::one(); lx.len()];
    let fit = linear_lsq_columns(&[lx, ones], &ly)?;
    let [e1, a1]: [Real; 2] = fit.coefficients.try_into().expect("two columns");
    Ok(ExponentScale {
        e2: -&e1,
        a: -(a1.exp()),
        e1,
        a1,
    })
}

/// Re-estimates `a` with `e₂` held fixed: `a = −exp(mean(ln(b−y) + e₂·ln(x+c₂)))`.
pub fn refine_scale(series: &DataSeries, b: &Real, c2: &Real, e2: &Real) -> Result<Real> {
    let (lx, ly) = log_points(series, b, c2)?;
    let m = Real::from_u64(lx.len() as u64);
    let mean: Real = lx.iter().zip(&ly).map(|(u, v)| v + e2 * u).sum::<Real>() / m;
    Ok(-(mean.exp()))
}

/// Re-estimates the shift: the least-squares intercept of `x + c` through
/// `(x, (a/(y−b))^{1/e₂})`, i.e. the mean of `(a/(y−b))^{1/e₂} − x`.
pub fn refine_shift(series: &DataSeries, a: &Real, b: &Real, e2: &Real) -> Result<Real> {
    let mut sum = Real::zero();
    for (x, y) in series.points() {
        let q = a / (y - b);
        if !q.is_positive() {
            return Err(Error::domain(format!(
                "a/(y − b) ≤ 0 at x = {x:.6}; the shift is not real"
            )));
        }
        let root = if is_half(e2) {
            q.square()
        } else {
            q.powf(&e2.recip())
        };
        sum = sum + root - x;
    }
    Ok(sum / Real::from_u64(series.len() as u64))
}

/// What the exponent step of the alternating refinement does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Refit `e₂` and `a` from the log-log line.
    Full,
    /// Keep `e₂`, re-estimate `a` a second time from the log data.
    ReevaluateScale,
    /// Keep `e₂` and skip the step; `a` comes only from the linear fit.
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateConfig {
    pub init_c2: Real,
    pub init_e2: Real,
    pub max_iter: usize,
    /// Hold `e₂` at its initial value.
    pub fix_e2: bool,
    /// Re-estimate `a` from the log data after the linear fit. Implies
    /// `fix_e2`.
    pub double_a: bool,
}

impl Default for IterateConfig {
    fn default() -> Self {
        IterateConfig {
            init_c2: Real::ratio(5, 2),
            init_e2: Real::ratio(1, 2),
            max_iter: 200,
            fix_e2: false,
            double_a: false,
        }
    }
}

impl IterateConfig {
    pub fn mode(&self) -> RefineMode {
        if self.double_a {
            RefineMode::ReevaluateScale
        } else if self.fix_e2 {
            RefineMode::Skip
        } else {
            RefineMode::Full
        }
    }
}

/// Alternating refinement of `y = a/(x+c₂)^{e₂} + b`.
///
/// Each iteration fits `(a, b)` linearly for the current `(c₂, e₂)`, records
/// the state, then updates `e₂`/`a` according to [`IterateConfig::mode`] and
/// finally `c₂`. The loop stops after `max_iter` iterations, when a step
/// leaves its real domain, or when an iterate's error exceeds ten times the
/// best so far; the latter two set `diverged`. The returned coefficients are
/// those of the best iterate in the trace.
pub fn iterate_c1_fit(series: &DataSeries, config: &IterateConfig) -> Result<FitResult> {
    let mode = config.mode();
    let mut c2 = config.init_c2.clone();
    let mut e2 = config.init_e2.clone();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut diverged = false;
    let limit = Real::from_u64(DIVERGENCE_FACTOR);
    // Errors at rounding level never count as a runaway.
    let floor = super::rms(series.ys().cloned()) * Real::parse_decimal("1e-40")?;

    for it in 0..config.max_iter {
        let step = (|| -> Result<Candidate> {
            let cand = fit_at_shift(series, &GridModel::ShiftedPower { e: e2.clone() }, &c2)?;
            cand.avg_error.clone().finite_or("average error")?;
            Ok(cand)
        })();
        let cand = match step {
            Ok(c) => c,
            Err(e) if trace.is_empty() => {
                return Err(Error::FitDiverged(format!("first iteration failed: {e}")))
            }
            Err(_) => {
                diverged = true;
                break;
            }
        };
        trace.push(TraceEntry {
            index: it,
            coefficients: cand.coefficients.clone(),
            avg_error: cand.avg_error.clone(),
        });
        let runaway = best
            .as_ref()
            .is_some_and(|b| cand.avg_error > &b.avg_error * &limit && cand.avg_error > floor);
        if best.as_ref().is_none_or(|b| cand.avg_error < b.avg_error) {
            best = Some(cand.clone());
        }
        if runaway {
            diverged = true;
            break;
        }

        let mut a = cand.coefficients["a"].clone();
        let b = cand.coefficients["b"].clone();
        let update = (|| -> Result<Real> {
            match mode {
                RefineMode::Full => {
                    let es = refine_exponent_scale(series, &b, &c2)?;
                    e2 = es.e2;
                    a = es.a;
                }
                RefineMode::ReevaluateScale => a = refine_scale(series, &b, &c2, &e2)?,
                RefineMode::Skip => {}
            }
            refine_shift(series, &a, &b, &e2)
        })();
        match update {
            Ok(c) => c2 = c,
            Err(_) => {
                diverged = true;
                break;
            }
        }
    }

    let best = best.ok_or_else(|| Error::FitDiverged("no iterations were run".into()))?;
    Ok(FitResult {
        model: Model::ShiftedPower,
        label: series.label.clone(),
        coefficients: best.coefficients,
        avg_error: best.avg_error,
        orthogonality: best.orthogonality,
        trace,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Real {
        s.parse().unwrap()
    }

    fn synthetic(a: &str, b: &str, c: &str, e: &str) -> DataSeries {
        let (a, b, c, e) = (r(a), r(b), r(c), r(e));
        let points = (1..=60u64)
            .map(|k| {
                let x = Real::from_u64(20 * k + 100);
                let y = &a * (&x + &c).powf(&-&e) + &b;
                (x, y)
            })
            .collect();
        DataSeries::new("synthetic", points).unwrap()
    }

    fn close(x: &Real, want: &str, rel: &str) -> bool {
        let w = r(want);
        ((x - &w) / &w).abs() < r(rel)
    }

    #[test]
    fn exponent_scale_round_trip() {
        let s = synthetic("-0.02", "-0.3456", "3", "0.5");
        let es = refine_exponent_scale(&s, &r("-0.3456"), &r("3")).unwrap();
        assert!(close(&es.e2, "0.5", "1e-40"));
        assert!(close(&es.a, "-0.02", "1e-40"));
        assert!((&es.a1 - r("0.02").ln()).abs() < r("1e-40"));
    }

    #[test]
    fn exponent_scale_domain() {
        let s = synthetic("-0.02", "-0.3456", "3", "0.5");
        assert!(refine_exponent_scale(&s, &r("-0.5"), &r("3")).unwrap_err().is_domain());
        assert!(refine_exponent_scale(&s, &r("-0.3456"), &r("-200")).unwrap_err().is_domain());
    }

    #[test]
    fn scale_and_shift_round_trip() {
        let s = synthetic("-0.02", "-0.3456", "7", "0.5");
        let a = refine_scale(&s, &r("-0.3456"), &r("7"), &r("0.5")).unwrap();
        assert!(close(&a, "-0.02", "1e-40"));
        let c = refine_shift(&s, &r("-0.02"), &r("-0.3456"), &r("0.5")).unwrap();
        assert!(close(&c, "7", "1e-40"));
        let s = synthetic("-0.02", "-0.3456", "7", "0.45");
        let c = refine_shift(&s, &r("-0.02"), &r("-0.3456"), &r("0.45")).unwrap();
        assert!(close(&c, "7", "1e-40"));
        assert!(refine_shift(&s, &r("0.02"), &r("-0.3456"), &r("0.45")).unwrap_err().is_domain());
    }

    #[test]
    fn grid_recovers_sqrt_shift() {
        let points = (1..=40u64)
            .map(|k| {
                let x = Real::from_u64(10 * k);
                let y = r("0.45") * (&x + r("0.274")).sqrt() + r("0.13");
                (x, y)
            })
            .collect();
        let s = DataSeries::new("s", points).unwrap();
        let cfg = GridConfig::new("0.1", "2", "0.1", 4).unwrap();
        let fit = grid_refine(&s, &GridModel::ShiftedSqrt, &cfg, Execution::Parallel).unwrap();
        assert!(close(&fit.coefficients["c"], "0.274", "1e-30"));
        assert!(close(&fit.coefficients["a"], "0.45", "1e-30"));
        assert!(fit.trace.iter().all(|t| t.avg_error >= fit.avg_error));
        let seq = grid_refine(&s, &GridModel::ShiftedSqrt, &cfg, Execution::Sequential).unwrap();
        assert_eq!(seq, fit);
    }

    #[test]
    fn grid_fails_when_every_point_is_invalid() {
        let s = synthetic("-0.02", "-0.3456", "3", "0.5");
        let cfg = GridConfig::new("-500", "-400", "10", 2).unwrap();
        let err = grid_refine(&s, &GridModel::ShiftedSqrt, &cfg, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::FitDiverged(_)));
    }

    #[test]
    fn ties_keep_the_smallest_c() {
        let cfg = GridConfig::new("0", "1", "0.25", 1).unwrap();
        let out = grid_minimize(&cfg, Execution::Parallel, |c| {
            Ok(Candidate {
                coefficients: coeffs([("c", c.clone())]),
                avg_error: if c < &r("0.3") { Real::one() } else { Real::zero() },
                orthogonality: None,
            })
        })
        .unwrap();
        assert_eq!(out.argmin, r("0.5"));
        assert_eq!(out.trace.len(), 5);
    }

    #[test]
    fn iteration_recovers_exact_model() {
        let s = synthetic("-0.026", "-0.3456", "3.3", "0.5");
        let cfg = IterateConfig {
            init_c2: r("3.3"),
            ..IterateConfig::default()
        };
        let fit = iterate_c1_fit(&s, &cfg).unwrap();
        assert!(!fit.diverged);
        assert!(close(&fit.coefficients["a"], "-0.026", "1e-30"));
        assert!(close(&fit.coefficients["e"], "0.5", "1e-30"));
        assert!(fit.trace.iter().all(|t| t.avg_error >= fit.avg_error));
    }

    #[test]
    fn iteration_first_step_failure() {
        let s = synthetic("-0.026", "-0.3456", "3.3", "0.5");
        let cfg = IterateConfig {
            init_c2: r("-1000"),
            ..IterateConfig::default()
        };
        assert!(matches!(iterate_c1_fit(&s, &cfg), Err(Error::FitDiverged(_))));
    }

    #[test]
    fn modes() {
        let mut cfg = IterateConfig::default();
        assert_eq!(cfg.mode(), RefineMode::Full);
        cfg.fix_e2 = true;
        assert_eq!(cfg.mode(), RefineMode::Skip);
        cfg.double_a = true;
        assert_eq!(cfg.mode(), RefineMode::ReevaluateScale);
    }
}
