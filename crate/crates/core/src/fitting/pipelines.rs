//! Named end-to-end fits, each producing one or two [`FitResult`]s from an
//! exact table and a [`FitConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    rh_at, CoefficientSet, Estimator, EstimatorKind, Provenance, Registry, Rh1Coeffs,
};
use crate::exact::PartitionTable;
use crate::exec::Execution;
use crate::real::Real;

use super::search::Candidate;
use super::{
    build_c1_series, build_c2_series, build_diff_target_series, build_ratio_series,
    build_residual_c2_series, coeffs, fit_at_shift_result, grid_minimize, grid_refine,
    iterate_c1_fit, linear_lsq, rms, transform_ratio_series, DataSeries, DiffTarget, FitResult,
    GridConfig, GridModel, IterateConfig, Model, NRange, NSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// `a/√(x+c) + b` at a fixed shift, fitted to `C₁`.
    C1Linear,
    /// Alternating refinement of `a/(x+c)^e + b` for `C₁`.
    C1Iterate,
    /// Grid search of `a/√(x+c) + b` for `C₁`.
    C1Grid,
    /// Grid search of `a·√(x+c) + b` for `C₂`.
    C2Grid,
    /// Line through `(n, (R_h/p − 1)⁻²)`.
    RatioLine,
    /// Cubic fit of the squared difference target.
    C3Cubic,
    /// Shift search for `t₀`, then the half-power fit of `C₄`.
    C4T0,
    /// Half-power fit of `C₅`.
    C5,
    /// Parity-split grid fits of `C₂` for small `n`.
    C2prime,
    /// Two cubics through the odd small-`n` points of `C₂` after the `C₁` fit.
    OddC2Cubics,
}

impl Pipeline {
    pub const ALL: [Pipeline; 10] = [
        Pipeline::C1Linear,
        Pipeline::C1Iterate,
        Pipeline::C1Grid,
        Pipeline::C2Grid,
        Pipeline::RatioLine,
        Pipeline::C3Cubic,
        Pipeline::C4T0,
        Pipeline::C5,
        Pipeline::C2prime,
        Pipeline::OddC2Cubics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::C1Linear => "c1-linear",
            Pipeline::C1Iterate => "c1-iterate",
            Pipeline::C1Grid => "c1-grid",
            Pipeline::C2Grid => "c2-grid",
            Pipeline::RatioLine => "ratio-line",
            Pipeline::C3Cubic => "c3-cubic",
            Pipeline::C4T0 => "c4-t0",
            Pipeline::C5 => "c5",
            Pipeline::C2prime => "c2prime",
            Pipeline::OddC2Cubics => "odd-c2-cubics",
        }
    }

    pub fn default_range(self) -> NSpec {
        match self {
            Pipeline::C1Linear
            | Pipeline::C1Iterate
            | Pipeline::C1Grid
            | Pipeline::C2Grid
            | Pipeline::RatioLine => NRange::c1_default().into(),
            Pipeline::C3Cubic | Pipeline::C4T0 | Pipeline::C5 => NRange::diff_default().into(),
            Pipeline::C2prime => NRange::small_default().into(),
            Pipeline::OddC2Cubics => NRange {
                start: 3,
                stop: 39,
                step: 2,
            }
            .into(),
        }
    }

    pub fn default_grid(self) -> Option<GridConfig> {
        let g = |lo, hi, st, d| GridConfig::new(lo, hi, st, d).expect("valid default grid");
        match self {
            Pipeline::C1Grid | Pipeline::C2Grid => Some(g("0.5", "15", "0.1", 8)),
            Pipeline::C4T0 => Some(g("0", "1", "0.1", 10)),
            Pipeline::C2prime => Some(g("-2.9", "15", "0.1", 6)),
            _ => None,
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Pipeline::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!(
                    "unknown pipeline {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Overrides for a pipeline run. Unset fields take the pipeline defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub range: Option<NSpec>,
    pub grid: Option<GridConfig>,
    pub init_c2: Option<Real>,
    pub init_e2: Option<Real>,
    pub max_iter: Option<usize>,
    pub fix_e2: bool,
    pub double_a: bool,
    /// Skips the `t₀` search and fits `C₄` at this shift.
    pub t0: Option<Real>,
    /// Odd `n` up to this value form part B of the odd-`C₂` cubics, larger
    /// ones part A.
    pub split: Option<u64>,
}

impl FitConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn n_values(&self, pipeline: Pipeline) -> Result<Vec<u64>> {
        self.range
            .clone()
            .unwrap_or_else(|| pipeline.default_range())
            .values()
    }

    fn grid(&self, pipeline: Pipeline) -> Result<GridConfig> {
        match (&self.grid, pipeline.default_grid()) {
            (Some(g), _) => {
                g.validate()?;
                Ok(g.clone())
            }
            (None, Some(g)) => Ok(g),
            (None, None) => Err(Error::config(format!("{pipeline} has no grid"))),
        }
    }

    fn iterate(&self) -> IterateConfig {
        let d = IterateConfig::default();
        IterateConfig {
            init_c2: self.init_c2.clone().unwrap_or(d.init_c2),
            init_e2: self.init_e2.clone().unwrap_or(d.init_e2),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            fix_e2: self.fix_e2 || self.double_a,
            double_a: self.double_a,
        }
    }
}

/// Results of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub pipeline: Pipeline,
    pub results: Vec<FitResult>,
}

impl PipelineOutput {
    pub fn diverged(&self) -> bool {
        self.results.iter().any(|r| r.diverged)
    }

    /// The estimator coefficients this run determines, if it feeds one.
    pub fn coefficient_set(&self) -> Result<Option<CoefficientSet>> {
        let r = &self.results;
        let pick = |fit: &FitResult, map: &[(&str, &str)]| -> Result<Vec<(String, Real)>> {
            map.iter()
                .map(|(to, from)| Ok((to.to_string(), fit.coefficient(from)?.clone())))
                .collect()
        };
        let (kind, pairs) = match self.pipeline {
            Pipeline::C1Grid => (
                EstimatorKind::Rh1,
                pick(&r[0], &[("a1", "a"), ("b1", "b"), ("c1", "c")])?,
            ),
            Pipeline::C2Grid => (
                EstimatorKind::Rh2,
                pick(&r[0], &[("a2", "a"), ("b2", "b"), ("c2", "c")])?,
            ),
            Pipeline::RatioLine => (
                EstimatorKind::Rd3,
                pick(&r[0], &[("a3", "slope"), ("b3", "intercept")])?,
            ),
            Pipeline::C3Cubic => (
                EstimatorKind::F3,
                pick(&r[0], &[("a1", "a"), ("b1", "b"), ("c1", "c"), ("d1", "d")])?,
            ),
            Pipeline::C4T0 => (
                EstimatorKind::Rh3,
                pick(
                    &r[0],
                    &[("t0", "t0"), ("a2", "a"), ("b2", "b"), ("c2", "c"), ("d2", "d")],
                )?,
            ),
            Pipeline::C5 => (
                EstimatorKind::Rh4,
                pick(&r[0], &[("a3", "a"), ("b3", "b"), ("c3", "c"), ("d3", "d")])?,
            ),
            Pipeline::C2prime => {
                let mut v = pick(
                    &r[0],
                    &[("odd_scale", "a"), ("odd_shift", "c"), ("odd_offset", "b")],
                )?;
                v.extend(pick(
                    &r[1],
                    &[("even_scale", "a"), ("even_shift", "c"), ("even_offset", "b")],
                )?);
                (EstimatorKind::Rh0, v)
            }
            Pipeline::C1Linear | Pipeline::C1Iterate | Pipeline::OddC2Cubics => return Ok(None),
        };
        let map: BTreeMap<String, Real> = pairs.into_iter().collect();
        CoefficientSet::new(kind, Provenance::Refit, map).map(Some)
    }

    /// One line per result: label, coefficients to 10 digits, average error.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let cs: Vec<String> = r
                .coefficients
                .iter()
                .map(|(k, v)| format!("{k}={}", v.to_sci_string(10)))
                .collect();
            out.push_str(&format!(
                "{} [{}] {} avg_error={}{}\n",
                self.pipeline,
                r.label,
                cs.join(" "),
                r.avg_error.to_sci_string(10),
                if r.diverged { " DIVERGED" } else { "" }
            ));
        }
        out
    }
}

/// Largest `n` a pipeline run reads from the exact table.
pub fn required_max_n(pipeline: Pipeline, config: &FitConfig) -> Result<u64> {
    Ok(config.n_values(pipeline)?.into_iter().max().unwrap_or(0))
}

/// Runs a pipeline. `registry` supplies the `C₁` coefficients used by the
/// odd-`C₂` cubics.
pub fn run(
    pipeline: Pipeline,
    table: &PartitionTable,
    config: &FitConfig,
    registry: &Registry,
    exec: Execution,
) -> Result<PipelineOutput> {
    let ns = config.n_values(pipeline)?;
    let results = match pipeline {
        Pipeline::C1Linear => {
            let series = build_c1_series(table, &ns, exec)?;
            let it = config.iterate();
            vec![fit_c1_fixed(&series, &it.init_c2, &it.init_e2)?]
        }
        Pipeline::C1Iterate => {
            let series = build_c1_series(table, &ns, exec)?;
            vec![iterate_c1_fit(&series, &config.iterate())?]
        }
        Pipeline::C1Grid => {
            let series = build_c1_series(table, &ns, exec)?;
            let e = config.init_e2.clone().unwrap_or_else(|| Real::ratio(1, 2));
            let model = GridModel::ShiftedPower { e };
            vec![grid_refine(&series, &model, &config.grid(pipeline)?, exec)?]
        }
        Pipeline::C2Grid => {
            let series = build_c2_series(table, &ns, exec)?;
            vec![grid_refine(&series, &GridModel::ShiftedSqrt, &config.grid(pipeline)?, exec)?]
        }
        Pipeline::RatioLine => vec![fit_ratio_line(table, &ns, exec)?],
        Pipeline::C3Cubic => vec![fit_c3_cubic(table, &ns, exec)?],
        Pipeline::C4T0 => match &config.t0 {
            Some(t0) => vec![fit_c4_at(table, &ns, t0, exec)?],
            None => vec![fit_t0_and_c4(table, &ns, &config.grid(pipeline)?, exec)?],
        },
        Pipeline::C5 => vec![fit_c5(table, &ns, exec)?],
        Pipeline::C2prime => {
            let (odd, even) = fit_c2prime_piecewise(table, &ns, &config.grid(pipeline)?, exec)?;
            vec![odd, even]
        }
        Pipeline::OddC2Cubics => {
            let Estimator::Rh1(c1) = registry.estimator(EstimatorKind::Rh1)? else {
                unreachable!("registry returns the requested kind")
            };
            let split = config.split.unwrap_or(20);
            let (a, b) = fit_odd_c2_cubics(table, &ns, split, &c1, exec)?;
            vec![a, b]
        }
    };
    Ok(PipelineOutput { pipeline, results })
}

fn finish(
    series: &DataSeries,
    model: Model,
    names: &[&str],
    basis: &[&dyn Fn(&Real) -> Real],
) -> Result<FitResult> {
    let fit = linear_lsq(basis, series)?;
    Ok(FitResult {
        model,
        label: series.label.clone(),
        coefficients: names
            .iter()
            .map(|n| n.to_string())
            .zip(fit.coefficients)
            .collect(),
        avg_error: fit.avg_error,
        orthogonality: Some(fit.orthogonality),
        trace: Vec::new(),
        diverged: false,
    })
}

/// Linear fit of `a/(x+c)^e + b` with `c` and `e` fixed.
pub fn fit_c1_fixed(series: &DataSeries, c: &Real, e: &Real) -> Result<FitResult> {
    fit_at_shift_result(series, &GridModel::ShiftedPower { e: e.clone() }, c)
}

/// `slope·n + intercept` through `(n, (R_h/p − 1)⁻²)`.
pub fn fit_ratio_line(table: &PartitionTable, ns: &[u64], exec: Execution) -> Result<FitResult> {
    let series = transform_ratio_series(&build_ratio_series(table, ns, exec)?)?;
    let one = |_: &Real| Real::one();
    let id = |x: &Real| x.clone();
    finish(&series, Model::Line, &["slope", "intercept"], &[&id, &one])
}

/// Cubic least squares on basis `{x³, x², x, 1}`.
pub fn fit_cubic(series: &DataSeries) -> Result<FitResult> {
    let x3 = |x: &Real| x.powi(3);
    let x2 = |x: &Real| x.square();
    let x1 = |x: &Real| x.clone();
    let x0 = |_: &Real| Real::one();
    finish(series, Model::Cubic, &["a", "b", "c", "d"], &[&x3, &x2, &x1, &x0])
}

pub fn fit_c3_cubic(table: &PartitionTable, ns: &[u64], exec: Execution) -> Result<FitResult> {
    fit_cubic(&build_diff_target_series(table, ns, &DiffTarget::C3, exec)?)
}

/// Basis `{u^1.5, u, u^0.5, 1}` with `u = x − shift`.
fn fit_half_powers(series: &DataSeries, shift: &Real) -> Result<FitResult> {
    let u = |x: &Real| x - shift;
    let b15 = |x: &Real| {
        let v = u(x);
        &v * v.sqrt()
    };
    let b10 = |x: &Real| u(x);
    let b05 = |x: &Real| u(x).sqrt();
    let b00 = |_: &Real| Real::one();
    finish(
        series,
        Model::HalfPowers,
        &["a", "b", "c", "d"],
        &[&b15, &b10, &b05, &b00],
    )
}

pub fn fit_c5(table: &PartitionTable, ns: &[u64], exec: Execution) -> Result<FitResult> {
    fit_half_powers(
        &build_diff_target_series(table, ns, &DiffTarget::C5, exec)?,
        &Real::zero(),
    )
}

/// Half-power fit of the `C₄` target at a given `t₀`.
pub fn fit_c4_at(table: &PartitionTable, ns: &[u64], t0: &Real, exec: Execution) -> Result<FitResult> {
    if ns.iter().any(|&n| Real::from_u64(n) <= *t0) {
        return Err(Error::domain("t₀ must lie below every n of the dataset"));
    }
    let series = build_diff_target_series(table, ns, &DiffTarget::C4 { t0: t0.clone() }, exec)?;
    let mut fit = fit_half_powers(&series, t0)?;
    fit.coefficients.insert("t0".into(), t0.clone());
    Ok(fit)
}

/// Root-mean-square of `R_h(n − t)/p(n) − 1` over `ns`: how well the
/// shifted leading term tracks `p(n)`.
pub fn shift_objective(table: &PartitionTable, ns: &[u64], t: &Real) -> Result<Real> {
    let terms = ns
        .iter()
        .map(|&n| {
            let x = Real::from_u64(n) - t;
            if !x.is_positive() {
                return Err(Error::domain(format!("n − t ≤ 0 at n = {n}")));
            }
            Ok(rh_at(&x) / table.p_real(n as usize)? - Real::one())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rms(terms.into_iter()))
}

/// Grid search for `t₀` minimizing [`shift_objective`], followed by the
/// `C₄` fit at the chosen `t₀`. The trace records the shift objective.
pub fn fit_t0_and_c4(
    table: &PartitionTable,
    ns: &[u64],
    grid: &GridConfig,
    exec: Execution,
) -> Result<FitResult> {
    let outcome = grid_minimize(grid, exec, |t| {
        Ok(Candidate {
            coefficients: coeffs([("t0", t.clone())]),
            avg_error: shift_objective(table, ns, t)?,
            orthogonality: None,
        })
    })?;
    let mut fit = fit_c4_at(table, ns, &outcome.argmin, exec)?;
    fit.trace = outcome.trace;
    Ok(fit)
}

/// Grid fits of `a·√(n+c) + b` to `C₂(n)` on the odd and even `n` of `ns`
/// separately. Returns `(odd, even)`.
pub fn fit_c2prime_piecewise(
    table: &PartitionTable,
    ns: &[u64],
    grid: &GridConfig,
    exec: Execution,
) -> Result<(FitResult, FitResult)> {
    let odd: Vec<u64> = ns.iter().copied().filter(|n| n % 2 == 1).collect();
    let even: Vec<u64> = ns.iter().copied().filter(|n| n % 2 == 0).collect();
    let fit = |part: &[u64], label: &str| -> Result<FitResult> {
        let mut series = build_c2_series(table, part, exec)?;
        series.label = label.into();
        grid_refine(&series, &GridModel::ShiftedSqrt, grid, exec)
    };
    Ok((fit(&odd, "C2 odd")?, fit(&even, "C2 even")?))
}

/// Cubics through the odd points of the post-`C₁` denominator shift, split
/// at `split`. Returns `(part A: n > split, part B: n ≤ split)`.
pub fn fit_odd_c2_cubics(
    table: &PartitionTable,
    ns: &[u64],
    split: u64,
    c1: &Rh1Coeffs,
    exec: Execution,
) -> Result<(FitResult, FitResult)> {
    let odd: Vec<u64> = ns.iter().copied().filter(|n| n % 2 == 1).collect();
    let series = build_residual_c2_series(table, &odd, c1, exec)?;
    let cut = Real::from_u64(split);
    let mut a = fit_cubic(&series.filter_x("C2 odd part A", |x| x > &cut)?)?;
    let mut b = fit_cubic(&series.filter_x("C2 odd part B", |x| x <= &cut)?)?;
    a.label = "C2 odd part A".into();
    b.label = "C2 odd part B".into();
    Ok((a, b))
}
