//! Closed-form estimators of `p(n)` built on the Hardy–Ramanujan leading term
//!
//! ```text
//! R_h(n) = exp(√(2/3)·π·√n) / (4√3·n)
//! ```
//!
//! Each revised estimator perturbs either the exponent, the denominator, or
//! subtracts a fitted approximation of `R_h(n) - p(n)`:
//!
//! | kind  | form                                                         |
//! |-------|--------------------------------------------------------------|
//! | `RH1` | `exp(K·√(n + a₁/√(n+c₁) + b₁)) / (4√3·n)`                    |
//! | `RH2` | `exp(K·√n) / (4√3·(n + a₂·√(n+c₂) + b₂))`                    |
//! | `RD3` | `R_h(n) / (1 + 1/√(a₃·n + b₃))`                              |
//! | `F3`  | `R_h(n) − π·exp(K·√n) / (12·√(2·C₃(n)))`, `C₃` cubic in `n`   |
//! | `RH3` | `R_h(n) − √2·t₀·π·exp(K·√(n−t₀)) / (24·C₄(n))`               |
//! | `RH4` | `R_h(n) − π·exp(K·√n) / (12√2·C₅(n))`                        |
//! | `RH0` | `exp(K·√n) / (4√3·(n + C′₂(n)))`, `C′₂` split by parity       |
//!
//! with `K = √(2/3)·π`, `C₄(n) = a·u^1.5 + b·u + c·u^0.5 + d` for `u = n − t₀`,
//! and `C₅(n)` the same basis in `n`.
//!
//! Every estimator checks its real domain and returns [`Error::Domain`]
//! rather than a NaN, whatever coefficients it is given.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{consts, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Rh,
    Rh1,
    Rh2,
    Rd3,
    F3,
    Rh3,
    Rh4,
    Rh0,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::Rh,
        EstimatorKind::Rh1,
        EstimatorKind::Rh2,
        EstimatorKind::Rd3,
        EstimatorKind::F3,
        EstimatorKind::Rh3,
        EstimatorKind::Rh4,
        EstimatorKind::Rh0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rh => "RH",
            EstimatorKind::Rh1 => "RH1",
            EstimatorKind::Rh2 => "RH2",
            EstimatorKind::Rd3 => "RD3",
            EstimatorKind::F3 => "F3",
            EstimatorKind::Rh3 => "RH3",
            EstimatorKind::Rh4 => "RH4",
            EstimatorKind::Rh0 => "RH0",
        }
    }

    /// Coefficient names a [`CoefficientSet`] of this kind must carry.
    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            EstimatorKind::Rh => &[],
            EstimatorKind::Rh1 => &["a1", "b1", "c1"],
            EstimatorKind::Rh2 => &["a2", "b2", "c2"],
            EstimatorKind::Rd3 => &["a3", "b3"],
            EstimatorKind::F3 => &["a1", "b1", "c1", "d1"],
            EstimatorKind::Rh3 => &["t0", "a2", "b2", "c2", "d2"],
            EstimatorKind::Rh4 => &["a3", "b3", "c3", "d3"],
            EstimatorKind::Rh0 => &[
                "odd_scale",
                "odd_shift",
                "odd_offset",
                "even_scale",
                "even_shift",
                "even_offset",
            ],
        }
    }

    /// Published coefficient values, as exact decimal strings.
    fn published(self) -> &'static [(&'static str, &'static str)] {
        match self {
            EstimatorKind::Rh => &[],
            EstimatorKind::Rh1 => &[
                ("a1", "-0.02651010067"),
                ("b1", "-0.3456324524"),
                ("c1", "4.8444724"),
            ],
            EstimatorKind::Rh2 => &[
                ("a2", "0.4432884566"),
                ("b2", "0.1325096085"),
                ("c2", "0.274078"),
            ],
            EstimatorKind::Rd3 => &[("a3", "5.062307637"), ("b3", "-75.65700620")],
            EstimatorKind::F3 => &[
                ("a1", "8.383485427"),
                ("b1", "130.0792015"),
                ("c1", "-1.197477259e5"),
                ("d1", "4.188653689e7"),
            ],
            EstimatorKind::Rh3 => &[
                ("t0", "0.3594143172"),
                ("a2", "1.039888529"),
                ("b2", "-0.3305606395"),
                ("c2", "0.6134039843"),
                ("d2", "-0.8582793693"),
            ],
            EstimatorKind::Rh4 => &[
                ("a3", "2.893270736"),
                ("b3", "0.4164546941"),
                ("c3", "-0.08501098214"),
                ("d3", "-0.4621004962"),
            ],
            EstimatorKind::Rh0 => &[
                ("odd_scale", "0.4527092482"),
                ("odd_shift", "4.35278"),
                ("odd_offset", "-0.05498719946"),
                ("even_scale", "0.4412187317"),
                ("even_shift", "-2.01699"),
                ("even_offset", "0.2102618735"),
            ],
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown estimator kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The published constants, serialized as `"paper"`.
    #[serde(rename = "paper")]
    Published,
    Refit,
}

/// Named coefficients of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub kind: EstimatorKind,
    pub provenance: Provenance,
    pub coefficients: BTreeMap<String, Real>,
}

impl CoefficientSet {
    /// Builds a set and checks that it carries exactly the names its kind
    /// requires.
    pub fn new(
        kind: EstimatorKind,
        provenance: Provenance,
        coefficients: BTreeMap<String, Real>,
    ) -> Result<Self> {
        let set = CoefficientSet {
            kind,
            provenance,
            coefficients,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn published(kind: EstimatorKind) -> Self {
        let coefficients = kind
            .published()
            .iter()
            .map(|(name, lit)| {
                let v = Real::parse_decimal(lit).expect("published literal parses");
                (name.to_string(), v)
            })
            .collect();
        CoefficientSet {
            kind,
            provenance: Provenance::Published,
            coefficients,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.kind.coefficient_names();
        for name in want {
            if !self.coefficients.contains_key(*name) {
                return Err(Error::config(format!(
                    "{} coefficient set is missing {name}",
                    self.kind
                )));
            }
        }
        if let Some(extra) = self.coefficients.keys().find(|k| !want.contains(&k.as_str())) {
            return Err(Error::config(format!(
                "{} coefficient set has unexpected coefficient {extra}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Real> {
        self.coefficients.get(name).ok_or_else(|| {
            Error::config(format!("{} coefficient set is missing {name}", self.kind))
        })
    }
}

/// One coefficient set per estimator kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    sets: BTreeMap<EstimatorKind, CoefficientSet>,
}

impl Registry {
    /// The published coefficients for every estimator.
    pub fn published() -> Self {
        Registry {
            sets: EstimatorKind::ALL
                .into_iter()
                .map(|k| (k, CoefficientSet::published(k)))
                .collect(),
        }
    }

    pub fn get(&self, kind: EstimatorKind) -> Result<&CoefficientSet> {
        self.sets
            .get(&kind)
            .ok_or_else(|| Error::config(format!("registry has no coefficients for {kind}")))
    }

    /// Replaces (or adds) the set for its kind.
    pub fn insert(&mut self, set: CoefficientSet) -> Result<()> {
        set.validate()?;
        self.sets.insert(set.kind, set);
        Ok(())
    }

    pub fn sets(&self) -> impl Iterator<Item = &CoefficientSet> {
        self.sets.values()
    }

    pub fn estimator(&self, kind: EstimatorKind) -> Result<Estimator> {
        Estimator::from_set(self.get(kind)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let sets: Vec<&CoefficientSet> = self.sets.values().collect();
        Ok(serde_json::to_string_pretty(&sets)?)
    }

    /// Reads a registry file holding either one coefficient set or an array
    /// of them. Kinds missing from the file keep their published values.
    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Many(Vec<CoefficientSet>),
            One(CoefficientSet),
        }
        let sets = match serde_json::from_str(s)? {
            Doc::Many(v) => v,
            Doc::One(one) => vec![one],
        };
        let mut reg = Registry::published();
        for set in sets {
            reg.insert(set)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::published()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rh1Coeffs {
    pub a: Real,
    pub b: Real,
    pub c: Real,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rh2Coeffs {
    pub a: Real,
    pub b: Real,
    pub c: Real,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rd3Coeffs {
    pub a: Real,
    pub b: Real,
}

/// `a·x³ + b·x² + c·x + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cubic {
    pub a: Real,
    pub b: Real,
    pub c: Real,
    pub d: Real,
}

impl Cubic {
    pub fn eval(&self, x: &Real) -> Real {
        ((&self.a * x + &self.b) * x + &self.c) * x + &self.d
    }
}

/// `a·u^1.5 + b·u + c·u^0.5 + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfPowerSeries {
    pub a: Real,
    pub b: Real,
    pub c: Real,
    pub d: Real,
}

impl HalfPowerSeries {
    /// Requires `u ≥ 0`.
    pub fn eval(&self, u: &Real) -> Real {
        let root = u.sqrt();
        (&self.a * u + &self.c) * &root + &self.b * u + &self.d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rh3Coeffs {
    pub t0: Real,
    pub c4: HalfPowerSeries,
}

/// One branch of the piecewise correction: `scale·√(n + shift) + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedSqrt {
    pub scale: Real,
    pub shift: Real,
    pub offset: Real,
}

impl ShiftedSqrt {
    pub fn eval(&self, x: &Real) -> Result<Real> {
        let radicand = x + &self.shift;
        if radicand.is_negative() {
            return Err(Error::domain(format!(
                "√(n + {}) is imaginary at n = {x:.12}",
                self.shift
            )));
        }
        Ok(&self.scale * radicand.sqrt() + &self.offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: u64) -> Self {
        if n % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rh0Coeffs {
    pub odd: ShiftedSqrt,
    pub even: ShiftedSqrt,
}

impl Rh0Coeffs {
    pub fn branch(&self, n: u64) -> (Parity, &ShiftedSqrt) {
        match Parity::of(n) {
            Parity::Odd => (Parity::Odd, &self.odd),
            Parity::Even => (Parity::Even, &self.even),
        }
    }
}

/// An estimator with its coefficients unpacked for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Rh,
    Rh1(Rh1Coeffs),
    Rh2(Rh2Coeffs),
    Rd3(Rd3Coeffs),
    F3(Cubic),
    Rh3(Rh3Coeffs),
    Rh4(HalfPowerSeries),
    Rh0(Rh0Coeffs),
}

/// Validity range of the piecewise small-`n` estimator.
pub const RH0_RANGE: (u64, u64) = (1, 100);

impl Estimator {
    pub fn from_set(set: &CoefficientSet) -> Result<Self> {
        set.validate()?;
        let g = |name: &str| set.get(name).cloned();
        Ok(match set.kind {
            EstimatorKind::Rh => Estimator::Rh,
            EstimatorKind::Rh1 => Estimator::Rh1(Rh1Coeffs {
                a: g("a1")?,
                b: g("b1")?,
                c: g("c1")?,
            }),
            EstimatorKind::Rh2 => Estimator::Rh2(Rh2Coeffs {
                a: g("a2")?,
                b: g("b2")?,
                c: g("c2")?,
            }),
            EstimatorKind::Rd3 => Estimator::Rd3(Rd3Coeffs {
                a: g("a3")?,
                b: g("b3")?,
            }),
            EstimatorKind::F3 => Estimator::F3(Cubic {
                a: g("a1")?,
                b: g("b1")?,
                c: g("c1")?,
                d: g("d1")?,
            }),
            EstimatorKind::Rh3 => Estimator::Rh3(Rh3Coeffs {
                t0: g("t0")?,
                c4: HalfPowerSeries {
                    a: g("a2")?,
                    b: g("b2")?,
                    c: g("c2")?,
                    d: g("d2")?,
                },
            }),
            EstimatorKind::Rh4 => Estimator::Rh4(HalfPowerSeries {
                a: g("a3")?,
                b: g("b3")?,
                c: g("c3")?,
                d: g("d3")?,
            }),
            EstimatorKind::Rh0 => Estimator::Rh0(Rh0Coeffs {
                odd: ShiftedSqrt {
                    scale: g("odd_scale")?,
                    shift: g("odd_shift")?,
                    offset: g("odd_offset")?,
                },
                even: ShiftedSqrt {
                    scale: g("even_scale")?,
                    shift: g("even_shift")?,
                    offset: g("even_offset")?,
                },
            }),
        })
    }

    pub fn published(kind: EstimatorKind) -> Self {
        Estimator::from_set(&CoefficientSet::published(kind)).expect("published set is valid")
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Rh => EstimatorKind::Rh,
            Estimator::Rh1(_) => EstimatorKind::Rh1,
            Estimator::Rh2(_) => EstimatorKind::Rh2,
            Estimator::Rd3(_) => EstimatorKind::Rd3,
            Estimator::F3(_) => EstimatorKind::F3,
            Estimator::Rh3(_) => EstimatorKind::Rh3,
            Estimator::Rh4(_) => EstimatorKind::Rh4,
            Estimator::Rh0(_) => EstimatorKind::Rh0,
        }
    }

    pub fn eval(&self, n: u64) -> Result<Real> {
        match self {
            Estimator::Rh => rh(n),
            Estimator::Rh1(c) => rh1(n, c),
            Estimator::Rh2(c) => rh2(n, c),
            Estimator::Rd3(c) => rd3(n, c),
            Estimator::F3(c) => f3(n, c),
            Estimator::Rh3(c) => rh3(n, c),
            Estimator::Rh4(c) => rh4(n, c),
            Estimator::Rh0(c) => rh0(n, c),
        }
    }

    /// `⌊E(n) + 1/2⌋`.
    pub fn eval_rounded(&self, n: u64) -> Result<BigInt> {
        round_half_up(&self.eval(n)?)
    }
}

fn require_positive_n(n: u64) -> Result<Real> {
    if n < 1 {
        return Err(Error::domain("estimators are defined for n ≥ 1"));
    }
    Ok(Real::from_u64(n))
}

/// `exp(√(2/3)·π·√x)`.
pub fn growth(x: &Real) -> Real {
    (consts::exp_scale() * x.sqrt()).exp()
}

/// `R_h(n)`.
pub fn rh(n: u64) -> Result<Real> {
    let x = require_positive_n(n)?;
    Ok(rh_at(&x))
}

/// `R_h` at a real argument (`x > 0`).
pub fn rh_at(x: &Real) -> Real {
    growth(x) / (Real::from_u64(4) * consts::sqrt3() * x)
}

pub fn rh1(n: u64, c: &Rh1Coeffs) -> Result<Real> {
    let x = require_positive_n(n)?;
    let shifted = &x + &c.c;
    if !shifted.is_positive() {
        return Err(Error::domain(format!("RH1: n + c₁ ≤ 0 at n = {n}")));
    }
    let radicand = &x + &c.a / shifted.sqrt() + &c.b;
    if !radicand.is_positive() {
        return Err(Error::domain(format!(
            "RH1: exponent radicand {radicand:.12} ≤ 0 at n = {n}"
        )));
    }
    Ok(growth(&radicand) / (Real::from_u64(4) * consts::sqrt3() * x))
}

pub fn rh2(n: u64, c: &Rh2Coeffs) -> Result<Real> {
    let x = require_positive_n(n)?;
    let shifted = &x + &c.c;
    if shifted.is_negative() {
        return Err(Error::domain(format!("RH2: n + c₂ < 0 at n = {n}")));
    }
    let denom = &x + &c.a * shifted.sqrt() + &c.b;
    if !denom.is_positive() {
        return Err(Error::domain(format!(
            "RH2: denominator {denom:.12} ≤ 0 at n = {n}"
        )));
    }
    Ok(growth(&x) / (Real::from_u64(4) * consts::sqrt3() * denom))
}

pub fn rd3(n: u64, c: &Rd3Coeffs) -> Result<Real> {
    let x = require_positive_n(n)?;
    let radicand = &c.a * &x + &c.b;
    if !radicand.is_positive() {
        return Err(Error::domain(format!(
            "RD3: a₃·n + b₃ = {radicand:.12} ≤ 0 at n = {n}; the estimate is imaginary"
        )));
    }
    let factor = Real::one() + radicand.sqrt().recip();
    Ok(rh_at(&x) / factor)
}

pub fn f3(n: u64, c: &Cubic) -> Result<Real> {
    let x = require_positive_n(n)?;
    let c3 = c.eval(&x);
    if !c3.is_positive() {
        return Err(Error::domain(format!("F3: C₃(n) = {c3:.12} ≤ 0 at n = {n}")));
    }
    let correction =
        consts::pi() * growth(&x) / (Real::from_u64(12) * (Real::from_u64(2) * c3).sqrt());
    Ok(rh_at(&x) - correction)
}

pub fn rh3(n: u64, c: &Rh3Coeffs) -> Result<Real> {
    let x = require_positive_n(n)?;
    let u = &x - &c.t0;
    if !u.is_positive() {
        return Err(Error::domain(format!(
            "RH3: n ≤ t₀ = {:.12} at n = {n}",
            c.t0
        )));
    }
    let c4 = c.c4.eval(&u);
    if c4.is_zero() {
        return Err(Error::domain(format!("RH3: C₄(n) = 0 at n = {n}")));
    }
    let correction =
        consts::sqrt2() * &c.t0 * consts::pi() * growth(&u) / (Real::from_u64(24) * c4);
    Ok(rh_at(&x) - correction)
}

pub fn rh4(n: u64, c: &HalfPowerSeries) -> Result<Real> {
    let x = require_positive_n(n)?;
    let c5 = c.eval(&x);
    if c5.is_zero() {
        return Err(Error::domain(format!("RH4: C₅(n) = 0 at n = {n}")));
    }
    let correction =
        consts::pi() * growth(&x) / (Real::from_u64(12) * consts::sqrt2() * c5);
    Ok(rh_at(&x) - correction)
}

/// The piecewise correction `C′₂(n)` and the branch that produced it.
pub fn rh0_correction(n: u64, c: &Rh0Coeffs) -> Result<(Parity, Real)> {
    let (lo, hi) = RH0_RANGE;
    if n < lo || n > hi {
        return Err(Error::Range(format!(
            "RH0 is defined for {lo} ≤ n ≤ {hi}, got n = {n}"
        )));
    }
    let (parity, branch) = c.branch(n);
    let value = branch
        .eval(&Real::from_u64(n))
        .map_err(|e| Error::domain(format!("RH0 {parity:?} branch: {e}")))?;
    Ok((parity, value))
}

pub fn rh0(n: u64, c: &Rh0Coeffs) -> Result<Real> {
    let (_, correction) = rh0_correction(n, c)?;
    let x = Real::from_u64(n);
    let denom = &x + correction;
    if !denom.is_positive() {
        return Err(Error::domain(format!("RH0: n + C′₂(n) ≤ 0 at n = {n}")));
    }
    Ok(growth(&x) / (Real::from_u64(4) * consts::sqrt3() * denom))
}

/// `⌊x + 1/2⌋` for `x ≥ 0`, computed exactly from the working-precision value.
pub fn round_half_up(x: &Real) -> Result<BigInt> {
    if !x.is_finite() || x.is_negative() {
        return Err(Error::domain(format!("cannot round {x} to a partition count")));
    }
    Ok((x + Real::ratio(1, 2))
        .floor_to_bigint()
        .expect("finite value has a floor"))
}

/// Evaluates the estimator of `kind` with coefficients from `registry`.
pub fn estimate(kind: EstimatorKind, n: u64, registry: &Registry) -> Result<Real> {
    registry.estimator(kind)?.eval(n)
}
