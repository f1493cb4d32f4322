use crate::error::{Error, Result};
use crate::real::Real;

use super::{rms, DataSeries};

/// Columns whose Householder pivot falls below this fraction of the original
/// column norm are treated as linearly dependent.
const RANK_TOLERANCE: &str = "1e-45";

/// Coefficients of a linear least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<Real>,
    pub avg_error: Real,
    /// `maxⱼ |Σᵢ rᵢ·Aᵢⱼ| / (‖r‖·‖Aⱼ‖)`; zero for an exact fit.
    pub orthogonality: Real,
}

/// Least squares over `basis` evaluated at the series abscissae.
pub fn linear_lsq(basis: &[&dyn Fn(&Real) -> Real], series: &DataSeries) -> Result<LinearFit> {
    let columns: Vec<Vec<Real>> = basis
        .iter()
        .map(|f| series.xs().map(f).collect())
        .collect();
    let ys: Vec<Real> = series.ys().cloned().collect();
    linear_lsq_columns(&columns, &ys)
}

/// Least squares for the design matrix given column by column, solved by
/// Householder QR.
pub fn linear_lsq_columns(columns: &[Vec<Real>], ys: &[Real]) -> Result<LinearFit> {
    let m = ys.len();
    let k = columns.len();
    if k == 0 {
        return Err(Error::SingularFit("no basis functions".into()));
    }
    if let Some(bad) = columns.iter().find(|c| c.len() != m) {
        return Err(Error::config(format!(
            "basis column has {} rows, data has {m}",
            bad.len()
        )));
    }
    if m < k {
        return Err(Error::SingularFit(format!(
            "{m} points cannot determine {k} coefficients"
        )));
    }
    if columns.iter().flatten().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in least-squares data"));
    }

    let tol: Real = RANK_TOLERANCE.parse().expect("constant parses");
    let mut a: Vec<Vec<Real>> = columns.to_vec();
    let mut rhs: Vec<Real> = ys.to_vec();
    let mut diag = Vec::with_capacity(k);

    for j in 0..k {
        let col_norm = norm(&columns[j]);
        let sub_norm = norm(&a[j][j..]);
        if col_norm.is_zero() || sub_norm <= &tol * &col_norm {
            return Err(Error::SingularFit(format!(
                "basis column {j} is linearly dependent on the others"
            )));
        }
        // Reflect a[j][j..] onto -sign(a_jj)·‖·‖·e₁.
        let alpha = if a[j][j].is_negative() {
            sub_norm
        } else {
            -sub_norm
        };
        let mut v: Vec<Real> = a[j][j..].to_vec();
        v[0] = &v[0] - &alpha;
        let vtv = dot(&v, &v);
        for col in a.iter_mut().skip(j + 1) {
            reflect(&v, &vtv, &mut col[j..]);
        }
        reflect(&v, &vtv, &mut rhs[j..]);
        diag.push(alpha);
    }

    // Back substitution with R stored in the upper triangle of `a`.
    let mut coef = vec![Real::zero(); k];
    for i in (0..k).rev() {
        let mut s = rhs[i].clone();
        for j in i + 1..k {
            s = s - &a[j][i] * &coef[j];
        }
        coef[i] = s / &diag[i];
    }

    let residuals: Vec<Real> = (0..m)
        .map(|i| {
            let fitted: Real = (0..k).map(|j| &coef[j] * &columns[j][i]).sum();
            &ys[i] - fitted
        })
        .collect();
    let orthogonality = orthogonality_of(columns, &residuals);
    let avg_error = rms(residuals.into_iter());
    Ok(LinearFit {
        coefficients: coef,
        avg_error,
        orthogonality,
    })
}

/// `maxⱼ |Σᵢ rᵢ·basisⱼ(xᵢ)| / (‖r‖·‖basisⱼ‖)` for the given coefficients.
pub fn residual_orthogonality(
    basis: &[&dyn Fn(&Real) -> Real],
    series: &DataSeries,
    coefficients: &[Real],
) -> Real {
    let columns: Vec<Vec<Real>> = basis
        .iter()
        .map(|f| series.xs().map(f).collect())
        .collect();
    let residuals: Vec<Real> = series
        .ys()
        .enumerate()
        .map(|(i, y)| {
            let fitted: Real = columns
                .iter()
                .zip(coefficients)
                .map(|(col, c)| c * &col[i])
                .sum();
            y - fitted
        })
        .collect();
    orthogonality_of(&columns, &residuals)
}

fn orthogonality_of(columns: &[Vec<Real>], residuals: &[Real]) -> Real {
    let rn = norm(residuals);
    if rn.is_zero() {
        return Real::zero();
    }
    columns
        .iter()
        .map(|col| (dot(col, residuals) / (&rn * norm(col))).abs())
        .fold(Real::zero(), |acc, v| if v > acc { v } else { acc })
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[Real]) -> Real {
    dot(a, a).sqrt()
}

/// `x ← x − 2·v·(vᵀx)/(vᵀv)`
fn reflect(v: &[Real], vtv: &Real, x: &mut [Real]) {
    let scale = Real::from_u64(2) * dot(v, x) / vtv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi = &*xi - &scale * vi;
    }
}
