//! Randomized invariants of the table, the least-squares solver, the grid
//! search and the report round trips.

use hrpart::analysis::{emit_csv, emit_csv_digits, evaluate_row, parse_report_csv, scan, RowValue, Variant};
use hrpart::estimators::{Estimator, EstimatorKind};
use hrpart::exact::{p_oracle_dp, PartitionTable};
use hrpart::fitting::{grid_refine, linear_lsq, DataSeries, GridConfig, GridModel, NRange};
use hrpart::{Execution, Real};
use proptest::prelude::*;
use std::sync::OnceLock;

fn table() -> &'static PartitionTable {
    static TABLE: OnceLock<PartitionTable> = OnceLock::new();
    TABLE.get_or_init(|| PartitionTable::build(2000))
}

fn dec(units: i64, scale: u32) -> Real {
    Real::from_i64(units) / Real::from_u64(10u64.pow(scale))
}

fn rel_diff(a: &Real, b: &Real) -> Real {
    ((a - b) / b.abs()).abs()
}

fn tol(digits: usize) -> Real {
    Real::from_u64(10).powi(digits).recip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn table_prefix_is_stable(a in 0usize..400, extra in 1usize..200) {
        let small = PartitionTable::build(a);
        let big = PartitionTable::build(a + extra);
        prop_assert_eq!(small.values(), &big.values()[..=a]);
    }

    #[test]
    fn table_is_increasing(n in 2usize..2000) {
        let t = table();
        prop_assert!(t.get(n).unwrap() > t.get(n - 1).unwrap());
    }

    #[test]
    fn table_matches_counting_oracle(n in 0usize..300) {
        prop_assert_eq!(table().get(n).unwrap(), &p_oracle_dp(n));
    }

    #[test]
    fn residuals_are_orthogonal_to_the_basis(
        coeffs in prop::collection::vec(-5000i64..5000, 4),
        noise in prop::collection::vec(-1000i64..1000, 40),
    ) {
        let points: Vec<(Real, Real)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let x = Real::from_u64(20 * i as u64 + 100);
                let root = x.sqrt();
                let y = dec(coeffs[0], 3) * &x * &root + dec(coeffs[1], 3) * &x
                    + dec(coeffs[2], 3) * &root + dec(coeffs[3], 3) + dec(*e, 2);
                (x, y)
            })
            .collect();
        let s = DataSeries::new("noisy", points).unwrap();
        let b15 = |x: &Real| x * x.sqrt();
        let b1 = |x: &Real| x.clone();
        let b05 = |x: &Real| x.sqrt();
        let b0 = |_: &Real| Real::one();
        let fit = linear_lsq(&[&b15, &b1, &b05, &b0], &s).unwrap();
        prop_assert!(fit.orthogonality < tol(20), "{}", fit.orthogonality);
    }

    #[test]
    fn exact_cubic_is_recovered(coeffs in prop::collection::vec(-10_000i64..10_000, 4)) {
        let want: Vec<Real> = coeffs.iter().map(|&c| dec(c, 4)).collect();
        prop_assume!(!want[0].is_zero() && want.iter().all(|w| !w.is_zero()));
        let points: Vec<(Real, Real)> = (0..30u64)
            .map(|i| {
                let x = Real::from_u64(20 * i + 80);
                let y = ((&want[0] * &x + &want[1]) * &x + &want[2]) * &x + &want[3];
                (x, y)
            })
            .collect();
        let s = DataSeries::new("cubic", points).unwrap();
        let fit = hrpart::fitting::pipelines::fit_cubic(&s).unwrap();
        for (name, w) in ["a", "b", "c", "d"].iter().zip(&want) {
            prop_assert!(rel_diff(fit.coefficient(name).unwrap(), w) < tol(10));
        }
    }

    #[test]
    fn recomputed_estimates_are_bit_identical(kind_ix in 0usize..8, n in 1u64..2000, round: bool) {
        let kind = EstimatorKind::ALL[kind_ix];
        let est = Estimator::published(kind);
        let variant = if round { Variant::Rounded } else { Variant::Raw };
        let row = evaluate_row(table(), &est, variant, n).unwrap();
        let again = evaluate_row(table(), &Estimator::published(kind), variant, n).unwrap();
        prop_assert_eq!(&row, &again);
        if let RowValue::Value { estimate, .. } = &row.value {
            let direct = if round {
                Real::from_bigint(&est.eval_rounded(n).unwrap())
            } else {
                est.eval(n).unwrap()
            };
            prop_assert_eq!(estimate, &direct);
        }
    }

    #[test]
    fn csv_round_trip(kind_ix in 0usize..8, start in 1u64..1900, len in 0u64..40, round: bool) {
        let kind = EstimatorKind::ALL[kind_ix];
        let variant = if round { Variant::Rounded } else { Variant::Raw };
        let range = NRange::new(start, (start + len).min(2000), 1).unwrap();
        let report = scan(table(), &Estimator::published(kind), range, variant, Execution::Parallel).unwrap();

        let mut buf = Vec::new();
        emit_csv(&report, &mut buf).unwrap();
        let rows = parse_report_csv(&buf[..]).unwrap();
        prop_assert_eq!(rows.len(), report.rows.len());
        for (orig, back) in report.rows.iter().zip(&rows) {
            prop_assert_eq!(orig.n, back.n);
            prop_assert_eq!(&orig.exact, &back.exact);
            prop_assert_eq!(orig.is_error(), back.is_error());
            if let (Some(a), Some(b)) = (orig.estimate(), back.estimate()) {
                prop_assert!(rel_diff(b, a) < tol(29));
            }
        }
        // Re-emitting the parsed rows reproduces the file exactly.
        let parsed = hrpart::analysis::ErrorReport { rows, ..report.clone() };
        let mut again = Vec::new();
        emit_csv(&parsed, &mut again).unwrap();
        prop_assert_eq!(&buf, &again);

        // At 57 digits the CSV carries the stored values to within rounding.
        let mut wide = Vec::new();
        emit_csv_digits(&report, &mut wide, 57).unwrap();
        for (orig, back) in report.rows.iter().zip(parse_report_csv(&wide[..]).unwrap()) {
            if let (Some(a), Some(b)) = (orig.estimate(), back.estimate()) {
                prop_assert!(rel_diff(b, a) < tol(55));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn grid_search_is_deterministic(scale in 100i64..900, shift in 50i64..1500, offset in -500i64..500) {
        let (a, c, b) = (dec(scale, 3), dec(shift, 3), dec(offset, 3));
        let points: Vec<(Real, Real)> = (0..25u64)
            .map(|i| {
                let x = Real::from_u64(20 * i + 120);
                let y = &a * (&x + &c).sqrt() + &b;
                (x, y)
            })
            .collect();
        let s = DataSeries::new("shifted sqrt", points).unwrap();
        let grid = GridConfig::new("0", "2", "0.1", 4).unwrap();
        let par = grid_refine(&s, &GridModel::ShiftedSqrt, &grid, Execution::Parallel).unwrap();
        let again = grid_refine(&s, &GridModel::ShiftedSqrt, &grid, Execution::Parallel).unwrap();
        let seq = grid_refine(&s, &GridModel::ShiftedSqrt, &grid, Execution::Sequential).unwrap();
        let json = par.to_json().unwrap();
        prop_assert_eq!(&json, &again.to_json().unwrap());
        prop_assert_eq!(&json, &seq.to_json().unwrap());
        // Shifts on the decimal grid are found exactly.
        prop_assert!(rel_diff(par.coefficient("c").unwrap(), &c) < tol(30));
        prop_assert!(rel_diff(par.coefficient("a").unwrap(), &a) < tol(30));
    }
}
