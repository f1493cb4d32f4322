//! Exact partition numbers.
//!
//! [`PartitionTable::build`] evaluates Euler's pentagonal recurrence
//!
//! ```text
//! p(n) = Σ_{k≥1} (-1)^{k-1} [ p(n - k(3k+1)/2) + p(n - k(3k-1)/2) ]
//! ```
//!
//! bottom-up over a dense table, with the summation bounds
//! `k₁ = ⌊(√(24n+1) - 1)/6⌋` and `k₂ = ⌊(√(24n+1) + 1)/6⌋` taken from an exact
//! integer square root. [`p_oracle_dp`] counts the same numbers by a
//! largest-part dynamic program that shares nothing with the recurrence.

use std::fs;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Version tag written into serialized tables.
pub const TABLE_FORMAT_VERSION: u32 = 1;

/// `p(0..=max_n)` as exact integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTable {
    values: Vec<BigUint>,
}

/// Summation bounds `(k₁, k₂)` of the pentagonal recurrence for `n`.
pub fn pentagonal_bounds(n: usize) -> (usize, usize) {
    let root = (24 * n as u128 + 1).sqrt() as usize;
    ((root - 1) / 6, (root + 1) / 6)
}

impl PartitionTable {
    pub fn build(max_n: usize) -> Self {
        let mut values: Vec<BigUint> = Vec::with_capacity(max_n + 1);
        values.push(BigUint::one());
        for n in 1..=max_n {
            let (k1, k2) = pentagonal_bounds(n);
            // Positive and negative contributions are accumulated separately so
            // the arithmetic stays in unsigned integers.
            let mut plus = BigUint::zero();
            let mut minus = BigUint::zero();
            for k in 1..=k1.max(k2) {
                let acc = if k % 2 == 1 { &mut plus } else { &mut minus };
                if k <= k1 {
                    *acc += &values[n - k * (3 * k + 1) / 2];
                }
                if k <= k2 {
                    *acc += &values[n - k * (3 * k - 1) / 2];
                }
            }
            values.push(plus - minus);
        }
        PartitionTable { values }
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: a table holds at least `p(0)`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize) -> Result<&BigUint> {
        self.values.get(n).ok_or(Error::Index {
            index: n,
            len: self.values.len(),
        })
    }

    /// `p(n)` as a signed integer (the form used in error arithmetic).
    pub fn p(&self, n: usize) -> Result<BigInt> {
        self.get(n).map(|v| BigInt::from(v.clone()))
    }

    /// `p(n)` converted to working precision.
    pub fn p_real(&self, n: usize) -> Result<Real> {
        self.get(n).map(Real::from_biguint)
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    /// Verifies the structural invariants of a table read from outside.
    fn validate(values: &[BigUint]) -> Result<()> {
        let expect = [1u32, 1, 2];
        for (i, want) in expect.iter().enumerate().take(values.len()) {
            if values[i] != BigUint::from(*want) {
                return Err(Error::Parse(format!("p({i}) must equal {want}")));
            }
        }
        if values.is_empty() {
            return Err(Error::Parse("empty partition table".into()));
        }
        for i in 1..values.len().saturating_sub(1) {
            if values[i + 1] <= values[i] {
                return Err(Error::Parse(format!(
                    "partition table not strictly increasing at n = {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TableDocument {
            format_version: TABLE_FORMAT_VERSION,
            max_n: self.max_n(),
            values: self.values.iter().map(|v| v.to_string()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TableDocument = serde_json::from_str(s)?;
        if doc.format_version != TABLE_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported table format version {}",
                doc.format_version
            )));
        }
        if doc.values.len() != doc.max_n + 1 {
            return Err(Error::Parse(format!(
                "table header says max_n = {} but holds {} values",
                doc.max_n,
                doc.values.len()
            )));
        }
        let values = doc
            .values
            .iter()
            .map(|s| {
                s.parse::<BigUint>()
                    .map_err(|_| Error::Parse(format!("invalid integer {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::validate(&values)?;
        Ok(PartitionTable { values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Loads `cache_dir/partitions-<max_n>.json` if present, otherwise builds
    /// the table and writes it there. A cache file that fails to parse is
    /// rebuilt.
    pub fn load_or_build(cache_dir: &Path, max_n: usize) -> Result<Self> {
        let path = cache_dir.join(format!("partitions-{max_n}.json"));
        if let Ok(table) = Self::load(&path) {
            if table.max_n() == max_n {
                return Ok(table);
            }
        }
        let table = Self::build(max_n);
        fs::create_dir_all(cache_dir)?;
        table.save(&path)?;
        Ok(table)
    }
}

#[derive(Serialize, Deserialize)]
struct TableDocument {
    format_version: u32,
    max_n: usize,
    values: Vec<String>,
}

/// `p(n)` from a table, with an explicit out-of-range error.
pub fn p_exact(table: &PartitionTable, n: usize) -> Result<BigUint> {
    table.get(n).cloned()
}

/// `p(n)` by counting partitions with parts bounded by `m`, for `m = 1..=n`:
/// `q(i, m) = q(i, m-1) + q(i-m, m)`. Quadratic in `n`.
pub fn p_oracle_dp(n: usize) -> BigUint {
    p_oracle_dp_table(n).swap_remove(n)
}

/// `p(0..=max_n)` from the same dynamic program as [`p_oracle_dp`].
pub fn p_oracle_dp_table(max_n: usize) -> Vec<BigUint> {
    // ways[i] holds the number of partitions of i into parts no larger than
    // the current bound.
    let mut ways = vec![BigUint::zero(); max_n + 1];
    ways[0] = BigUint::one();
    for part in 1..=max_n {
        for i in part..=max_n {
            let (lo, hi) = ways.split_at_mut(i);
            hi[0] += &lo[i - part];
        }
    }
    ways
}

/// Number of bytes needed to store `p(n)` given an approximation of it:
/// `⌈(log₂ v + 1)/8⌉`.
pub fn storage_bytes_estimate(estimate: &Real) -> Result<u64> {
    if !estimate.is_positive() {
        return Err(Error::domain(format!(
            "storage estimate needs a positive approximation, got {estimate}"
        )));
    }
    let bits = estimate.log2() + Real::one();
    let eighths = bits / Real::from_u64(8);
    // ⌈x⌉ = -⌊-x⌋
    let ceil = -(-eighths).floor_to_bigint().expect("finite");
    u64::try_from(ceil).map_err(|_| Error::domain("storage estimate overflows u64"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(s: &str) -> BigUint {
        s.parse().unwrap()
    }

    #[test]
    fn small_tables() {
        assert_eq!(PartitionTable::build(0).values(), &[BigUint::one()]);
        let t = PartitionTable::build(5);
        let want: Vec<BigUint> = [1u32, 1, 2, 3, 5, 7].iter().map(|&v| v.into()).collect();
        assert_eq!(t.values(), &want[..]);
    }

    #[test]
    fn published_values() {
        let t = PartitionTable::build(200);
        assert_eq!(t.get(100).unwrap(), &big("190569292"));
        assert_eq!(t.get(200).unwrap(), &big("3972999029388"));
    }

    #[test]
    fn lookup_bounds() {
        let t = PartitionTable::build(10);
        assert_eq!(p_exact(&t, 10).unwrap(), big("42"));
        assert_eq!(p_exact(&t, 0).unwrap(), big("1"));
        assert!(matches!(
            p_exact(&t, 11),
            Err(Error::Index { index: 11, len: 11 })
        ));
    }

    #[test]
    fn bounds_at_perfect_squares() {
        // 24n + 1 is a perfect square exactly when n is generalized pentagonal.
        assert_eq!(pentagonal_bounds(1), (0, 1)); // √25 = 5
        assert_eq!(pentagonal_bounds(2), (1, 1)); // √49 = 7
        assert_eq!(pentagonal_bounds(5), (1, 2)); // √121 = 11
        assert_eq!(pentagonal_bounds(7), (2, 2)); // √169 = 13
        assert_eq!(pentagonal_bounds(4), (1, 1)); // √97 ≈ 9.85
        for n in 1..2000usize {
            let (k1, k2) = pentagonal_bounds(n);
            assert!(k1 * (3 * k1 + 1) / 2 <= n);
            assert!((k1 + 1) * (3 * k1 + 4) / 2 > n);
            assert!(k2 * (3 * k2 - 1) / 2 <= n);
            assert!((k2 + 1) * (3 * k2 + 2) / 2 > n);
        }
    }

    #[test]
    fn oracle_small_values() {
        assert_eq!(p_oracle_dp(0), big("1"));
        assert_eq!(p_oracle_dp(4), big("5"));
        assert_eq!(p_oracle_dp(100), big("190569292"));
    }

    #[test]
    fn storage_estimate() {
        assert_eq!(storage_bytes_estimate(&Real::one()).unwrap(), 1);
        assert_eq!(
            storage_bytes_estimate(&Real::from_u64(190569292)).unwrap(),
            4
        );
        // log2(255) + 1 < 9 → two bytes; log2(2^15) + 1 = 16 → exactly two.
        assert_eq!(storage_bytes_estimate(&Real::from_u64(255)).unwrap(), 2);
        assert_eq!(storage_bytes_estimate(&Real::from_u64(1 << 15)).unwrap(), 2);
        assert!(storage_bytes_estimate(&Real::zero()).unwrap_err().is_domain());
        assert!(storage_bytes_estimate(&Real::from_i64(-3)).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let t = PartitionTable::build(60);
        let back = PartitionTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"format_version":1,"max_n":2,"values":["1","1","3"]}"#;
        assert!(PartitionTable::from_json(bad).is_err());
        let short = r#"{"format_version":1,"max_n":3,"values":["1","1","2"]}"#;
        assert!(PartitionTable::from_json(short).is_err());
        let version = r#"{"format_version":9,"max_n":0,"values":["1"]}"#;
        assert!(PartitionTable::from_json(version).is_err());
    }

    #[test]
    fn cache_reuses_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = PartitionTable::load_or_build(dir.path(), 30).unwrap();
        assert!(dir.path().join("partitions-30.json").exists());
        let b = PartitionTable::load_or_build(dir.path(), 30).unwrap();
        assert_eq!(a, b);
    }
}
