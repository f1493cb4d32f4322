//! Settings shared by every subcommand: the optional JSON config file, the
//! table cache and the coefficient registry.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hrpart::fitting::pipelines::FitConfig;
use hrpart::{Execution, PartitionTable, Registry};
use serde::Deserialize;

pub const CACHE_ENV: &str = "HRPART_CACHE_DIR";
pub const MIN_DIGITS: usize = 30;
/// Roughly what 192 bits of mantissa can carry.
pub const MAX_DIGITS: usize = 57;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Csv,
    Json,
}

/// Contents of a `--config` file. Every key is optional and mirrors a
/// command-line flag; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub coeffs: Option<PathBuf>,
    pub digits: Option<usize>,
    pub format: Option<Format>,
    pub sequential: bool,
    pub fit: FitConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Resolved settings after merging flags over the config file.
#[derive(Debug)]
pub struct Settings {
    pub cache_dir: Option<PathBuf>,
    pub registry: Registry,
    pub digits: usize,
    pub format: Option<Format>,
    pub exec: Execution,
}

impl Settings {
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Exact table covering `0..=max_n`, from the cache when possible.
    pub fn table(&self, max_n: u64) -> Result<PartitionTable> {
        let max_n = usize::try_from(max_n).context("n too large")?;
        let Some(dir) = &self.cache_dir else {
            return Ok(PartitionTable::build(max_n));
        };
        if let Some(table) = cached_covering(dir, max_n) {
            return Ok(table);
        }
        match PartitionTable::load_or_build(dir, max_n) {
            Ok(t) => Ok(t),
            Err(e) => {
                eprintln!("warning: table cache at {} unusable: {e}", dir.display());
                Ok(PartitionTable::build(max_n))
            }
        }
    }
}

/// The smallest cached table that reaches `max_n`, if any.
fn cached_covering(dir: &Path, max_n: usize) -> Option<PartitionTable> {
    let mut sizes: Vec<usize> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_prefix("partitions-")?
                .strip_suffix(".json")?
                .parse()
                .ok()
        })
        .filter(|&m| m >= max_n)
        .collect();
    sizes.sort_unstable();
    sizes.into_iter().find_map(|m| {
        PartitionTable::load(&dir.join(format!("partitions-{m}.json")))
            .ok()
            .filter(|t| t.max_n() == m)
    })
}

/// Cache directory: flag, then config file, then the environment, then the
/// user cache directory.
pub fn resolve_cache_dir(flag: Option<PathBuf>, file: Option<PathBuf>, disabled: bool) -> Option<PathBuf> {
    if disabled {
        return None;
    }
    flag.or(file)
        .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| {
            let base = std::env::var_os("XDG_CACHE_HOME")
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))?;
            Some(base.join("hrpart"))
        })
}

pub fn load_registry(path: Option<&Path>) -> Result<Registry> {
    match path {
        Some(p) => Registry::load(p).with_context(|| format!("loading coefficients from {}", p.display())),
        None => Ok(Registry::published()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_fields() {
        let cfg: FileConfig = serde_json::from_str(
            r#"{"digits": 40, "format": "csv", "fit": {"max_iter": 12, "fix_e2": true}}"#,
        )
        .unwrap();
        assert_eq!(cfg.digits, Some(40));
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.fit.max_iter, Some(12));
        assert!(cfg.fit.fix_e2);
        assert!(serde_json::from_str::<FileConfig>(r#"{"colour": 1}"#).is_err());
    }

    #[test]
    fn cache_reuses_larger_table() {
        let dir = tempfile::tempdir().unwrap();
        PartitionTable::build(50).save(&dir.path().join("partitions-50.json")).unwrap();
        let t = cached_covering(dir.path(), 20).unwrap();
        assert_eq!(t.max_n(), 50);
        assert!(cached_covering(dir.path(), 60).is_none());
    }

    #[test]
    fn disabled_cache() {
        assert_eq!(resolve_cache_dir(Some("x".into()), None, true), None);
        assert_eq!(
            resolve_cache_dir(Some("x".into()), Some("y".into()), false),
            Some(PathBuf::from("x"))
        );
    }
}
