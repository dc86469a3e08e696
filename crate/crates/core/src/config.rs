//! Run configuration in a `key = value` text format.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; keys are case sensitive; later keys override
//! earlier ones. Recognized keys:
//!
//! | key | default |
//! |-----|---------|
//! | `period` | `52` |
//! | `granularities` | `w,2w,m4w,q,sa,a` |
//! | `jobs` | `0` (all cores) |
//! | `temporal_weights` | `structural` |
//! | `proportions` | `avg_hist` |
//! | `ets.max_seasonal_period` | `24` |
//! | `ets.max_evals` | `4000` |
//! | `arima.stepwise` | `true` |
//! | `arima.max_p`, `arima.max_q` | `5` |
//! | `arima.max_sp`, `arima.max_sq` | `2` |
//! | `arima.max_d` | `2` |
//! | `arima.max_order` | `5` |
//! | `arima.max_evals` | `2000` |
//! | `cache_dir` | unset |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dataset::Granularity;
use crate::error::{Error, Result};
use crate::forecasters::ModelConfig;
use crate::reconcile::{ProportionMethod, WeightKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub period: usize,
    pub granularities: Vec<Granularity>,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
    pub temporal_weights: WeightKind,
    pub proportions: ProportionMethod,
    pub models: ModelConfig,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            period: 52,
            granularities: Granularity::ALL.to_vec(),
            jobs: 0,
            temporal_weights: WeightKind::Structural,
            proportions: ProportionMethod::AverageHistorical,
            models: ModelConfig::default(),
            cache_dir: None,
        }
    }
}

/// Parses `key = value` lines into a map.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse("config", format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse("config", format!("line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse("config", format!("`{key}`: `{v}` is not a valid number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::parse("config", format!("`{key}`: `{v}` is not a boolean"))),
    }
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn from_str_pairs(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&parse_pairs(text)?)?;
        Ok(cfg)
    }

    /// Applies overrides; unknown keys are an error.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let a = &mut self.models.arima;
        match key {
            "period" => {
                self.period = parse_num(key, v)?;
                if self.period == 0 {
                    return Err(Error::validation("period must be >= 1"));
                }
            }
            "granularities" => self.granularities = Granularity::parse_list(v)?,
            "jobs" => self.jobs = parse_num(key, v)?,
            "temporal_weights" => self.temporal_weights = v.parse()?,
            "proportions" => self.proportions = v.parse()?,
            "ets.max_seasonal_period" => self.models.ets.max_seasonal_period = parse_num(key, v)?,
            "ets.max_evals" => self.models.ets.max_evals = parse_num(key, v)?,
            "arima.stepwise" => a.stepwise = parse_bool(key, v)?,
            "arima.max_p" => a.max_p = parse_num(key, v)?,
            "arima.max_q" => a.max_q = parse_num(key, v)?,
            "arima.max_sp" => a.max_sp = parse_num(key, v)?,
            "arima.max_sq" => a.max_sq = parse_num(key, v)?,
            "arima.max_d" => a.max_d = parse_num(key, v)?,
            "arima.max_order" => a.max_order = parse_num(key, v)?,
            "arima.max_evals" => a.max_evals = parse_num(key, v)?,
            "cache_dir" => self.cache_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            other => return Err(Error::validation(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Settings that change results, as sorted `key=value` lines.
    /// Worker count and cache location are excluded.
    pub fn canonical_lines(&self) -> Vec<String> {
        let a = &self.models.arima;
        let e = &self.models.ets;
        let grans: Vec<&str> = self.granularities.iter().map(|g| g.tag()).collect();
        let mut lines = vec![
            format!("period={}", self.period),
            format!("granularities={}", grans.join(",")),
            format!("temporal_weights={}", self.temporal_weights.tag()),
            format!("proportions={}", self.proportions.tag()),
            format!("ets.max_seasonal_period={}", e.max_seasonal_period),
            format!("ets.max_evals={}", e.max_evals),
            format!("arima.stepwise={}", a.stepwise),
            format!("arima.max_p={}", a.max_p),
            format!("arima.max_q={}", a.max_q),
            format!("arima.max_sp={}", a.max_sp),
            format!("arima.max_sq={}", a.max_sq),
            format!("arima.max_d={}", a.max_d),
            format!("arima.max_order={}", a.max_order),
            format!("arima.max_evals={}", a.max_evals),
        ];
        lines.sort();
        lines
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_lines`](Self::canonical_lines).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_lines().join("\n").as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn header_line(&self) -> String {
        format!("config_hash={}", self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = RunConfig::from_str_pairs("# comment\nperiod = 12\n\ngranularities=w,q\narima.stepwise=false\n").unwrap();
        assert_eq!(cfg.period, 12);
        assert_eq!(cfg.granularities, vec![Granularity::Weekly, Granularity::Quarterly]);
        assert!(!cfg.models.arima.stepwise);
        assert!(RunConfig::from_str_pairs("nope=1").is_err());
        assert!(RunConfig::from_str_pairs("period").is_err());
    }

    #[test]
    fn hash_ignores_jobs_and_tracks_models() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.jobs = 8;
        assert_eq!(a.hash(), b.hash());
        b.models.arima.max_p = 3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
