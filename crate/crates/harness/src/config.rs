//! Flat `key = value` run configuration. Repeated keys (or comma-separated
//! values) form lists; `#` starts a comment.

use std::path::PathBuf;

use radmorse::pipeline::{AnalysisOptions, Backend};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    Reuse,
    Recompute,
}

impl CachePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            CachePolicy::Reuse => "reuse",
            CachePolicy::Recompute => "recompute",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: Vec<u32>,
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub m: Vec<u32>,
    pub options: AnalysisOptions,
    pub out: PathBuf,
    pub cache: CachePolicy,
    pub workers: usize,
    /// Record wall times in cell records. Off by default, since timings
    /// break byte-level reproducibility.
    pub timings: bool,
    /// Emit the zero-potential comparison table with the spectra.
    pub selftest: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: vec![2, 3, 4, 5],
            alpha: vec![0.0, 1.0, 2.0, 3.5, 6.0],
            p: vec![2.0, 3.0, 5.0],
            m: vec![1, 2, 3, 4],
            options: AnalysisOptions::default(),
            out: PathBuf::from("sweep"),
            cache: CachePolicy::Reuse,
            workers: 1,
            timings: false,
            selftest: false,
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line,
        message: msg.into(),
    }
}

fn parse_items<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| bad(line, format!("bad value {s:?} for {key}"))))
        .collect()
}

fn single<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| bad(line, format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        // axes named in the file replace the defaults, even when left empty
        let mut seen = [false; 4];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let o = &mut cfg.options;
            match key {
                "n" | "alpha" | "p" | "m" => {
                    let slot = ["n", "alpha", "p", "m"].iter().position(|k| *k == key).unwrap();
                    if !seen[slot] {
                        seen[slot] = true;
                        match slot {
                            0 => cfg.n.clear(),
                            1 => cfg.alpha.clear(),
                            2 => cfg.p.clear(),
                            _ => cfg.m.clear(),
                        }
                    }
                    match slot {
                        0 => cfg.n.extend(parse_items::<u32>(line, key, value)?),
                        1 => cfg.alpha.extend(parse_items::<f64>(line, key, value)?),
                        2 => cfg.p.extend(parse_items::<f64>(line, key, value)?),
                        _ => cfg.m.extend(parse_items::<u32>(line, key, value)?),
                    }
                }
                "shoot_rtol" => o.shoot.rtol = single(line, key, value)?,
                "shoot_atol" => o.shoot.atol = single(line, key, value)?,
                "t_start" => o.shoot.t_start = single(line, key, value)?,
                "spectrum_rtol" => o.spectrum.rtol = single(line, key, value)?,
                "spectrum_atol" => o.spectrum.atol = single(line, key, value)?,
                "eig_tol" => o.spectrum.eig_tol = single(line, key, value)?,
                "rayleigh_tol" => o.spectrum.residual_tol = single(line, key, value)?,
                "residual_tol" => o.residual_tol = single(line, key, value)?,
                "tol_energy" => o.tol_energy = single(line, key, value)?,
                "deg_tol" => o.deg_tol = single(line, key, value)?,
                "resolution" => {
                    o.resolution = single(line, key, value)?;
                    if o.resolution < 256 {
                        return Err(bad(line, "resolution must be at least 256"));
                    }
                }
                "backend" => {
                    o.backend = Backend::parse(value).ok_or_else(|| bad(line, format!("unknown backend {value:?}")))?
                }
                "out" => cfg.out = PathBuf::from(value),
                "cache" => {
                    cfg.cache = match value {
                        "reuse" => CachePolicy::Reuse,
                        "recompute" => CachePolicy::Recompute,
                        _ => return Err(bad(line, format!("unknown cache policy {value:?}"))),
                    }
                }
                "workers" => cfg.workers = single::<usize>(line, key, value)?.max(1),
                "timings" => cfg.timings = single(line, key, value)?,
                "selftest" => cfg.selftest = single(line, key, value)?,
                _ => return Err(bad(line, format!("unknown key {key:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_overrides() {
        let cfg = RunConfig::parse("n = 2\nn = 3, 4 # more\nalpha = 0.5\nbackend = shooting\ncache = recompute\n").unwrap();
        assert_eq!(cfg.n, vec![2, 3, 4]);
        assert_eq!(cfg.alpha, vec![0.5]);
        assert_eq!(cfg.p, vec![2.0, 3.0, 5.0]);
        assert_eq!(cfg.options.backend, Backend::Shooting);
        assert_eq!(cfg.cache, CachePolicy::Recompute);
    }

    #[test]
    fn empty_axis_and_errors() {
        let cfg = RunConfig::parse("m =\n").unwrap();
        assert!(cfg.m.is_empty());
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("n = two").is_err());
        assert!(RunConfig::parse("resolution = 100").is_err());
    }
}
