//! Sweep cells, their stable keys and cache digests.

use std::cmp::Ordering;

use radmorse::io::fmt_f64;
use radmorse::pipeline::AnalysisOptions;
use radmorse::problem::ProblemSpec;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Changes whenever a file format or a numerical default changes.
pub const VERSION_TAG: &str = concat!("radmorse-", env!("CARGO_PKG_VERSION"), "/formats-v1");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: u32,
    pub alpha: f64,
    pub p: f64,
    pub m: u32,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("N{}_a{}_p{}_m{}", self.n, self.alpha, self.p, self.m)
    }

    pub fn spec(&self) -> radmorse::Result<ProblemSpec> {
        ProblemSpec::power(self.n, self.alpha, self.p, self.m)
    }

    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.p.total_cmp(&other.p))
            .then(self.m.cmp(&other.m))
    }

    fn inputs(&self) -> String {
        format!("{}|{}|{}|{}|{}", VERSION_TAG, self.n, fmt_f64(self.alpha), fmt_f64(self.p), self.m)
    }

    /// Digest of everything the profile depends on.
    pub fn profile_digest(&self, o: &AnalysisOptions) -> String {
        let s = &o.shoot;
        let text = format!(
            "profile|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.inputs(),
            fmt_f64(s.rtol),
            fmt_f64(s.atol),
            fmt_f64(s.t_start),
            fmt_f64(s.overflow_guard),
            fmt_f64(s.event_tol),
            s.samples_per_step,
            s.max_steps,
            fmt_f64(o.residual_tol),
        );
        sha256(&text)
    }

    /// Digest of everything the spectra and diagnostics depend on.
    pub fn spectrum_digest(&self, o: &AnalysisOptions) -> String {
        let s = &o.spectrum;
        let text = format!(
            "spectrum|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.profile_digest(o),
            fmt_f64(s.rtol),
            fmt_f64(s.atol),
            fmt_f64(s.eig_tol),
            fmt_f64(s.residual_tol),
            s.max_steps,
            o.backend.as_str(),
            o.resolution,
            fmt_f64(o.deg_tol),
            fmt_f64(o.tol_energy),
            fmt_f64(o.residual_tol),
        );
        sha256(&text)
    }
}

pub fn sha256(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// All cells of the sweep in sorted key order, without duplicates.
pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        for &alpha in &cfg.alpha {
            for &p in &cfg.p {
                for &m in &cfg.m {
                    out.push(Cell { n, alpha, p, m });
                }
            }
        }
    }
    out.sort_by(|a, b| a.cmp_key(b));
    out.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
    out
}
