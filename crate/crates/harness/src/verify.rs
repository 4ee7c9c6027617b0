//! Post-run verification: every stored cell is re-derived from its
//! spectrum file and checked against its record.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use radmorse::io::{fmt_f64, Record};

use crate::cell::Cell;
use crate::config::RunConfig;
use crate::error::Result;
use crate::record::MorseSummary;
use crate::sweep::{load_records, morse_from_disk, write_file};

pub const RAYLEIGH_TOL: f64 = 1e-6;
pub const OVERLAP_TOL: f64 = 1e-8;
pub const WRONSKIAN_TOL: f64 = 1e-5;
pub const AGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct VerifySummary {
    pub cells: usize,
    pub ok: usize,
    pub skipped: usize,
    pub failed: usize,
    pub missing: usize,
    pub verdicts_passed: usize,
    pub verdicts_failed: usize,
    /// Failing verdicts on cells flagged as near-ties.
    pub verdicts_tied: usize,
    /// Smallest slack per verdict name.
    pub min_slack: BTreeMap<String, f64>,
    /// `(cell, check)` for failed diagnostic checks.
    pub check_failures: Vec<(String, String)>,
    /// Cells whose stored data could not be re-derived or disagree with
    /// their record.
    pub integrity_failures: Vec<(String, String)>,
    pub near_tie: Vec<String>,
    pub degenerate: Vec<String>,
    pub failed_verdicts: Vec<(String, String)>,
}

impl VerifySummary {
    /// True unless a verdict fails outside a flagged near-tie or stored
    /// data is inconsistent.
    pub fn passed(&self) -> bool {
        self.verdicts_failed == 0 && self.integrity_failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "cells={} ok={} skipped={} failed={} missing={}",
            self.cells, self.ok, self.skipped, self.failed, self.missing
        );
        let _ = writeln!(
            s,
            "verdicts passed={} failed={} tied={}",
            self.verdicts_passed, self.verdicts_failed, self.verdicts_tied
        );
        for (name, slack) in &self.min_slack {
            let _ = writeln!(s, "min_slack {name}={}", fmt_f64(*slack));
        }
        for (cell, name) in &self.failed_verdicts {
            let _ = writeln!(s, "verdict_failed {cell} {name}");
        }
        for (cell, check) in &self.check_failures {
            let _ = writeln!(s, "check_failed {cell} {check}");
        }
        for (cell, why) in &self.integrity_failures {
            let _ = writeln!(s, "integrity_failed {cell} {why}");
        }
        let list = |v: &[String]| if v.is_empty() { "-".to_string() } else { v.join(",") };
        let _ = writeln!(s, "near_tie {}", list(&self.near_tie));
        let _ = writeln!(s, "degenerate {}", list(&self.degenerate));
        let _ = writeln!(s, "result {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Diagnostic checks for one completed cell.
pub fn cell_checks(cell: &Cell, cfg: &RunConfig, diag: &crate::record::Diagnostics, s: &MorseSummary) -> Vec<(&'static str, bool)> {
    let mut out = vec![
        ("profile_residual", diag.residual <= cfg.options.residual_tol),
        ("profile_structure", diag.structure_ok),
        ("z_function", diag.z_ok && diag.z_zeros.is_none_or(|z| z == cell.m as usize)),
        ("nodal_law", diag.nodal_ok),
        ("rayleigh_defect", diag.max_rayleigh <= RAYLEIGH_TOL),
        ("orthogonality", diag.max_overlap <= OVERLAP_TOL),
        ("wronskian", diag.max_wronskian <= WRONSKIAN_TOL),
        ("inertia", s.classical_negative_count == s.nu_hat.len()),
        ("radial_nondegenerate", !s.radial_degenerate),
    ];
    if let Some(v) = s.nu_next {
        out.push(("nu_next_positive", v > 0.0));
    }
    if let Some((ms, mc)) = s.matrix_counts {
        out.push(("matrix_inertia", s.matrix_counts_stable && ms == mc && ms == s.nu_hat.len()));
    }
    if let Some(gap) = s.agreement {
        out.push(("backend_agreement", gap <= AGREEMENT_TOL));
    }
    out
}

fn record_mismatch(r: &Record, s: &MorseSummary) -> Option<String> {
    let stored = (r.get("m_rad"), r.get("morse_index"));
    let fresh = (s.m_rad.to_string(), s.morse_index.to_string());
    if stored.0 != Some(fresh.0.as_str()) || stored.1 != Some(fresh.1.as_str()) {
        return Some(format!(
            "record m_rad={} morse_index={} but spectrum gives {} and {}",
            stored.0.unwrap_or("-"),
            stored.1.unwrap_or("-"),
            fresh.0,
            fresh.1
        ));
    }
    None
}

/// Verifies the stored sweep and writes `verification.log` and
/// `verification.txt` under the output directory.
pub fn verify(cfg: &RunConfig) -> Result<VerifySummary> {
    let mut sum = VerifySummary::default();
    let mut log = String::from("# radmorse-verification v1\n");
    for (cell, rec) in load_records(cfg) {
        sum.cells += 1;
        let key = cell.key();
        let Some(rec) = rec else {
            sum.missing += 1;
            continue;
        };
        match rec.get("status") {
            Some("ok") => {}
            Some("skipped") => {
                sum.skipped += 1;
                continue;
            }
            _ => {
                sum.failed += 1;
                continue;
            }
        }
        if rec.get("m_rad").is_none() {
            // stopped before the Morse stage
            continue;
        }
        sum.ok += 1;
        let (diag, s) = match morse_from_disk(&cfg.out, &cell, cfg) {
            Ok(x) => x,
            Err(e) => {
                sum.integrity_failures.push((key.clone(), e.to_string()));
                continue;
            }
        };
        if let Some(why) = record_mismatch(&rec, &s) {
            sum.integrity_failures.push((key.clone(), why));
        }
        let tied = !s.near_tie.is_empty();
        if tied {
            sum.near_tie.push(key.clone());
        }
        if s.radial_degenerate || !s.nonradial.is_empty() {
            sum.degenerate.push(key.clone());
        }
        for v in &s.verdicts {
            let slot = sum.min_slack.entry(v.name.clone()).or_insert(f64::INFINITY);
            *slot = slot.min(v.slack);
            let mut r = Record::new();
            r.push("cell", &key)
                .push("kind", "verdict")
                .push("name", &v.name)
                .push("holds", v.holds)
                .push_f64("slack", v.slack)
                .push("inputs", &v.inputs);
            log.push_str(&r.to_line());
            log.push('\n');
            if v.holds {
                sum.verdicts_passed += 1;
            } else if tied {
                sum.verdicts_tied += 1;
            } else {
                sum.verdicts_failed += 1;
                sum.failed_verdicts.push((key.clone(), v.name.clone()));
            }
        }
        for (name, ok) in cell_checks(&cell, cfg, &diag, &s) {
            let mut r = Record::new();
            r.push("cell", &key).push("kind", "check").push("name", name).push("holds", ok);
            log.push_str(&r.to_line());
            log.push('\n');
            if !ok {
                sum.check_failures.push((key.clone(), name.to_string()));
            }
        }
    }
    write_file(&cfg.out.join("verification.log"), &log)?;
    write_file(&cfg.out.join("verification.txt"), &sum.render())?;
    Ok(sum)
}
