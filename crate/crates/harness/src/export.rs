//! Read-only CSV export of the stored sweep.
//!
//! `export.csv` starts with a `# radmorse-export v1` line followed by the
//! column header; columns are only ever appended within a version.
//! Cells without a completed record are listed in `missing.txt`.

use crate::config::RunConfig;
use crate::error::Result;
use crate::record::{ExportRow, SweepRecord};
use crate::sweep::{load_records, write_file};

pub const EXPORT_FORMAT: &str = "radmorse-export v1";

pub const COLUMNS: [&str; 22] = [
    "key",
    "n",
    "alpha",
    "p",
    "m",
    "m_eff",
    "m_rad",
    "morse_index",
    "general_lower_bound",
    "refined_lower_bound",
    "nu_hat",
    "j",
    "verdicts_passed",
    "verdicts_failed",
    "min_slack",
    "radial_degenerate",
    "nonradial_hits",
    "near_tie",
    "agreement",
    "profile_digest",
    "status",
    "reason",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn semicolons(xs: &[f64]) -> String {
    if xs.is_empty() {
        "-".into()
    } else {
        xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
    }
}

fn row(r: &ExportRow) -> String {
    [
        r.key.clone(),
        r.n.clone(),
        r.alpha.clone(),
        r.p.clone(),
        r.m.clone(),
        r.m_eff.clone(),
        r.m_rad.clone(),
        r.morse_index.clone(),
        r.general_lower_bound.clone(),
        r.refined_lower_bound.clone(),
        semicolons(&r.nu_hat),
        semicolons(&r.j),
        r.verdicts_passed.clone(),
        r.verdicts_failed.clone(),
        r.min_slack.clone(),
        r.radial_degenerate.clone(),
        r.nonradial_hits.replace(',', ";"),
        r.near_tie.replace(',', ";"),
        r.agreement.clone(),
        r.profile_digest.clone(),
        r.status.clone(),
        r.reason.clone(),
    ]
    .iter()
    .map(|s| csv_field(s))
    .collect::<Vec<_>>()
    .join(",")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub rows: usize,
    pub missing: usize,
}

pub fn export(cfg: &RunConfig) -> Result<ExportSummary> {
    let mut csv = format!("# {EXPORT_FORMAT}\n{}\n", COLUMNS.join(","));
    let mut missing = String::from("# radmorse-missing v1\n");
    let mut sum = ExportSummary { rows: 0, missing: 0 };
    for (cell, rec) in load_records(cfg) {
        let parsed = rec.as_ref().map(SweepRecord::from_record);
        match parsed {
            Some(Ok(r)) if r.status == "ok" && r.m_rad != "-" => {
                csv.push_str(&row(&r));
                csv.push('\n');
                sum.rows += 1;
            }
            other => {
                let why = match other {
                    None => "no record".to_string(),
                    Some(Err(e)) => format!("unreadable record: {e}"),
                    Some(Ok(r)) if r.status == "ok" => "morse stage not run".to_string(),
                    Some(Ok(r)) => format!("{} {} {}", r.status, r.stage, r.reason),
                };
                missing.push_str(&format!("{} {}\n", cell.key(), why));
                sum.missing += 1;
            }
        }
    }
    write_file(&cfg.out.join("export.csv"), &csv)?;
    write_file(&cfg.out.join("missing.txt"), &missing)?;
    Ok(sum)
}
