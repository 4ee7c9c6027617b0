//! Per-cell records: spectrum-stage diagnostics, the Morse summary derived
//! from a spectrum file, and the sweep record combining them.

use radmorse::io::{fmt_f64, fmt_list, parse_list, Record, SpectrumFile, SpectrumRow};
use radmorse::morse::{self, BoundVerdict};
use radmorse::pipeline::{Backend, CellAnalysis};
use radmorse::problem::ProblemSpec;

use crate::cell::Cell;

pub const DIAGNOSTICS_FORMAT: &str = "radmorse-diagnostics v1";
pub const CELL_RECORD_FORMAT: &str = "radmorse-cell v1";

fn opt_f64(x: Option<f64>) -> String {
    x.map_or("-".into(), fmt_f64)
}

fn parse_opt_f64(s: &str) -> Option<f64> {
    if s == "-" {
        None
    } else {
        s.parse().ok()
    }
}

fn parse_bool(r: &Record, key: &str) -> radmorse::Result<bool> {
    match r.require(key)? {
        "true" => Ok(true),
        "false" => Ok(false),
        v => Err(radmorse::Error::Parse(format!("bad bool {v:?} for {key}"))),
    }
}

fn parse_usize(r: &Record, key: &str) -> radmorse::Result<usize> {
    r.require(key)?
        .parse()
        .map_err(|_| radmorse::Error::Parse(format!("bad integer for {key}")))
}

/// Profile and eigenpair checks computed together with the spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub residual: f64,
    pub structure_ok: bool,
    pub energy_residual: Option<f64>,
    pub z_zeros: Option<usize>,
    pub z_ok: bool,
    pub nodal_ok: bool,
    pub max_rayleigh: f64,
    pub max_overlap: f64,
    pub max_wronskian: f64,
    pub pair_count: usize,
    pub refined: bool,
    pub h3: bool,
    pub max_df: f64,
}

impl Diagnostics {
    pub fn from_analysis(c: &CellAnalysis) -> Self {
        Self {
            residual: c.residual,
            structure_ok: c.structure.all_pass(),
            energy_residual: c.structure.energy_residual,
            z_zeros: c.z.as_ref().map(|z| z.zeros.len()),
            z_ok: c.z.as_ref().is_none_or(|z| z.z0_positive && z.alternation_ok && !z.ambiguous),
            nodal_ok: c.diagnostics.nodal_ok,
            max_rayleigh: c.diagnostics.max_rayleigh_defect,
            max_overlap: c.diagnostics.max_overlap,
            max_wronskian: c.diagnostics.max_wronskian,
            pair_count: c.diagnostics.pair_count,
            refined: c.refined,
            h3: c.h3,
            max_df: c.max_df,
        }
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.push_f64("residual", self.residual)
            .push("structure_ok", self.structure_ok)
            .push("energy_residual", opt_f64(self.energy_residual))
            .push("z_zeros", self.z_zeros.map_or("-".into(), |z| z.to_string()))
            .push("z_ok", self.z_ok)
            .push("nodal_ok", self.nodal_ok)
            .push_f64("max_rayleigh", self.max_rayleigh)
            .push_f64("max_overlap", self.max_overlap)
            .push_f64("max_wronskian", self.max_wronskian)
            .push("pair_count", self.pair_count)
            .push("refined", self.refined)
            .push("h3", self.h3)
            .push_f64("max_df", self.max_df);
        r
    }

    pub fn from_record(r: &Record) -> radmorse::Result<Self> {
        let z = r.require("z_zeros")?;
        Ok(Self {
            residual: r.f64("residual")?,
            structure_ok: parse_bool(r, "structure_ok")?,
            energy_residual: parse_opt_f64(r.require("energy_residual")?),
            z_zeros: if z == "-" {
                None
            } else {
                Some(z.parse().map_err(|_| radmorse::Error::Parse("bad z_zeros".into()))?)
            },
            z_ok: parse_bool(r, "z_ok")?,
            nodal_ok: parse_bool(r, "nodal_ok")?,
            max_rayleigh: r.f64("max_rayleigh")?,
            max_overlap: r.f64("max_overlap")?,
            max_wronskian: r.f64("max_wronskian")?,
            pair_count: parse_usize(r, "pair_count")?,
            refined: parse_bool(r, "refined")?,
            h3: parse_bool(r, "h3")?,
            max_df: r.f64("max_df")?,
        })
    }
}

pub const SHOOT_SINGULAR: &str = "singular";
pub const SHOOT_CLASSICAL: &str = "classical";
pub const MATRIX_SINGULAR: &str = "matrix-singular";
pub const MATRIX_CLASSICAL: &str = "matrix-classical";

/// Spectrum file for an analyzed cell.
pub fn spectrum_file(cell: &Cell, c: &CellAnalysis, backend: Backend, spectrum_rtol: f64, eig_tol: f64) -> SpectrumFile {
    let mut h = Record::new();
    h.push("n", cell.n)
        .push_f64("alpha", cell.alpha)
        .push_f64("p", cell.p)
        .push("m", cell.m)
        .push_f64("m_eff", c.transformed.m_eff)
        .push("backend", backend.as_str())
        .push_f64("rtol", spectrum_rtol)
        .push_f64("eig_tol", eig_tol)
        .push("classical_negative", c.spectrum.classical_negative)
        .push("exhaustive", c.spectrum.exhaustive);
    let mut rows = Vec::new();
    for (source, pairs) in [(SHOOT_SINGULAR, &c.spectrum.singular), (SHOOT_CLASSICAL, &c.spectrum.classical)] {
        for pair in pairs {
            rows.push(SpectrumRow {
                source: source.into(),
                index: pair.index,
                value: pair.value,
                nodal_count: Some(pair.nodal_count),
                rayleigh_defect: Some(pair.residual),
            });
        }
    }
    if let Some(ag) = &c.agreement {
        let counts = |o: &radmorse::oracle::OracleSpectrum| {
            o.negative_counts.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        h.push("resolutions", ag.singular.resolutions.map(|r| r.to_string()).join(","))
            .push("matrix_singular_counts", counts(&ag.singular))
            .push("matrix_classical_counts", counts(&ag.classical))
            .push_f64("x_left_singular", ag.singular.x_left)
            .push_f64("x_left_classical", ag.classical.x_left);
        for (source, o) in [(MATRIX_SINGULAR, &ag.singular), (MATRIX_CLASSICAL, &ag.classical)] {
            for (k, v) in o.values.iter().enumerate() {
                rows.push(SpectrumRow {
                    source: source.into(),
                    index: k + 1,
                    value: *v,
                    nodal_count: None,
                    rayleigh_defect: None,
                });
            }
        }
    }
    SpectrumFile { header: h, rows }
}

/// Morse data recomputed from a spectrum file.
#[derive(Debug, Clone, PartialEq)]
pub struct MorseSummary {
    pub nu_hat: Vec<f64>,
    pub j_values: Vec<f64>,
    pub m_rad: usize,
    pub morse_index: u64,
    pub mode_count: u64,
    pub general_bound: u64,
    pub refined_bound: u64,
    pub verdicts: Vec<BoundVerdict>,
    pub radial_degenerate: bool,
    pub nonradial: Vec<(usize, u32)>,
    pub near_tie: Vec<(usize, f64)>,
    /// `ν_{m+1}` from the classical list.
    pub nu_next: Option<f64>,
    /// Negative classical eigenvalues in the file and the Sturm count.
    pub classical_negative: usize,
    pub classical_negative_count: usize,
    /// Negative matrix-oracle counts `(singular, classical)` and whether
    /// they were stable across resolutions.
    pub matrix_counts: Option<(usize, usize)>,
    pub matrix_counts_stable: bool,
    /// Largest relative shooting/matrix gap over negative eigenvalues.
    pub agreement: Option<f64>,
    pub modes: Vec<morse::Mode>,
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(f64::MIN_POSITIVE))
        .fold(0.0f64, f64::max)
}

fn counts(h: &Record, key: &str) -> radmorse::Result<Option<Vec<usize>>> {
    match h.get(key) {
        None => Ok(None),
        Some(s) => s
            .split(',')
            .map(|x| x.parse().map_err(|_| radmorse::Error::Parse(format!("bad counts in {key}"))))
            .collect::<radmorse::Result<Vec<usize>>>()
            .map(Some),
    }
}

impl MorseSummary {
    pub fn from_spectrum(spec: &ProblemSpec, file: &SpectrumFile, h3: bool, deg_tol: f64) -> radmorse::Result<Self> {
        let tp = spec.transformed();
        let h = &file.header;
        let backend = Backend::parse(h.require("backend")?)
            .ok_or_else(|| radmorse::Error::Parse("bad backend".into()))?;
        let shoot_sing = file.values(SHOOT_SINGULAR);
        let shoot_cl = file.values(SHOOT_CLASSICAL);
        let mat_sing = file.values(MATRIX_SINGULAR);
        let mat_cl = file.values(MATRIX_CLASSICAL);
        let (nu_hat, classical) = match backend {
            Backend::Matrix => (mat_sing.clone(), mat_cl.clone()),
            _ => (shoot_sing.clone(), shoot_cl.clone()),
        };
        let exhaustive = h.require("exhaustive")? == "true";
        let report = morse::assemble(spec, &tp, &nu_hat, exhaustive)?;
        let deg = morse::degeneracy_scan(spec, &nu_hat, &classical, deg_tol)?;
        let verdicts = morse::verify_bounds(spec, &tp, &report, h3)?;
        let mc = counts(h, "matrix_classical_counts")?;
        let ms = counts(h, "matrix_singular_counts")?;
        let (matrix_counts, matrix_counts_stable) = match (&ms, &mc) {
            (Some(s), Some(c)) => (
                Some((*s.last().unwrap_or(&0), *c.last().unwrap_or(&0))),
                s.windows(2).all(|w| w[0] == w[1]) && c.windows(2).all(|w| w[0] == w[1]),
            ),
            _ => (None, true),
        };
        let neg_cl: Vec<f64> = shoot_cl.iter().copied().filter(|v| *v < 0.0).collect();
        let agreement = match backend {
            Backend::Both => Some(relative_gap(&shoot_sing, &mat_sing).max(relative_gap(&neg_cl, &mat_cl))),
            _ => None,
        };
        let nu_next = classical.get(spec.m as usize).copied();
        Ok(Self {
            j_values: report.j_values.clone(),
            m_rad: report.m_rad,
            morse_index: report.morse_index,
            mode_count: report.mode_count(),
            general_bound: morse::general_lower_bound(spec.n, spec.alpha, spec.m)?,
            refined_bound: morse::refined_lower_bound(spec.n, spec.alpha, spec.m)?,
            verdicts,
            radial_degenerate: deg.radial,
            nonradial: deg.nonradial.iter().map(|h| (h.k, h.j)).collect(),
            near_tie: report.near_tie.clone(),
            nu_next,
            classical_negative: classical.iter().filter(|v| **v < 0.0).count(),
            classical_negative_count: match backend {
                Backend::Matrix => mat_cl.len(),
                _ => parse_usize(h, "classical_negative")?,
            },
            matrix_counts,
            matrix_counts_stable,
            agreement,
            modes: report.modes,
            nu_hat,
        })
    }

    pub fn min_slack(&self) -> f64 {
        self.verdicts.iter().map(|v| v.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn failed_verdicts(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|v| !v.holds).map(|v| v.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Skipped(String),
    Failed { stage: String, code: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub cell: Cell,
    pub m_eff: f64,
    pub status: Status,
    /// Digest of the profile file bytes.
    pub profile_digest: Option<String>,
    pub diagnostics: Option<Diagnostics>,
    pub morse: Option<MorseSummary>,
    pub wall_time: Option<f64>,
}

impl SweepRecord {
    pub fn new(cell: Cell) -> Self {
        let m_eff = radmorse::problem::compute_m(cell.n, cell.alpha).unwrap_or(f64::NAN);
        Self {
            cell,
            m_eff,
            status: Status::Ok,
            profile_digest: None,
            diagnostics: None,
            morse: None,
            wall_time: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn to_record(&self) -> Record {
        let c = &self.cell;
        let mut r = Record::new();
        r.push("key", c.key())
            .push("n", c.n)
            .push_f64("alpha", c.alpha)
            .push_f64("p", c.p)
            .push("m", c.m)
            .push_f64("m_eff", self.m_eff);
        match &self.status {
            Status::Ok => {
                r.push("status", "ok");
            }
            Status::Skipped(reason) => {
                r.push("status", "skipped").push("reason", reason);
            }
            Status::Failed { stage, code, reason } => {
                r.push("status", "failed").push("stage", stage).push("code", code).push("reason", reason);
            }
        }
        if let Some(d) = &self.profile_digest {
            r.push("profile_digest", d);
        }
        if let Some(d) = &self.diagnostics {
            r.fields.extend(d.to_record().fields);
        }
        if let Some(s) = &self.morse {
            r.push("nu_hat", fmt_list(&s.nu_hat))
                .push("j", fmt_list(&s.j_values))
                .push("m_rad", s.m_rad)
                .push("morse_index", s.morse_index)
                .push("general_lower_bound", s.general_bound)
                .push("refined_lower_bound", s.refined_bound)
                .push("verdicts_passed", s.verdicts.iter().filter(|v| v.holds).count())
                .push("verdicts_failed", s.verdicts.iter().filter(|v| !v.holds).count())
                .push_f64("min_slack", s.min_slack())
                .push("radial_degenerate", s.radial_degenerate)
                .push(
                    "nonradial_hits",
                    if s.nonradial.is_empty() {
                        "-".to_string()
                    } else {
                        s.nonradial.iter().map(|(k, j)| format!("{k}:{j}")).collect::<Vec<_>>().join(",")
                    },
                )
                .push(
                    "near_tie",
                    if s.near_tie.is_empty() {
                        "-".to_string()
                    } else {
                        s.near_tie.iter().map(|(i, j)| format!("{i}:{}", fmt_f64(*j))).collect::<Vec<_>>().join(",")
                    },
                )
                .push("nu_next", opt_f64(s.nu_next))
                .push("agreement", opt_f64(s.agreement));
        }
        if let Some(t) = self.wall_time {
            r.push_f64("wall_time", t);
        }
        r
    }

    /// Fields needed by exports; diagnostics and Morse data are read back
    /// in summary form.
    pub fn from_record(r: &Record) -> radmorse::Result<ExportRow> {
        let status = r.require("status")?.to_string();
        let get = |k: &str| r.get(k).unwrap_or("-").to_string();
        Ok(ExportRow {
            key: r.require("key")?.to_string(),
            n: r.require("n")?.to_string(),
            alpha: r.require("alpha")?.to_string(),
            p: r.require("p")?.to_string(),
            m: r.require("m")?.to_string(),
            m_eff: r.require("m_eff")?.to_string(),
            status,
            stage: get("stage"),
            reason: get("reason"),
            nu_hat: parse_list(&get("nu_hat")).unwrap_or_default(),
            j: parse_list(&get("j")).unwrap_or_default(),
            m_rad: get("m_rad"),
            morse_index: get("morse_index"),
            general_lower_bound: get("general_lower_bound"),
            refined_lower_bound: get("refined_lower_bound"),
            verdicts_passed: get("verdicts_passed"),
            verdicts_failed: get("verdicts_failed"),
            min_slack: get("min_slack"),
            radial_degenerate: get("radial_degenerate"),
            nonradial_hits: get("nonradial_hits"),
            near_tie: get("near_tie"),
            agreement: get("agreement"),
            profile_digest: get("profile_digest"),
        })
    }
}

/// One consolidated export row, as read back from a cell record.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportRow {
    pub key: String,
    pub n: String,
    pub alpha: String,
    pub p: String,
    pub m: String,
    pub m_eff: String,
    pub status: String,
    pub stage: String,
    pub reason: String,
    pub nu_hat: Vec<f64>,
    pub j: Vec<f64>,
    pub m_rad: String,
    pub morse_index: String,
    pub general_lower_bound: String,
    pub refined_lower_bound: String,
    pub verdicts_passed: String,
    pub verdicts_failed: String,
    pub min_slack: String,
    pub radial_degenerate: String,
    pub nonradial_hits: String,
    pub near_tie: String,
    pub agreement: String,
    pub profile_digest: String,
}
