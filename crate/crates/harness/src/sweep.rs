//! Per-cell pipeline with an on-disk cache, run over the sweep on a thread
//! pool. Every cell lives in `out/cells/<key>/`; sweep-wide files sit in
//! `out/`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use radmorse::io::{fmt_f64, read_profile, write_profile, Columnar, Record, SpectrumFile};
use radmorse::pipeline::{analyze_profile, solve_profile, Stage, StageError};
use radmorse::Error;

use crate::cell::{cells, Cell, VERSION_TAG};
use crate::config::{CachePolicy, RunConfig};
use crate::error::{HarnessError, Result};
use crate::record::{spectrum_file, Diagnostics, MorseSummary, Status, SweepRecord, CELL_RECORD_FORMAT, DIAGNOSTICS_FORMAT};

pub const MANIFEST_FORMAT: &str = "radmorse-manifest v1";
pub const MODES_FORMAT: &str = "radmorse-modes v1";
pub const VERDICTS_FORMAT: &str = "radmorse-verdicts v1";
pub const RECORDS_FORMAT: &str = "radmorse-records v1";

/// How far the per-cell pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Profile,
    Spectrum,
    Morse,
}

impl Level {
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Profile => "profile",
            Level::Spectrum => "spectrum",
            Level::Morse => "morse",
        }
    }
}

pub fn cell_dir(out: &Path, cell: &Cell) -> PathBuf {
    out.join("cells").join(cell.key())
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// A single-record file: a `# format` line followed by one `key=value` line.
pub fn render_single(format: &str, r: &Record) -> String {
    format!("# {format}\n{}\n", r.to_line())
}

pub fn parse_single(text: &str, format: &str) -> radmorse::Result<Record> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.strip_prefix("# ") == Some(format) => {}
        _ => return Err(Error::Parse(format!("expected {format} header"))),
    }
    Record::parse_line(lines.next().ok_or_else(|| Error::Parse("missing record line".into()))?)
}

struct Manifest {
    profile: Option<String>,
    spectrum: Option<String>,
}

impl Manifest {
    fn load(dir: &Path) -> Self {
        let rec = fs::read_to_string(dir.join("manifest.txt"))
            .ok()
            .and_then(|t| parse_single(&t, MANIFEST_FORMAT).ok());
        let get = |k: &str| rec.as_ref().and_then(|r| r.get(k)).filter(|v| *v != "-").map(String::from);
        Self {
            profile: get("profile_digest"),
            spectrum: get("spectrum_digest"),
        }
    }

    fn save(&self, dir: &Path, cell: &Cell) -> Result<()> {
        let mut r = Record::new();
        r.push("key", cell.key())
            .push("version", VERSION_TAG)
            .push("profile_digest", self.profile.as_deref().unwrap_or("-"))
            .push("spectrum_digest", self.spectrum.as_deref().unwrap_or("-"));
        write_file(&dir.join("manifest.txt"), &render_single(MANIFEST_FORMAT, &r))
    }
}

fn stage_failure(e: &StageError) -> Status {
    Status::Failed {
        stage: e.stage.as_str().into(),
        code: e.code().into(),
        reason: e.error.to_string(),
    }
}

fn modes_file(summary: &MorseSummary) -> String {
    let mut h = Record::new();
    h.push("m_rad", summary.m_rad)
        .push("morse_index", summary.morse_index)
        .push("mode_count", summary.mode_count);
    Columnar {
        format: MODES_FORMAT.into(),
        header: h,
        columns: ["i", "j", "lambda_hat", "multiplicity"].iter().map(|s| s.to_string()).collect(),
        rows: summary
            .modes
            .iter()
            .map(|m| vec![m.i.to_string(), m.j.to_string(), fmt_f64(m.lambda_hat), m.multiplicity.to_string()])
            .collect(),
    }
    .render()
}

fn verdicts_file(summary: &MorseSummary) -> String {
    let mut s = format!("# {VERDICTS_FORMAT}\n");
    for v in &summary.verdicts {
        let mut r = Record::new();
        r.push("name", &v.name)
            .push("holds", v.holds)
            .push_f64("slack", v.slack)
            .push("inputs", &v.inputs);
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

/// Morse data from the spectrum file as stored on disk.
pub fn morse_from_disk(out: &Path, cell: &Cell, cfg: &RunConfig) -> Result<(Diagnostics, MorseSummary)> {
    let dir = cell_dir(out, cell);
    let diag = Diagnostics::from_record(&parse_single(&read_file(&dir.join("diagnostics.txt"))?, DIAGNOSTICS_FORMAT)?)?;
    let file = SpectrumFile::parse(&read_file(&dir.join("spectrum.txt"))?)?;
    let spec = cell.spec()?;
    let summary = MorseSummary::from_spectrum(&spec, &file, diag.h3, cfg.options.deg_tol)?;
    Ok((diag, summary))
}

fn process(cell: &Cell, cfg: &RunConfig, level: Level, rec: &mut SweepRecord) -> Result<()> {
    let spec = match cell.spec() {
        Ok(s) => s,
        Err(e) => {
            rec.status = Status::Skipped(e.to_string());
            return Ok(());
        }
    };
    if let Err(e) = spec.validate() {
        rec.status = Status::Skipped(e.to_string());
        return Ok(());
    }
    let opts = &cfg.options;
    let dir = cell_dir(&cfg.out, cell);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let reuse = cfg.cache == CachePolicy::Reuse;
    let mut manifest = Manifest::load(&dir);
    let pd = cell.profile_digest(opts);
    let sd = cell.spectrum_digest(opts);
    let profile_path = dir.join("profile.txt");

    let cached_profile = if reuse && manifest.profile.as_deref() == Some(pd.as_str()) {
        fs::read_to_string(&profile_path).ok().filter(|t| read_profile(t).is_ok())
    } else {
        None
    };
    let profile_text = match cached_profile {
        Some(t) => t,
        None => {
            manifest.profile = None;
            manifest.spectrum = None;
            let prof = match solve_profile(&spec, opts) {
                Ok(p) => p,
                Err(e) => {
                    rec.status = stage_failure(&StageError::new(Stage::Profile, e));
                    return manifest.save(&dir, cell);
                }
            };
            let text = write_profile(&prof);
            write_file(&profile_path, &text)?;
            manifest.profile = Some(pd.clone());
            manifest.save(&dir, cell)?;
            text
        }
    };
    rec.profile_digest = Some(crate::cell::sha256(&profile_text));
    if level == Level::Profile {
        return Ok(());
    }

    let spectrum_path = dir.join("spectrum.txt");
    let diag_path = dir.join("diagnostics.txt");
    let spectrum_cached = reuse
        && manifest.spectrum.as_deref() == Some(sd.as_str())
        && spectrum_path.exists()
        && diag_path.exists();
    if !spectrum_cached {
        manifest.spectrum = None;
        manifest.save(&dir, cell)?;
        let profile = read_profile(&profile_text)?;
        let analysis = match analyze_profile(&spec, profile, opts) {
            Ok(a) => a,
            Err(e) => {
                rec.status = stage_failure(&e);
                return Ok(());
            }
        };
        let diag = Diagnostics::from_analysis(&analysis);
        let file = spectrum_file(cell, &analysis, opts.backend, opts.spectrum.rtol, opts.spectrum.eig_tol);
        write_file(&spectrum_path, &file.render())?;
        write_file(&diag_path, &render_single(DIAGNOSTICS_FORMAT, &diag.to_record()))?;
        manifest.spectrum = Some(sd);
        manifest.save(&dir, cell)?;
    }

    let (diag, summary) = match morse_from_disk(&cfg.out, cell, cfg) {
        Ok(x) => x,
        Err(e) => {
            rec.status = Status::Failed {
                stage: Stage::Morse.as_str().into(),
                code: "io".into(),
                reason: e.to_string(),
            };
            return Ok(());
        }
    };
    rec.diagnostics = Some(diag);
    if level == Level::Morse {
        write_file(&dir.join("modes.txt"), &modes_file(&summary))?;
        write_file(&dir.join("verdicts.txt"), &verdicts_file(&summary))?;
        rec.morse = Some(summary);
    }
    Ok(())
}

/// Runs one cell. Failures, including panics, end up in the record.
pub fn run_cell(cell: &Cell, cfg: &RunConfig, level: Level) -> SweepRecord {
    let start = Instant::now();
    let mut rec = SweepRecord::new(*cell);
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut r = rec.clone();
        let res = process(cell, cfg, level, &mut r);
        (r, res)
    }));
    match outcome {
        Ok((r, Ok(()))) => rec = r,
        Ok((r, Err(e))) => {
            rec = r;
            rec.status = Status::Failed {
                stage: "io".into(),
                code: "io".into(),
                reason: e.to_string(),
            };
        }
        Err(payload) => {
            let reason = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            rec.status = Status::Failed {
                stage: "panic".into(),
                code: "panic".into(),
                reason,
            };
        }
    }
    if cfg.timings {
        rec.wall_time = Some(start.elapsed().as_secs_f64());
    }
    let dir = cell_dir(&cfg.out, cell);
    let _ = write_file(&dir.join("record.txt"), &render_single(CELL_RECORD_FORMAT, &rec.to_record()));
    rec
}

fn sweep_manifest(cfg: &RunConfig, level: Level, count: usize) -> String {
    let o = &cfg.options;
    let join = |xs: Vec<String>| if xs.is_empty() { "-".to_string() } else { xs.join(",") };
    let mut r = Record::new();
    r.push("version", VERSION_TAG)
        .push("level", level.as_str())
        .push("cells", count)
        .push("n", join(cfg.n.iter().map(|x| x.to_string()).collect()))
        .push("alpha", join(cfg.alpha.iter().map(|x| fmt_f64(*x)).collect()))
        .push("p", join(cfg.p.iter().map(|x| fmt_f64(*x)).collect()))
        .push("m", join(cfg.m.iter().map(|x| x.to_string()).collect()))
        .push("backend", o.backend.as_str())
        .push_f64("shoot_rtol", o.shoot.rtol)
        .push_f64("shoot_atol", o.shoot.atol)
        .push_f64("t_start", o.shoot.t_start)
        .push_f64("spectrum_rtol", o.spectrum.rtol)
        .push_f64("spectrum_atol", o.spectrum.atol)
        .push_f64("eig_tol", o.spectrum.eig_tol)
        .push_f64("rayleigh_tol", o.spectrum.residual_tol)
        .push_f64("residual_tol", o.residual_tol)
        .push_f64("tol_energy", o.tol_energy)
        .push_f64("deg_tol", o.deg_tol)
        .push("resolution", o.resolution);
    render_single(MANIFEST_FORMAT, &r)
}

/// Runs every cell of the sweep and writes the sorted record list.
pub fn run_sweep(cfg: &RunConfig, level: Level) -> Result<Vec<SweepRecord>> {
    use rayon::prelude::*;
    let list = cells(cfg);
    fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records: Vec<SweepRecord> = pool.install(|| list.par_iter().map(|c| run_cell(c, cfg, level)).collect());
    write_file(&cfg.out.join("manifest.txt"), &sweep_manifest(cfg, level, records.len()))?;
    let mut text = format!("# {RECORDS_FORMAT}\n");
    for r in &records {
        text.push_str(&r.to_record().to_line());
        text.push('\n');
    }
    write_file(&cfg.out.join("records.txt"), &text)?;
    Ok(records)
}

/// Reads the stored record of every configured cell; `None` where absent
/// or unreadable.
pub fn load_records(cfg: &RunConfig) -> Vec<(Cell, Option<Record>)> {
    cells(cfg)
        .into_iter()
        .map(|c| {
            let rec = fs::read_to_string(cell_dir(&cfg.out, &c).join("record.txt"))
                .ok()
                .and_then(|t| parse_single(&t, CELL_RECORD_FORMAT).ok());
            (c, rec)
        })
        .collect()
}
