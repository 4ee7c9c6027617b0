use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use radmorse::pipeline::Backend;
use radmorse_harness::config::{CachePolicy, RunConfig};
use radmorse_harness::record::Status;
use radmorse_harness::sweep::{run_sweep, Level};
use radmorse_harness::{export, verify};

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse("n = 2, 3\nalpha = 0, 2\np = 3\nm = 1, 2\n").unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn assert_same(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) {
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in a {
        assert!(v == &b[k], "{k} differs");
    }
}

fn manifest_digests(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = snapshot(dir)
        .into_iter()
        .filter(|(k, _)| k.starts_with("cells") && k.ends_with("manifest.txt"))
        .map(|(_, b)| String::from_utf8(b).unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut cfg = small(&a);
    cfg.workers = 2;
    run_sweep(&cfg, Level::Morse).unwrap();
    export::export(&cfg).unwrap();
    verify::verify(&cfg).unwrap();
    let mut cfg_b = small(&b);
    cfg_b.workers = 1;
    run_sweep(&cfg_b, Level::Morse).unwrap();
    export::export(&cfg_b).unwrap();
    verify::verify(&cfg_b).unwrap();
    assert_same(&snapshot(&a), &snapshot(&b));
}

#[test]
fn cache_hits_and_recompute_keep_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    run_sweep(&cfg, Level::Morse).unwrap();
    let first = snapshot(tmp.path());
    let digests = manifest_digests(tmp.path());

    run_sweep(&cfg, Level::Morse).unwrap();
    assert_same(&snapshot(tmp.path()), &first);

    cfg.cache = CachePolicy::Recompute;
    run_sweep(&cfg, Level::Morse).unwrap();
    assert_eq!(manifest_digests(tmp.path()), digests);
    assert_same(&snapshot(tmp.path()), &first);

    // a tolerance change invalidates the spectrum digest only
    cfg.cache = CachePolicy::Reuse;
    cfg.options.spectrum.eig_tol *= 0.5;
    run_sweep(&cfg, Level::Morse).unwrap();
    let changed = manifest_digests(tmp.path());
    assert_ne!(changed, digests);
    let profile_line = |s: &str| s.lines().nth(1).unwrap().split(' ').find(|f| f.starts_with("profile_digest")).unwrap().to_string();
    for (x, y) in changed.iter().zip(&digests) {
        assert_eq!(profile_line(x), profile_line(y));
    }
}

#[test]
fn corrupted_spectrum_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    run_sweep(&cfg, Level::Morse).unwrap();
    assert!(verify::verify(&cfg).unwrap().passed());

    let path = tmp.path().join("cells/N3_a0_p3_m2/spectrum.txt");
    let text = fs::read_to_string(&path).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(' ').collect();
            if cols.first() == Some(&"singular") && cols.get(1) == Some(&"2") {
                cols[2] = "1e-1";
            }
            cols.join(" ")
        })
        .collect();
    fs::write(&path, corrupted.join("\n") + "\n").unwrap();
    let sum = verify::verify(&cfg).unwrap();
    assert!(!sum.passed());
    assert!(sum.failed_verdicts.iter().any(|(k, _)| k == "N3_a0_p3_m2"));

    fs::write(&path, "garbage\n").unwrap();
    let sum = verify::verify(&cfg).unwrap();
    assert!(sum.integrity_failures.iter().any(|(k, _)| k == "N3_a0_p3_m2"));
}

#[test]
fn failing_cells_do_not_abort_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.n = vec![5];
    cfg.alpha = vec![0.0];
    cfg.p = vec![2.0, 3.0];
    cfg.m = vec![1];
    cfg.options.residual_tol = 1e-30;
    let recs = run_sweep(&cfg, Level::Morse).unwrap();
    assert_eq!(recs.len(), 2);
    match &recs[0].status {
        Status::Failed { stage, code, .. } => assert_eq!((stage.as_str(), code.as_str()), ("profile", "residual")),
        s => panic!("unexpected {s:?}"),
    }
    assert!(matches!(recs[1].status, Status::Skipped(_)), "p = 3 is supercritical at N = 5");
    let sum = export::export(&cfg).unwrap();
    assert_eq!((sum.rows, sum.missing), (0, 2));
    let missing = fs::read_to_string(tmp.path().join("missing.txt")).unwrap();
    assert!(missing.contains("N5_a0_p2_m1 failed profile"));
    assert!(missing.contains("N5_a0_p3_m1 skipped"));
}

#[test]
fn export_rows_match_completed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.options.backend = Backend::Shooting;
    let recs = run_sweep(&cfg, Level::Morse).unwrap();
    let ok = recs.iter().filter(|r| r.is_ok()).count();
    let sum = export::export(&cfg).unwrap();
    assert_eq!(sum.rows, ok);
    let csv = fs::read_to_string(tmp.path().join("export.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# radmorse-export v1"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let pos = |c: &str| header.iter().position(|h| *h == c).unwrap();
    assert_eq!(pos("morse_index") + 1, pos("general_lower_bound"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), ok);
    assert!(rows.iter().all(|r| r.len() == header.len() && r[pos("agreement")] == "-"));
    export::export(&cfg).unwrap();
    assert_eq!(fs::read_to_string(tmp.path().join("export.csv")).unwrap(), csv);
}

#[test]
fn spectrum_level_stops_before_morse() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.m = vec![2];
    cfg.alpha = vec![0.0];
    run_sweep(&cfg, Level::Spectrum).unwrap();
    let dir = tmp.path().join("cells/N2_a0_p3_m2");
    assert!(dir.join("spectrum.txt").exists());
    assert!(!dir.join("modes.txt").exists());
    let sum = export::export(&cfg).unwrap();
    assert_eq!(sum.rows, 0);
}

#[test]
fn cli_verify_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_radmorse");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.cfg");
    fs::write(&cfg, "m =\n").unwrap();
    let out = Command::new(exe)
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("empty"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cells=0"));

    let cfg = tmp.path().join("one.cfg");
    fs::write(&cfg, "n = 3\nalpha = 0\np = 3\nm = 2\n").unwrap();
    let dir = tmp.path().join("one");
    let run = |cmd: &str| {
        Command::new(exe)
            .args([cmd, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .args(["--backend", "shooting"])
            .output()
            .unwrap()
    };
    assert!(run("morse").status.success());
    assert!(run("verify").status.success());
    let spectrum = dir.join("cells/N3_a0_p3_m2/spectrum.txt");
    let text = fs::read_to_string(&spectrum).unwrap();
    fs::write(&spectrum, text.replace("\nsingular 1 -", "\nsingular 1 ")).unwrap();
    assert_eq!(run("verify").status.code(), Some(1));
}
