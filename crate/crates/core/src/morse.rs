//! Morse index assembly from the negative singular spectrum, degeneracy
//! detection and verification of the eigenvalue and index bounds.
//!
//! Each negative `ν̂_i` produces the eigenvalues
//! `Λ̂ = ((2+α)/2)² ν̂_i + λ_j` of the full linearization; the negative ones
//! are exactly `j < J_i` with
//! `J_i = ((2+α)/2)(√(((M-2)/2)² - ν̂_i) - (M-2)/2)`.

use crate::error::{Error, Result};
use crate::problem::{spherical_mode, Nonlinearity, ProblemSpec, TransformedProblem};

pub const TIE_TOL: f64 = 1e-6;
pub const DEG_TOL: f64 = 1e-8;

/// A negative eigenvalue of the full linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// 1-based index of the radial (singular) eigenvalue.
    pub i: usize,
    pub j: u32,
    pub lambda_hat: f64,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonradialHit {
    pub k: usize,
    pub j: u32,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Degeneracy {
    pub radial: bool,
    pub nonradial: Vec<NonradialHit>,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.radial || !self.nonradial.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseReport {
    pub n: u32,
    pub alpha: f64,
    pub m_eff: f64,
    pub nu_hat: Vec<f64>,
    pub m_rad: usize,
    pub j_values: Vec<f64>,
    pub morse_index: u64,
    pub modes: Vec<Mode>,
    pub degeneracy: Degeneracy,
    /// `(i, J_i)` with `J_i` within [`TIE_TOL`] of an integer.
    pub near_tie: Vec<(usize, f64)>,
}

/// `(2+α)/2`.
pub fn scale_factor(alpha: f64) -> f64 {
    0.5 * (2.0 + alpha)
}

pub fn j_threshold(alpha: f64, m_eff: f64, nu_hat: f64) -> f64 {
    let k = 0.5 * (m_eff - 2.0);
    scale_factor(alpha) * ((k * k - nu_hat).sqrt() - k)
}

/// `⌈J - 1⌉`, the largest mode index counted for threshold `J`; negative
/// when nothing is counted.
pub fn top_mode(j: f64) -> i64 {
    (j - 1.0).ceil() as i64
}

/// `Σ_{j=lo}^{hi} N_j`, zero for an empty range.
pub fn multiplicity_sum(n: u32, lo: u32, hi: i64) -> Result<u64> {
    let mut acc = 0u64;
    if hi < lo as i64 {
        return Ok(0);
    }
    for j in lo..=hi as u32 {
        acc = acc
            .checked_add(spherical_mode(n, j)?.multiplicity)
            .ok_or(Error::Overflow("multiplicity sum"))?;
    }
    Ok(acc)
}

/// `Λ̂ = ((2+α)/2)² ν̂ + λ_j`.
pub fn lambda_hat(alpha: f64, nu_hat: f64, lambda_j: f64) -> f64 {
    let a = scale_factor(alpha);
    a * a * nu_hat + lambda_j
}

/// Assemble the Morse index from the negative singular eigenvalues, which
/// must be certified exhaustive.
pub fn assemble(spec: &ProblemSpec, tp: &TransformedProblem, nu_hat: &[f64], exhaustive: bool) -> Result<MorseReport> {
    if !exhaustive {
        return Err(Error::NotExhaustive);
    }
    let n = spec.n;
    let alpha = spec.alpha;
    let negative: Vec<f64> = nu_hat.iter().copied().filter(|v| *v < 0.0).collect();
    let mut j_values = Vec::with_capacity(negative.len());
    let mut morse_index = 0u64;
    let mut modes = Vec::new();
    let mut near_tie = Vec::new();
    for (idx, &nu) in negative.iter().enumerate() {
        let i = idx + 1;
        let jj = j_threshold(alpha, tp.m_eff, nu);
        j_values.push(jj);
        if (jj - jj.round()).abs() < TIE_TOL {
            near_tie.push((i, jj));
        }
        morse_index = morse_index
            .checked_add(multiplicity_sum(n, 0, top_mode(jj))?)
            .ok_or(Error::Overflow("Morse index"))?;
        let mut j = 0u32;
        loop {
            let sm = spherical_mode(n, j)?;
            let lh = lambda_hat(alpha, nu, sm.lambda_f64());
            if lh >= 0.0 {
                break;
            }
            modes.push(Mode {
                i,
                j,
                lambda_hat: lh,
                multiplicity: sm.multiplicity,
            });
            j += 1;
        }
    }
    Ok(MorseReport {
        n,
        alpha,
        m_eff: tp.m_eff,
        nu_hat: negative.clone(),
        m_rad: negative.len(),
        j_values,
        morse_index,
        modes,
        degeneracy: Degeneracy::default(),
        near_tie,
    })
}

impl MorseReport {
    /// Sum of mode multiplicities, which must equal `morse_index`.
    pub fn mode_count(&self) -> u64 {
        self.modes.iter().map(|m| m.multiplicity).sum()
    }

    /// The mode list is exactly the negative-`Λ̂` set: every included
    /// `(i, j)` is negative, and the first excluded `j` for each `i` is not.
    /// Checked by brute force up to `j_cap`.
    pub fn ceiling_consistent(&self, j_cap: u32) -> Result<bool> {
        for (idx, &nu) in self.nu_hat.iter().enumerate() {
            let i = idx + 1;
            let top = top_mode(self.j_values[idx]);
            for j in 0..=j_cap {
                let lh = lambda_hat(self.alpha, nu, spherical_mode(self.n, j)?.lambda_f64());
                let by_ceiling = (j as i64) <= top;
                let listed = self.modes.iter().any(|m| m.i == i && m.j == j);
                let tied = self.near_tie.iter().any(|(k, _)| *k == i);
                if !tied && ((lh < 0.0) != by_ceiling || listed != (lh < 0.0)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Degeneracy flags. `classical` holds computed `ν_k`; `nu_hat` holds
/// singular values, including any just above zero when available.
pub fn degeneracy_scan(spec: &ProblemSpec, nu_hat: &[f64], classical: &[f64], deg_tol: f64) -> Result<Degeneracy> {
    let n = spec.n;
    let c = {
        let a = scale_factor(spec.alpha);
        1.0 / (a * a)
    };
    let classical_hit = classical.iter().any(|v| v.abs() < deg_tol);
    let radial = if n == 2 {
        classical_hit
    } else {
        classical_hit && nu_hat.iter().any(|v| v.abs() < deg_tol)
    };
    let mut nonradial = Vec::new();
    for (idx, &nu) in nu_hat.iter().enumerate() {
        if nu >= 0.0 {
            continue;
        }
        let mut j = 1u32;
        loop {
            let lam = spherical_mode(n, j)?.lambda_f64();
            let d = nu + c * lam;
            if d.abs() < deg_tol {
                nonradial.push(NonradialHit { k: idx + 1, j, defect: d });
            }
            if d > deg_tol {
                break;
            }
            j += 1;
        }
    }
    Ok(Degeneracy { radial, nonradial })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundVerdict {
    pub name: String,
    pub holds: bool,
    /// Signed margin; positive (or zero for non-strict bounds) when the
    /// bound holds.
    pub slack: f64,
    pub inputs: String,
}

fn strict(name: &str, slack: f64, inputs: String) -> BoundVerdict {
    BoundVerdict {
        name: name.into(),
        holds: slack > 0.0,
        slack,
        inputs,
    }
}

fn non_strict(name: &str, slack: f64, inputs: String) -> BoundVerdict {
    BoundVerdict {
        name: name.into(),
        holds: slack >= 0.0,
        slack,
        inputs,
    }
}

/// `(m-1) Σ_{j=0}^{[(2+α)/2]} N_j`.
pub fn general_lower_bound(n: u32, alpha: f64, m: u32) -> Result<u64> {
    let top = scale_factor(alpha).floor() as i64;
    Ok((m as u64 - 1) * multiplicity_sum(n, 0, top)?)
}

/// `m + (m-1) Σ_{j=1}^{[(2+α)/2]} N_j`, valid when `f'(s) > f(s)/s`.
pub fn refined_lower_bound(n: u32, alpha: f64, m: u32) -> Result<u64> {
    let top = scale_factor(alpha).floor() as i64;
    Ok(m as u64 + (m as u64 - 1) * multiplicity_sum(n, 1, top)?)
}

/// Bound verdicts for a profile with `m` nodal zones. `h3` declares
/// `f'(s) > f(s)/s`.
pub fn verify_bounds(spec: &ProblemSpec, tp: &TransformedProblem, report: &MorseReport, h3: bool) -> Result<Vec<BoundVerdict>> {
    let m = spec.m as usize;
    let mm1 = tp.m_eff - 1.0;
    let nu = &report.nu_hat;
    let mut out = Vec::new();
    for (idx, &v) in nu.iter().enumerate().take(m.saturating_sub(1)) {
        out.push(strict(
            "nu_hat_below_minus_m_minus_1",
            -(v + mm1),
            format!("i={} nu_hat={v:e} M={}", idx + 1, tp.m_eff),
        ));
    }
    let sign_condition = match &spec.nonlinearity {
        Nonlinearity::PowerLaw { .. } => true,
        Nonlinearity::General(_) => false,
    };
    if sign_condition {
        for (idx, &v) in nu.iter().enumerate().skip(m.saturating_sub(1)) {
            out.push(strict(
                "nu_hat_between_minus_m_minus_1_and_0",
                (v + mm1).min(-v),
                format!("i={} nu_hat={v:e} M={}", idx + 1, tp.m_eff),
            ));
        }
    }
    let m_rad = report.m_rad as f64;
    out.push(non_strict(
        "m_rad_at_least_m_minus_1",
        m_rad - (m as f64 - 1.0),
        format!("m_rad={} m={m}", report.m_rad),
    ));
    if h3 {
        out.push(non_strict(
            "m_rad_at_least_m",
            m_rad - m as f64,
            format!("m_rad={} m={m}", report.m_rad),
        ));
    }
    if matches!(spec.nonlinearity, Nonlinearity::PowerLaw { .. }) {
        out.push(non_strict(
            "m_rad_equals_m",
            0.0 - (m_rad - m as f64).abs(),
            format!("m_rad={} m={m}", report.m_rad),
        ));
    }
    let general = general_lower_bound(spec.n, spec.alpha, spec.m)?;
    out.push(non_strict(
        "morse_index_general_lower_bound",
        report.morse_index as f64 - general as f64,
        format!("morse_index={} bound={general}", report.morse_index),
    ));
    if h3 {
        let refined = refined_lower_bound(spec.n, spec.alpha, spec.m)?;
        out.push(non_strict(
            "morse_index_refined_lower_bound",
            report.morse_index as f64 - refined as f64,
            format!("morse_index={} bound={refined}", report.morse_index),
        ));
    }
    Ok(out)
}

/// Direct evaluation at `α = 0` with `Λ̂^rad_i = ν̂_i` and
/// `J_i = √(((N-2)/2)² - Λ̂^rad_i) - (N-2)/2`. Returns the largest `J`
/// discrepancy and the directly computed index.
pub fn alpha_zero_check(report: &MorseReport) -> Result<(f64, u64)> {
    let k = 0.5 * (report.n as f64 - 2.0);
    let mut worst = 0.0f64;
    let mut index = 0u64;
    for (idx, &nu) in report.nu_hat.iter().enumerate() {
        let j = (k * k - nu).sqrt() - k;
        worst = worst.max((j - report.j_values[idx]).abs());
        index += multiplicity_sum(report.n, 0, top_mode(j))?;
    }
    Ok((worst, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: u32, alpha: f64, m: u32) -> ProblemSpec {
        ProblemSpec::power(n, alpha, 2.0, m).unwrap()
    }

    #[test]
    fn empty_spectrum() {
        let s = spec(3, 1.0, 1);
        let r = assemble(&s, &s.transformed(), &[], true).unwrap();
        assert_eq!(r.m_rad, 0);
        assert_eq!(r.morse_index, 0);
        assert!(r.modes.is_empty());
    }

    #[test]
    fn not_exhaustive_is_an_error() {
        let s = spec(3, 1.0, 1);
        assert_eq!(assemble(&s, &s.transformed(), &[-1.0], false), Err(Error::NotExhaustive));
    }

    #[test]
    fn threshold_at_minus_m_minus_1() {
        for (n, alpha) in [(3, 0.0), (4, 2.0), (5, 3.5), (2, 6.0)] {
            let s = spec(n, alpha, 1);
            let tp = s.transformed();
            let j = j_threshold(alpha, tp.m_eff, -(tp.m_eff - 1.0));
            assert!((j - scale_factor(alpha)).abs() < 1e-13, "{n} {alpha} {j}");
        }
    }

    #[test]
    fn modes_match_ceiling_count() {
        let s = spec(3, 2.0, 2);
        let tp = s.transformed();
        let r = assemble(&s, &tp, &[-20.3, -1.1], true).unwrap();
        assert_eq!(r.mode_count(), r.morse_index);
        assert!(r.ceiling_consistent(40).unwrap());
    }

    #[test]
    fn injected_nonradial_hit() {
        for (n, alpha) in [(3, 0.0), (4, 2.0), (2, 6.0)] {
            let s = spec(n, alpha, 2);
            let a = scale_factor(alpha);
            let nu = -(n as f64 - 1.0) / (a * a);
            let d = degeneracy_scan(&s, &[nu - 5.3, nu], &[-3.0, 1.0], DEG_TOL).unwrap();
            assert!(!d.radial);
            assert_eq!(d.nonradial.len(), 1);
            assert_eq!((d.nonradial[0].k, d.nonradial[0].j), (2, 1));
        }
    }

    #[test]
    fn radial_flag_in_the_plane_uses_classical_only() {
        let s = spec(2, 1.0, 1);
        assert!(degeneracy_scan(&s, &[-1.0], &[-4.0, 1e-10], DEG_TOL).unwrap().radial);
        let s3 = spec(3, 1.0, 1);
        assert!(!degeneracy_scan(&s3, &[-1.0], &[-4.0, 1e-10], DEG_TOL).unwrap().radial);
        assert!(degeneracy_scan(&s3, &[-1.0, 1e-12], &[-4.0, 1e-10], DEG_TOL).unwrap().radial);
    }

    #[test]
    fn lower_bounds_quoted_values() {
        assert_eq!(refined_lower_bound(2, 0.0, 2).unwrap(), 4);
        assert_eq!(refined_lower_bound(3, 0.0, 3).unwrap(), 9);
        assert_eq!(refined_lower_bound(2, 6.0, 2).unwrap(), 10);
        let growth: Vec<u64> = [0.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&a| general_lower_bound(2, a, 2).unwrap())
            .collect();
        assert_eq!(growth, vec![3, 5, 7, 11, 19]);
    }
}
