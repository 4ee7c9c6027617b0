//! End-to-end analysis of one cell: profile, spectra, oracle cross-check,
//! Morse report and bound verdicts.

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::morse::{self, BoundVerdict, MorseReport};
use crate::oracle::{oracle_negative, OracleSpectrum};
use crate::problem::{Nonlinearity, ProblemSpec, TransformedProblem};
use crate::profile::NodalProfile;
use crate::radial::{
    check_structure, solve_nehari, solve_power_nodal, z_function, NehariOptions, ShootOptions, StructureReport,
    ZReport,
};
use crate::spectrum::{
    classical_negative_count, classical_spectrum, max_overlap, singular_spectrum_negative, wronskian_residual,
    EigenKind, LinearizedPotential, SpectrumOptions, SpectrumResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Shooting,
    Matrix,
    Both,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Shooting => "shooting",
            Backend::Matrix => "matrix",
            Backend::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shooting" => Some(Backend::Shooting),
            "matrix" => Some(Backend::Matrix),
            "both" => Some(Backend::Both),
            _ => None,
        }
    }

    pub fn uses_matrix(&self) -> bool {
        !matches!(self, Backend::Shooting)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub shoot: ShootOptions,
    pub nehari: NehariOptions,
    pub spectrum: SpectrumOptions,
    pub backend: Backend,
    /// Coarsest matrix-oracle resolution; the oracle also runs at 2x and 4x.
    pub resolution: usize,
    /// Degeneracy tolerance in the `ν̂` scale.
    pub deg_tol: f64,
    pub tol_energy: f64,
    /// Profile residual above which a cell is rejected.
    pub residual_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            shoot: ShootOptions::default(),
            nehari: NehariOptions::default(),
            spectrum: SpectrumOptions::default(),
            backend: Backend::Both,
            resolution: 4096,
            deg_tol: morse::DEG_TOL,
            tol_energy: 1e-6,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Validate,
    Profile,
    Structure,
    Spectrum,
    Oracle,
    Morse,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Profile => "profile",
            Stage::Structure => "structure",
            Stage::Spectrum => "spectrum",
            Stage::Oracle => "oracle",
            Stage::Morse => "morse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Stage::Validate,
            Stage::Profile,
            Stage::Structure,
            Stage::Spectrum,
            Stage::Oracle,
            Stage::Morse,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    pub fn new(stage: Stage, error: Error) -> Self {
        Self { stage, error }
    }

    /// Short machine-readable code for the failure.
    pub fn code(&self) -> &'static str {
        match self.error {
            Error::Supercritical { .. } => "supercritical",
            Error::Domain(_) => "domain",
            Error::Residual { .. } => "residual",
            Error::Certification { .. } => "certification",
            Error::NotExhaustive => "not-exhaustive",
            Error::MassNotPositive { .. } => "mass-not-positive",
            Error::Bracket { .. } => "bracket",
            Error::Integration(_) => "integration",
            _ => "solver",
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}

/// Structural laws of the computed eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDiagnostics {
    pub nodal_ok: bool,
    pub max_rayleigh_defect: f64,
    pub max_overlap: f64,
    /// Over singular pairs only.
    pub max_wronskian: f64,
    pub pair_count: usize,
}

/// Shooting vs matrix-oracle comparison of the negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendAgreement {
    pub singular: OracleSpectrum,
    pub classical: OracleSpectrum,
    /// Largest relative gap over the negative eigenvalues of both kinds;
    /// `None` when only the matrix backend ran.
    pub max_relative_gap: Option<f64>,
    pub counts_match: bool,
}

#[derive(Debug, Clone)]
pub struct CellAnalysis {
    pub spec: ProblemSpec,
    pub transformed: TransformedProblem,
    pub profile: NodalProfile,
    pub residual: f64,
    pub structure: StructureReport,
    /// Available for power laws.
    pub z: Option<ZReport>,
    pub spectrum: SpectrumResult,
    pub agreement: Option<BackendAgreement>,
    pub report: MorseReport,
    pub verdicts: Vec<BoundVerdict>,
    pub diagnostics: EigenDiagnostics,
    pub h3: bool,
    /// `max |f'|` on the profile values.
    pub max_df: f64,
    /// Set when a degeneracy hit triggered a tighter recomputation.
    pub refined: bool,
}

impl CellAnalysis {
    pub fn nu_hat(&self) -> Vec<f64> {
        self.spectrum.singular_values()
    }

    /// Negative classical eigenvalues.
    pub fn negative_classical(&self) -> Vec<f64> {
        self.spectrum.classical_values().into_iter().filter(|v| *v < 0.0).collect()
    }

    pub fn verdicts_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }
}

/// Profile for the cell: shooting for power laws, partition descent otherwise.
pub fn solve_profile(spec: &ProblemSpec, opts: &AnalysisOptions) -> Result<NodalProfile> {
    let tp = spec.transformed();
    match spec.nonlinearity {
        Nonlinearity::PowerLaw { .. } => {
            let mut o = opts.shoot;
            o.residual_tol = opts.residual_tol;
            solve_power_nodal(spec, &tp, &o)
        }
        Nonlinearity::General(_) => solve_nehari(spec, &tp, spec.m, opts.nehari),
    }
}

/// Negative singular pairs plus the classical pairs up to one past
/// `max(#negative, m)`.
pub fn compute_spectrum(pot: &LinearizedPotential, m: u32, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let singular = singular_spectrum_negative(pot, opts)?;
    let ncl = classical_negative_count(pot, opts)?;
    let classical = classical_spectrum(pot, ncl.max(m as usize) + 1, opts)?;
    Ok(SpectrumResult {
        m_eff: pot.m_eff,
        classical,
        singular,
        classical_negative: ncl,
        exhaustive: true,
    })
}

fn diagnostics(pot: &LinearizedPotential, spec: &SpectrumResult, opts: &SpectrumOptions) -> Result<EigenDiagnostics> {
    let all = spec.classical.iter().chain(&spec.singular);
    let mut nodal_ok = true;
    let mut rayleigh = 0.0f64;
    let mut count = 0;
    for p in all {
        nodal_ok &= p.nodal_count + 1 == p.index;
        rayleigh = rayleigh.max(p.residual);
        count += 1;
    }
    let overlap = max_overlap(pot, &spec.classical, opts)?.max(max_overlap(pot, &spec.singular, opts)?);
    let mut wronskian = 0.0f64;
    for p in &spec.singular {
        let w = wronskian_residual(p, pot)
            .ok_or_else(|| Error::SolverFault("Wronskian check needs the profile".into()))?;
        wronskian = wronskian.max(w);
    }
    Ok(EigenDiagnostics {
        nodal_ok,
        max_rayleigh_defect: rayleigh,
        max_overlap: overlap,
        max_wronskian: wronskian,
        pair_count: count,
    })
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(f64::MIN_POSITIVE))
        .fold(0.0f64, f64::max)
}

fn agreement(
    pot: &LinearizedPotential,
    spectrum: Option<&SpectrumResult>,
    resolution: usize,
) -> Result<BackendAgreement> {
    let singular = oracle_negative(pot, EigenKind::Singular, resolution)?;
    let classical = oracle_negative(pot, EigenKind::Classical, resolution)?;
    let internal = singular.counts_consistent()
        && classical.counts_consistent()
        && singular.negative_count() == classical.negative_count();
    let (gap, counts_match) = match spectrum {
        Some(s) => {
            let neg_cl: Vec<f64> = s.classical_values().into_iter().filter(|v| *v < 0.0).collect();
            let sv = s.singular_values();
            let matched = internal && singular.negative_count() == sv.len() && classical.negative_count() == neg_cl.len();
            let g = relative_gap(&sv, &singular.values).max(relative_gap(&neg_cl, &classical.values));
            (Some(g), matched)
        }
        None => (None, internal),
    };
    Ok(BackendAgreement {
        singular,
        classical,
        max_relative_gap: gap,
        counts_match,
    })
}

/// Spectrum built from the matrix oracle alone (no eigenfunctions).
fn matrix_only_result(pot: &LinearizedPotential, ag: &BackendAgreement) -> SpectrumResult {
    SpectrumResult {
        m_eff: pot.m_eff,
        classical: Vec::new(),
        singular: Vec::new(),
        classical_negative: ag.classical.negative_count(),
        exhaustive: ag.singular.counts_consistent(),
    }
}

/// Full analysis starting from the cell parameters.
pub fn analyze(spec: &ProblemSpec, opts: &AnalysisOptions) -> std::result::Result<CellAnalysis, StageError> {
    spec.validate().at(Stage::Validate)?;
    let profile = solve_profile(spec, opts).at(Stage::Profile)?;
    analyze_profile(spec, profile, opts)
}

/// Analysis of an already computed profile.
pub fn analyze_profile(
    spec: &ProblemSpec,
    profile: NodalProfile,
    opts: &AnalysisOptions,
) -> std::result::Result<CellAnalysis, StageError> {
    let tp = spec.transformed();
    let residual = profile.residual_norm.unwrap_or(f64::INFINITY);
    if !(residual <= opts.residual_tol) {
        return Err(StageError::new(
            Stage::Profile,
            Error::Residual {
                residual,
                tolerance: opts.residual_tol,
            },
        ));
    }
    let structure = check_structure(&profile, spec, opts.tol_energy);
    let z = spec.nonlinearity.exponent().map(|p| z_function(&profile, p));
    let pot = LinearizedPotential::from_profile(&profile, spec);

    let mut sopts = opts.spectrum;
    let mut refined = false;
    let (mut spectrum, mut nu_hat, mut classical_values);
    let mut degeneracy;
    loop {
        spectrum = match opts.backend {
            Backend::Matrix => None,
            _ => Some(compute_spectrum(&pot, spec.m, &sopts).at(Stage::Spectrum)?),
        };
        (nu_hat, classical_values) = match &spectrum {
            Some(s) => (s.singular_values(), s.classical_values()),
            None => (Vec::new(), Vec::new()),
        };
        if spectrum.is_none() {
            degeneracy = morse::Degeneracy::default();
            break;
        }
        degeneracy = morse::degeneracy_scan(spec, &nu_hat, &classical_values, opts.deg_tol).at(Stage::Morse)?;
        if !degeneracy.any() || refined {
            break;
        }
        sopts = sopts.tightened(10.0);
        refined = true;
    }

    let agreement = if opts.backend.uses_matrix() {
        Some(agreement(&pot, spectrum.as_ref(), opts.resolution).at(Stage::Oracle)?)
    } else {
        None
    };
    let spectrum = match spectrum {
        Some(s) => s,
        None => {
            let ag = agreement.as_ref().expect("matrix backend ran");
            nu_hat = ag.singular.values.clone();
            classical_values = ag.classical.values.clone();
            degeneracy =
                morse::degeneracy_scan(spec, &nu_hat, &classical_values, opts.deg_tol).at(Stage::Morse)?;
            matrix_only_result(&pot, ag)
        }
    };
    let diagnostics = if spectrum.classical.is_empty() && spectrum.singular.is_empty() {
        EigenDiagnostics {
            nodal_ok: true,
            max_rayleigh_defect: 0.0,
            max_overlap: 0.0,
            max_wronskian: 0.0,
            pair_count: 0,
        }
    } else {
        diagnostics(&pot, &spectrum, &sopts).at(Stage::Spectrum)?
    };

    let mut report = morse::assemble(spec, &tp, &nu_hat, spectrum.exhaustive).at(Stage::Morse)?;
    report.degeneracy = degeneracy;
    let h3 = spec.nonlinearity.h3_on(&profile.v);
    let max_df = spec.nonlinearity.max_df_on(&profile.v);
    let verdicts = morse::verify_bounds(spec, &tp, &report, h3).at(Stage::Morse)?;
    Ok(CellAnalysis {
        spec: spec.clone(),
        transformed: tp,
        profile,
        residual,
        structure,
        z,
        spectrum,
        agreement,
        report,
        verdicts,
        diagnostics,
        h3,
        max_df,
        refined,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub alpha: f64,
    /// `(m_rad, m(u))`, or the failure for this row.
    pub outcome: std::result::Result<(usize, u64), String>,
    /// `(m-1) Σ_{j=0}^{[(2+α)/2]} N_j`.
    pub lower_bound: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTable {
    pub n: u32,
    pub p: f64,
    pub m: u32,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    /// `m(u)` dominates the lower bound on every completed row.
    pub fn dominated(&self) -> bool {
        self.rows.iter().all(|r| match r.outcome {
            Ok((_, idx)) => idx >= r.lower_bound,
            Err(_) => false,
        })
    }

    pub fn bounds_nondecreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound)
    }

    /// `m(u)` at the last α strictly above `m(u)` at the first.
    pub fn grows(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => match (&a.outcome, &b.outcome) {
                (Ok((_, x)), Ok((_, y))) => y > x,
                _ => false,
            },
            _ => false,
        }
    }

    /// The growth statement concerns sign-changing solutions only.
    pub fn applies(&self) -> bool {
        self.m >= 2
    }
}

/// Morse index and its lower bound along a list of `α` values.
pub fn alpha_growth(n: u32, p: f64, m: u32, alphas: &[f64], opts: &AnalysisOptions) -> Result<GrowthTable> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let spec = ProblemSpec::power(n, alpha, p, m)?;
        let lower_bound = morse::general_lower_bound(n, alpha, m)?;
        let outcome = analyze(&spec, opts)
            .map(|c| (c.report.m_rad, c.report.morse_index))
            .map_err(|e| e.to_string());
        rows.push(GrowthRow {
            alpha,
            outcome,
            lower_bound,
        });
    }
    Ok(GrowthTable { n, p, m, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_two_node_cell() {
        let spec = ProblemSpec::power(2, 0.0, 3.0, 2).unwrap();
        let c = analyze(&spec, &AnalysisOptions::default()).unwrap();
        assert_eq!(c.report.m_rad, 2);
        assert!(c.verdicts_hold());
        assert!(c.report.morse_index >= 4);
        let ag = c.agreement.unwrap();
        assert!(ag.counts_match);
        assert!(ag.max_relative_gap.unwrap() < 1e-6);
    }

    #[test]
    fn stage_codes() {
        let spec = ProblemSpec {
            n: 3,
            alpha: 0.0,
            nonlinearity: Nonlinearity::PowerLaw { p: 6.0 },
            m: 1,
        };
        let err = analyze(&spec, &AnalysisOptions::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Validate);
        assert_eq!(err.code(), "supercritical");
        assert_eq!(Stage::parse("oracle"), Some(Stage::Oracle));
    }
}
