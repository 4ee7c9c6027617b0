//! Zero-potential comparison against Bessel zeros and the empty singular
//! spectrum below zero.

use radmorse::bessel::zero_potential_eigenvalues;
use radmorse::io::{fmt_f64, Columnar, Record};
use radmorse::oracle::{matrix_oracle, oracle_negative};
use radmorse::spectrum::{classical_spectrum, singular_spectrum_negative, EigenKind, LinearizedPotential, SpectrumOptions};

use crate::error::Result;

pub const SELFTEST_FORMAT: &str = "radmorse-selftest v1";
pub const BESSEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BesselRow {
    pub m_eff: f64,
    pub k: usize,
    pub exact: f64,
    pub shooting: f64,
    /// Unextrapolated matrix value at the configured resolution, reported
    /// for comparison only.
    pub matrix: f64,
}

impl BesselRow {
    pub fn shooting_error(&self) -> f64 {
        (self.shooting - self.exact).abs() / self.exact
    }

    pub fn matrix_error(&self) -> f64 {
        (self.matrix - self.exact).abs() / self.exact
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub rows: Vec<BesselRow>,
    /// `(M, shooting negatives, matrix negatives)`.
    pub hardy: Vec<(f64, usize, usize)>,
}

impl SelfTest {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.shooting_error() <= BESSEL_TOL)
            && self.hardy.iter().all(|&(_, a, b)| a == 0 && b == 0)
    }

    pub fn render(&self) -> String {
        let mut h = Record::new();
        h.push_f64("bessel_tol", BESSEL_TOL)
            .push(
                "hardy",
                self.hardy
                    .iter()
                    .map(|(m, a, b)| format!("{}:{a}:{b}", fmt_f64(*m)))
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .push("passed", self.passed());
        Columnar {
            format: SELFTEST_FORMAT.into(),
            header: h,
            columns: ["m_eff", "k", "exact", "shooting", "matrix", "shooting_rel", "matrix_rel"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.m_eff),
                        r.k.to_string(),
                        fmt_f64(r.exact),
                        fmt_f64(r.shooting),
                        fmt_f64(r.matrix),
                        fmt_f64(r.shooting_error()),
                        fmt_f64(r.matrix_error()),
                    ]
                })
                .collect(),
        }
        .render()
    }
}

pub fn run(m_values: &[f64], count: usize, resolution: usize) -> Result<SelfTest> {
    let opts = SpectrumOptions::default();
    let mut rows = Vec::new();
    let mut hardy = Vec::new();
    for &m in m_values {
        let pot = LinearizedPotential::zero(m);
        let exact = zero_potential_eigenvalues(m, count);
        let shoot = classical_spectrum(&pot, count, &opts)?;
        let matrix = matrix_oracle(&pot, EigenKind::Classical, count, resolution)?;
        for (k, e) in exact.iter().enumerate() {
            rows.push(BesselRow {
                m_eff: m,
                k: k + 1,
                exact: *e,
                shooting: shoot[k].value,
                matrix: matrix[k],
            });
        }
        let sing = singular_spectrum_negative(&pot, &opts)?.len();
        let orc = oracle_negative(&pot, EigenKind::Singular, resolution)?.negative_count();
        hardy.push((m, sing, orc));
    }
    Ok(SelfTest { rows, hardy })
}
