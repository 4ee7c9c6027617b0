//! Independent matrix discretization of the classical and singular
//! eigenproblems, used to cross-check the shooting solver.
//!
//! Piecewise-linear elements on a uniform grid in `x = ln t` over
//! `[x_L, 0]`. In these variables the weak forms read
//!
//! `∫ e^{(M-2)x} ψ_x φ_x - ∫ e^{Mx} V ψ φ = μ ∫ e^{cx} ψ φ`
//!
//! with `c = M` (classical) or `c = M - 2` (singular). Stiffness and lumped
//! mass are integrated exactly, the potential term by Gauss quadrature split
//! at the zeros of the profile (where `p|v|^{p-1}` may have a kink). The
//! classical problem keeps the natural condition at `x_L`; the singular one
//! imposes `ψ(x_L) = 0`, which is harmless once `x_L` is far enough below the
//! region where `ψ ~ t^{γ₊}` starts to decay. Eigenvalues of the symmetric
//! tridiagonal `B^{-1/2} A B^{-1/2}` come from Sturm-sequence bisection.

use crate::error::{Error, Result};
use crate::spectrum::{frobenius_exponent, EigenKind, LinearizedPotential};

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
];

/// Symmetric tridiagonal matrix: diagonal `d`, off-diagonal `e`
/// (`e[i]` couples `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `mu` (Sturm count of the
    /// `LDLᵀ` pivots of `T - μ`).
    pub fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.d.len() {
            let off = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] / q };
            q = self.d[i] - mu - off;
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + mu.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `∫_0^1 e^{s u} (1-u) du` and `∫_0^1 e^{s u} u du`.
fn exp_hat(s: f64) -> (f64, f64) {
    if s.abs() < 1e-3 {
        let s2 = s * s;
        (
            0.5 + s / 6.0 + s2 / 24.0 + s2 * s / 120.0,
            0.5 + s / 3.0 + s2 / 8.0 + s2 * s / 30.0,
        )
    } else {
        let em1 = s.exp_m1();
        ((em1 - s) / (s * s), (em1 * s - em1 + s) / (s * s))
    }
}

/// `∫_0^1 e^{s u} du`.
fn exp_mean(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        s.exp_m1() / s
    }
}

/// Grid and assembled problem for one resolution.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub kind: EigenKind,
    pub x_left: f64,
    pub elements: usize,
    /// Nodes carrying unknowns.
    pub x: Vec<f64>,
    pub matrix: Tridiagonal,
}

/// Default left end `x_L = ln t_L`.
pub fn default_left(pot: &LinearizedPotential, kind: EigenKind) -> Result<f64> {
    // ln of the length scale set by the potential
    let x_scale = -0.5 * (1.0 + pot.max()).ln();
    match kind {
        EigenKind::Classical => Ok((1e-8f64).ln().min(x_scale + (1e-6f64).ln())),
        EigenKind::Singular => {
            // decay rate of ψ ~ t^{γ₊} for the least negative eigenvalue,
            // from a coarse pass
            let coarse = assemble(pot, kind, 1024, x_scale - 40.0)?;
            let neg = coarse.matrix.count_below(0.0);
            let top = if neg > 0 { coarse.matrix.eigenvalue(neg - 1).min(-1e-3) } else { -1e-3 };
            let gamma = frobenius_exponent(pot.m_eff, top);
            Ok((-20.0f64).min(x_scale - 16.0 / gamma.max(0.05)))
        }
    }
}

/// Assemble `B^{-1/2} A B^{-1/2}` with `elements` elements on `[x_left, 0]`.
pub fn assemble(pot: &LinearizedPotential, kind: EigenKind, elements: usize, x_left: f64) -> Result<Discretization> {
    if elements < 8 || !(x_left < 0.0) {
        return Err(Error::InvalidGrid(format!("{elements} elements on [{x_left}, 0]")));
    }
    let m = pot.m_eff;
    let cm = kind.weight_exponent(m);
    let ck = m - 2.0;
    let h = -x_left / elements as f64;
    let xs: Vec<f64> = (0..=elements).map(|i| x_left + i as f64 * h).collect();
    let zeros: Vec<f64> = pot
        .profile()
        .map(|p| p.zeros.iter().filter(|&&z| z > 0.0 && z < 1.0).map(|z| z.ln()).collect())
        .unwrap_or_default();

    let nn = elements + 1;
    let mut a_d = vec![0.0; nn];
    let mut a_e = vec![0.0; elements];
    let mut b = vec![0.0; nn];
    let mut zi = 0usize;
    for el in 0..elements {
        let (xa, xb) = (xs[el], xs[el + 1]);
        // Entries are kept relative to the nodal weight e^{cm x_i}, so that
        // nothing underflows far out in the left tail. Contributions to the
        // right node pick up e^{-cm h}.
        let right = (-cm * h).exp();
        // stiffness: ∫ e^{ck x} / h² over the element
        let k = ((ck - cm) * xa).exp() * h * exp_mean(ck * h) / (h * h);
        a_d[el] += k;
        a_d[el + 1] += k * right;
        a_e[el] -= k;
        // lumped mass
        let (g0, g1) = exp_hat(cm * h);
        b[el] += h * g0;
        b[el + 1] += h * g1 * right;
        // potential, split at interior kinks
        let mut cuts = vec![xa];
        while zi < zeros.len() && zeros[zi] <= xa {
            zi += 1;
        }
        let mut zj = zi;
        while zj < zeros.len() && zeros[zj] < xb {
            cuts.push(zeros[zj]);
            zj += 1;
        }
        cuts.push(xb);
        let (mut p00, mut p01, mut p11) = (0.0, 0.0, 0.0);
        for c in cuts.windows(2) {
            let (lo, hi) = (c[0], c[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (node, weight) in GAUSS4 {
                let x = mid + half * node;
                let u = (x - xa) / h;
                let f = weight * half * (m * x - cm * xa).exp() * pot.eval(x.exp());
                p00 += f * (1.0 - u) * (1.0 - u);
                p01 += f * (1.0 - u) * u;
                p11 += f * u * u;
            }
        }
        a_d[el] -= p00;
        a_d[el + 1] -= p11 * right;
        a_e[el] -= p01;
    }

    // unknowns: drop x = 0 (Dirichlet); singular also drops x_L
    let first = match kind {
        EigenKind::Classical => 0,
        EigenKind::Singular => 1,
    };
    let last = elements; // exclusive
    for (i, &bi) in b.iter().enumerate().take(last).skip(first) {
        if !(bi > 0.0) || !bi.is_finite() {
            // where the weight t^c is still comfortably representable
            let suggested = ((1e-280f64).ln() / cm.max(1e-3)).exp().max(xs[i].exp());
            return Err(Error::MassNotPositive { node: i, suggested_t_start: suggested });
        }
    }
    let d: Vec<f64> = (first..last).map(|i| a_d[i] / b[i]).collect();
    let half_step = (-0.5 * cm * h).exp();
    let e: Vec<f64> = (first..last - 1)
        .map(|i| a_e[i] * half_step / (b[i].sqrt() * b[i + 1].sqrt()))
        .collect();
    Ok(Discretization {
        kind,
        x_left,
        elements,
        x: xs[first..last].to_vec(),
        matrix: Tridiagonal { d, e },
    })
}

/// Lowest `k_max` eigenvalues at one resolution (`resolution` elements)
/// with the default left end.
pub fn matrix_oracle(pot: &LinearizedPotential, kind: EigenKind, k_max: usize, resolution: usize) -> Result<Vec<f64>> {
    if resolution < 256 {
        return Err(Error::InvalidGrid(format!("resolution {resolution} < 256")));
    }
    let xl = default_left(pot, kind)?;
    let disc = assemble(pot, kind, resolution, xl)?;
    Ok((0..k_max).map(|k| disc.matrix.eigenvalue(k)).collect())
}

/// Negative eigenvalues at three resolutions and their Richardson
/// extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    pub kind: EigenKind,
    pub x_left: f64,
    pub resolutions: [usize; 3],
    pub raw: [Vec<f64>; 3],
    /// Negative count at each resolution.
    pub negative_counts: [usize; 3],
    pub values: Vec<f64>,
}

impl OracleSpectrum {
    pub fn negative_count(&self) -> usize {
        self.negative_counts[2]
    }

    pub fn counts_consistent(&self) -> bool {
        self.negative_counts.iter().all(|&c| c == self.negative_counts[0])
    }
}

/// All negative eigenvalues at `n`, `2n`, `4n` elements, extrapolated
/// assuming an error expansion in `h²`, `h⁴`.
pub fn oracle_negative(pot: &LinearizedPotential, kind: EigenKind, n: usize) -> Result<OracleSpectrum> {
    if n < 256 {
        return Err(Error::InvalidGrid(format!("resolution {n} < 256")));
    }
    let xl = default_left(pot, kind)?;
    let res = [n, 2 * n, 4 * n];
    let mut raw: [Vec<f64>; 3] = Default::default();
    let mut counts = [0usize; 3];
    for (l, &r) in res.iter().enumerate() {
        let disc = assemble(pot, kind, r, xl)?;
        counts[l] = disc.matrix.count_below(0.0);
        raw[l] = (0..counts[l]).map(|k| disc.matrix.eigenvalue(k)).collect();
    }
    let common = counts.iter().copied().min().unwrap_or(0);
    let values = (0..common)
        .map(|k| {
            let (a, b, c) = (raw[0][k], raw[1][k], raw[2][k]);
            let r1 = (4.0 * b - a) / 3.0;
            let r2 = (4.0 * c - b) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
        .collect();
    Ok(OracleSpectrum {
        kind,
        x_left: xl,
        resolutions: res,
        raw,
        negative_counts: counts,
        values,
    })
}
