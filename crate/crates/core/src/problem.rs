//! Problem definition, the radial change of variables and closed-form
//! constants (effective dimension, critical exponent, spherical harmonics).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::profile::{NodalProfile, Normalization, ProfileMeta};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonlinearity supplied through evaluators. `primitive` is optional; the
/// energy identity check is skipped without it.
#[derive(Clone)]
pub struct GeneralF {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub primitive: Option<ScalarFn>,
    pub odd: bool,
    pub label: String,
}

impl fmt::Debug for GeneralF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralF")
            .field("label", &self.label)
            .field("odd", &self.odd)
            .field("has_primitive", &self.primitive.is_some())
            .finish()
    }
}

impl GeneralF {
    /// `f(s) = |s|^{p-1} s` written as a general nonlinearity.
    pub fn power(p: f64) -> Self {
        Self {
            f: Arc::new(move |s: f64| s.abs().powf(p - 1.0) * s),
            df: Arc::new(move |s: f64| p * s.abs().powf(p - 1.0)),
            primitive: Some(Arc::new(move |s: f64| s.abs().powf(p + 1.0) / (p + 1.0))),
            odd: true,
            label: format!("power({p})"),
        }
    }

    pub fn zero() -> Self {
        Self {
            f: Arc::new(|_| 0.0),
            df: Arc::new(|_| 0.0),
            primitive: Some(Arc::new(|_| 0.0)),
            odd: true,
            label: "zero".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Nonlinearity {
    PowerLaw { p: f64 },
    General(GeneralF),
}

impl Nonlinearity {
    pub fn is_odd(&self) -> bool {
        match self {
            Nonlinearity::PowerLaw { .. } => true,
            Nonlinearity::General(g) => g.odd,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            Nonlinearity::PowerLaw { p } => Some(*p),
            Nonlinearity::General(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Nonlinearity::PowerLaw { p } => format!("power({p})"),
            Nonlinearity::General(g) => g.label.clone(),
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::PowerLaw { p } => p * s.abs().powf(p - 1.0),
            Nonlinearity::General(g) => (g.df)(s),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::PowerLaw { p } => s.abs().powf(p - 1.0) * s,
            Nonlinearity::General(g) => (g.f)(s),
        }
    }

    /// Whether `f'(s) > f(s)/s` holds at every nonzero sample. Power laws
    /// satisfy it identically; for general `f` only the samples are checked.
    pub fn h3_on(&self, values: &[f64]) -> bool {
        match self {
            Nonlinearity::PowerLaw { .. } => true,
            Nonlinearity::General(_) => values
                .iter()
                .filter(|s| **s != 0.0)
                .all(|&s| self.df(s) > self.f(s) / s),
        }
    }

    /// `max |f'|` over the samples; finite values are all that can be
    /// checked of the boundedness hypothesis on `f'`.
    pub fn max_df_on(&self, values: &[f64]) -> f64 {
        values.iter().fold(0.0f64, |m, &s| m.max(self.df(s).abs()))
    }
}

/// `-Δu = |x|^α f(u)` in the unit ball of `R^N`, seeking radial solutions
/// with `m` nodal zones.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub n: u32,
    pub alpha: f64,
    pub nonlinearity: Nonlinearity,
    pub m: u32,
}

impl ProblemSpec {
    pub fn new(n: u32, alpha: f64, nonlinearity: Nonlinearity, m: u32) -> Result<Self> {
        let spec = Self {
            n,
            alpha,
            nonlinearity,
            m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn power(n: u32, alpha: f64, p: f64, m: u32) -> Result<Self> {
        Self::new(n, alpha, Nonlinearity::PowerLaw { p }, m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("dimension N = {} < 2", self.n)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Domain(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if self.m < 1 {
            return Err(Error::Domain("m must be >= 1".into()));
        }
        if let Nonlinearity::PowerLaw { p } = self.nonlinearity {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::Domain(format!("exponent p = {p} must be > 1")));
            }
            let pc = critical_exponent(self.n, self.alpha)?;
            if p >= pc {
                return Err(Error::Supercritical {
                    p,
                    critical: pc,
                });
            }
        }
        Ok(())
    }

    pub fn transformed(&self) -> TransformedProblem {
        TransformedProblem::new(self)
    }
}

/// Constants of the reduced one-dimensional problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedProblem {
    /// Effective dimension `M = 2(N+α)/(2+α)`.
    pub m_eff: f64,
    /// `(2/(2+α))²`.
    pub coupling: f64,
    /// `(2+α)/2`.
    pub scale_exponent: f64,
    pub normalization: Normalization,
    pub n: u32,
    pub alpha: f64,
}

impl TransformedProblem {
    pub fn new(spec: &ProblemSpec) -> Self {
        let normalization = match spec.nonlinearity {
            Nonlinearity::PowerLaw { .. } => Normalization::PowerAbsorbed,
            Nonlinearity::General(_) => Normalization::GeneralF,
        };
        Self::with_normalization(spec.n, spec.alpha, normalization)
    }

    pub fn with_normalization(n: u32, alpha: f64, normalization: Normalization) -> Self {
        let a = (2.0 + alpha) / 2.0;
        Self {
            m_eff: effective_dimension(n, alpha),
            coupling: 1.0 / (a * a),
            scale_exponent: a,
            normalization,
            n,
            alpha,
        }
    }

    /// `((M-2)/2)²`, the weighted Hardy constant.
    pub fn hardy_constant(&self) -> f64 {
        let k = (self.m_eff - 2.0) / 2.0;
        k * k
    }
}

fn effective_dimension(n: u32, alpha: f64) -> f64 {
    let m = 2.0 * (n as f64 + alpha) / (2.0 + alpha);
    // 2 <= M <= N up to rounding
    m.clamp(2.0, n as f64)
}

pub fn compute_m(n: u32, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension N = {n} < 2")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be >= 0")));
    }
    Ok(effective_dimension(n, alpha))
}

/// `(N+2+2α)/(N-2)`, or `+∞` in the plane.
pub fn critical_exponent(n: u32, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension N = {n} < 2")));
    }
    if n == 2 {
        return Ok(f64::INFINITY);
    }
    Ok((n as f64 + 2.0 + 2.0 * alpha) / (n as f64 - 2.0))
}

/// Eigenvalue `λ_j = j(N-2+j)` of the Laplace-Beltrami operator on the
/// sphere and its multiplicity `N_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalMode {
    pub j: u32,
    pub lambda: u64,
    pub multiplicity: u64,
}

impl SphericalMode {
    pub fn lambda_f64(&self) -> f64 {
        self.lambda as f64
    }
}

pub fn spherical_mode(n: u32, j: u32) -> Result<SphericalMode> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension N = {n} < 2")));
    }
    let lambda = (j as u64)
        .checked_mul(n as u64 - 2 + j as u64)
        .ok_or(Error::Overflow("lambda_j"))?;
    Ok(SphericalMode {
        j,
        lambda,
        multiplicity: harmonic_multiplicity(n, j)?,
    })
}

/// `N_j = (N+2j-2)(N+j-3)! / ((N-2)! j!)`, exactly.
fn harmonic_multiplicity(n: u32, j: u32) -> Result<u64> {
    if j == 0 {
        return Ok(1);
    }
    if n == 2 {
        return Ok(2);
    }
    // (N+j-3)!/((N-2)!(j-1)!) = C(N+j-3, j-1), then N_j = (N+2j-2)/j * C.
    let c = binomial(n as u64 + j as u64 - 3, j as u64 - 1)?;
    let num = c
        .checked_mul(n as u128 + 2 * j as u128 - 2)
        .ok_or(Error::Overflow("N_j"))?;
    debug_assert_eq!(num % j as u128, 0);
    u64::try_from(num / j as u128).map_err(|_| Error::Overflow("N_j"))
}

fn binomial(n: u64, k: u64) -> Result<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("binomial"))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// Radial samples `u(r)`, `u'(r)` of a solution in the original variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSamples {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

/// Multiplier taking `u` to the reduced unknown. It is one unless the power
/// constant is absorbed.
pub fn value_scale(spec: &ProblemSpec) -> f64 {
    let t = spec.transformed();
    match (t.normalization, &spec.nonlinearity) {
        (Normalization::PowerAbsorbed, Nonlinearity::PowerLaw { p }) => {
            t.coupling.powf(1.0 / (p - 1.0))
        }
        _ => 1.0,
    }
}

/// Map `u(r)` to the reduced profile on `t = r^{(2+α)/2}`.
pub fn transform_forward(samples: &RadialSamples, spec: &ProblemSpec) -> Result<NodalProfile> {
    let n = samples.r.len();
    if n < 2 || samples.u.len() != n || samples.du.len() != n {
        return Err(Error::InvalidGrid("sample arrays must have equal length >= 2".into()));
    }
    if samples.r.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("r grid is not strictly increasing".into()));
    }
    if samples.r[0] < 0.0 || samples.r[n - 1] > 1.0 {
        return Err(Error::InvalidGrid("r grid must lie in [0, 1]".into()));
    }
    let tp = spec.transformed();
    let a = tp.scale_exponent;
    let k = value_scale(spec);
    let mut t = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for i in 0..n {
        let r = samples.r[i];
        t.push(if a == 1.0 { r } else { r.powf(a) });
        v.push(k * samples.u[i]);
        // dt/dr = a r^{a-1}; u'(r) = O(r^{1+α}) keeps the ratio finite at 0
        let d = if r == 0.0 {
            0.0
        } else if a == 1.0 {
            k * samples.du[i]
        } else {
            k * samples.du[i] / (a * r.powf(a - 1.0))
        };
        dv.push(d);
    }
    let meta = ProfileMeta::from_spec(spec);
    Ok(NodalProfile::from_samples(t, v, dv, meta, None))
}

/// Inverse of [`transform_forward`].
pub fn transform_inverse(profile: &NodalProfile, spec: &ProblemSpec) -> RadialSamples {
    let tp = spec.transformed();
    let a = tp.scale_exponent;
    let k = value_scale(spec);
    let n = profile.t.len();
    let mut r = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    for i in 0..n {
        let t = profile.t[i];
        let ri = if a == 1.0 { t } else { t.powf(1.0 / a) };
        r.push(ri);
        u.push(profile.v[i] / k);
        let d = if ri == 0.0 {
            0.0
        } else if a == 1.0 {
            profile.dv[i] / k
        } else {
            profile.dv[i] * a * ri.powf(a - 1.0) / k
        };
        du.push(d);
    }
    RadialSamples { r, u, du }
}

/// `r = t^{2/(2+α)}`.
pub fn t_to_r(t: f64, alpha: f64) -> f64 {
    t.powf(2.0 / (2.0 + alpha))
}

pub fn r_to_t(r: f64, alpha: f64) -> f64 {
    r.powf((2.0 + alpha) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_f(n: i64, k: i64) -> i128 {
        if k < 0 || n < 0 || k > n {
            return 0;
        }
        let mut acc: i128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as i128 / (i + 1) as i128;
        }
        acc
    }

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(compute_m(2, 5.0).unwrap(), 2.0);
        assert_eq!(compute_m(5, 0.0).unwrap(), 5.0);
        assert_eq!(compute_m(4, 2.0).unwrap(), 3.0);
        assert!(compute_m(1, 0.0).is_err());
        assert!(compute_m(3, -0.5).is_err());
    }

    #[test]
    fn effective_dimension_monotone_and_limit() {
        for n in 3..8 {
            let mut prev = compute_m(n, 0.0).unwrap();
            assert_eq!(prev, n as f64);
            for k in 1..50 {
                let m = compute_m(n, k as f64 * 0.37).unwrap();
                assert!(m < prev);
                prev = m;
            }
            assert!(compute_m(n, 1e6).unwrap() < 2.0 + 1e-4);
        }
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(3, 2.0).unwrap(), 9.0);
        assert_eq!(critical_exponent(2, 7.0).unwrap(), f64::INFINITY);
        assert_eq!(critical_exponent(4, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn spherical_mode_examples() {
        let s = spherical_mode(3, 1).unwrap();
        assert_eq!((s.lambda, s.multiplicity), (2, 3));
        let s = spherical_mode(2, 0).unwrap();
        assert_eq!((s.lambda, s.multiplicity), (0, 1));
        let s = spherical_mode(4, 2).unwrap();
        assert_eq!((s.lambda, s.multiplicity), (8, 9));
    }

    #[test]
    fn multiplicity_matches_harmonic_polynomial_count() {
        for n in 2..=10i64 {
            for j in 0..=20i64 {
                let oracle = binom_f(n + j - 1, j) - binom_f(n + j - 3, j - 2);
                let got = spherical_mode(n as u32, j as u32).unwrap();
                assert_eq!(got.multiplicity as i128, oracle, "N={n} j={j}");
            }
        }
    }

    #[test]
    fn multiplicity_overflow_is_reported() {
        assert!(matches!(spherical_mode(200, 60), Err(Error::Overflow(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::power(3, 0.0, 5.0, 1).is_err());
        assert!(ProblemSpec::power(3, 0.0, 4.9, 1).is_ok());
        assert!(ProblemSpec::power(2, 3.0, 100.0, 2).is_ok());
        assert!(ProblemSpec::power(2, 3.0, 1.0, 2).is_err());
        assert!(ProblemSpec::power(2, 3.0, 2.0, 0).is_err());
    }

    #[test]
    fn transform_examples() {
        let spec = ProblemSpec::power(3, 2.0, 3.0, 1).unwrap();
        let s = RadialSamples {
            r: vec![0.0, 0.25, 1.0],
            u: vec![2.0, 1.0, 0.0],
            du: vec![0.0, -1.0, -1.0],
        };
        let prof = transform_forward(&s, &spec).unwrap();
        assert_eq!(prof.t[1], 0.0625);
        assert_eq!(prof.v[0], 1.0);
        let back = transform_inverse(&prof, &spec);
        for i in 0..3 {
            assert!((back.r[i] - s.r[i]).abs() <= 1e-14 * s.r[i].abs().max(1e-300));
            assert!((back.u[i] - s.u[i]).abs() <= 1e-14 * s.u[i].abs());
            assert!((back.du[i] - s.du[i]).abs() <= 1e-14 * s.du[i].abs());
        }
    }

    #[test]
    fn transform_is_identity_at_alpha_zero() {
        let spec = ProblemSpec::power(3, 0.0, 3.0, 1).unwrap();
        let s = RadialSamples {
            r: vec![0.0, 0.3, 0.7, 1.0],
            u: vec![1.5, 0.8, -0.2, 0.0],
            du: vec![0.0, -2.0, -1.0, 0.5],
        };
        let prof = transform_forward(&s, &spec).unwrap();
        assert_eq!(prof.t, s.r);
        assert_eq!(prof.v, s.u);
        assert_eq!(prof.dv, s.du);
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let spec = ProblemSpec::power(3, 0.0, 3.0, 1).unwrap();
        let s = RadialSamples {
            r: vec![0.0, 0.5, 0.4],
            u: vec![1.0, 0.5, 0.0],
            du: vec![0.0; 3],
        };
        assert!(matches!(transform_forward(&s, &spec), Err(Error::InvalidGrid(_))));
    }
}
