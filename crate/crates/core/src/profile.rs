//! Grid representation of a reduced radial profile `v(t)` on `[0, 1]`.

use crate::numerics::{fd_weights, hermite_cubic};
use crate::problem::{Nonlinearity, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Reduced equation keeps the coupling `(2/(2+α))²` in front of `f`.
    GeneralF,
    /// Power nonlinearity with the coupling absorbed into the unknown.
    PowerAbsorbed,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::GeneralF => "general-f",
            Normalization::PowerAbsorbed => "power-absorbed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "general-f" => Some(Normalization::GeneralF),
            "power-absorbed" => Some(Normalization::PowerAbsorbed),
            _ => None,
        }
    }
}

/// Problem data carried along with a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMeta {
    pub n: u32,
    pub alpha: f64,
    pub m_eff: f64,
    pub m: u32,
    pub p: Option<f64>,
    pub nonlinearity: String,
    pub odd: bool,
    pub normalization: Normalization,
}

impl ProfileMeta {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let tp = spec.transformed();
        Self {
            n: spec.n,
            alpha: spec.alpha,
            m_eff: tp.m_eff,
            m: spec.m,
            p: spec.nonlinearity.exponent(),
            nonlinearity: spec.nonlinearity.label(),
            odd: spec.nonlinearity.is_odd(),
            normalization: tp.normalization,
        }
    }

    /// Coupling in front of `f` in the reduced equation.
    pub fn coupling(&self) -> f64 {
        match self.normalization {
            Normalization::PowerAbsorbed => 1.0,
            Normalization::GeneralF => {
                let a = (2.0 + self.alpha) / 2.0;
                1.0 / (a * a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverInfo {
    pub method: String,
    pub rtol: f64,
    pub steps: usize,
    /// Rescaling factor applied after shooting (power laws).
    pub rescale: Option<f64>,
    /// Derivative-matching defects at partition points (Nehari gluing).
    pub defects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    /// Zeros `t_1 < ... < t_m`, the last one at `t = 1`.
    pub zeros: Vec<f64>,
    /// Interior critical points `s_1 < ... < s_{m-1}`; `t = 0` is implied.
    pub critical_points: Vec<f64>,
    /// `M_0, ..., M_{m-1}`: largest `|v|` on each nodal zone.
    pub extremal_values: Vec<f64>,
    pub meta: ProfileMeta,
    pub residual_norm: Option<f64>,
    pub info: SolverInfo,
}

impl NodalProfile {
    /// Build a profile from samples, locating zeros and critical points by
    /// sign changes of the Hermite interpolant.
    pub fn from_samples(
        t: Vec<f64>,
        v: Vec<f64>,
        dv: Vec<f64>,
        meta: ProfileMeta,
        residual_norm: Option<f64>,
    ) -> Self {
        let mut prof = Self {
            t,
            v,
            dv,
            zeros: Vec::new(),
            critical_points: Vec::new(),
            extremal_values: Vec::new(),
            meta,
            residual_norm,
            info: SolverInfo::default(),
        };
        prof.zeros = prof.sign_changes_of_values();
        prof.critical_points = prof.sign_changes_of_derivative();
        prof.extremal_values = prof.compute_extremal_values();
        prof
    }

    /// Build a profile whose zeros and critical points are already known
    /// accurately (from event location).
    pub fn with_events(
        t: Vec<f64>,
        v: Vec<f64>,
        dv: Vec<f64>,
        zeros: Vec<f64>,
        critical_points: Vec<f64>,
        meta: ProfileMeta,
        info: SolverInfo,
    ) -> Self {
        let mut prof = Self {
            t,
            v,
            dv,
            zeros,
            critical_points,
            extremal_values: Vec::new(),
            meta,
            residual_norm: None,
            info,
        };
        prof.extremal_values = prof.compute_extremal_values();
        prof
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn v0(&self) -> f64 {
        self.v[0]
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.t.len();
        let i = self.t.partition_point(|&x| x <= t);
        i.clamp(1, n - 1) - 1
    }

    /// Cubic Hermite interpolation of `(v, v')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.locate(t);
        hermite_cubic(
            self.t[i],
            self.t[i + 1],
            self.v[i],
            self.v[i + 1],
            self.dv[i],
            self.dv[i + 1],
            t,
        )
    }

    fn bisect_interpolant(&self, i: usize, derivative: bool) -> f64 {
        let (mut a, mut b) = (self.t[i], self.t[i + 1]);
        let pick = |t: f64| {
            let (v, dv) = hermite_cubic(
                self.t[i],
                self.t[i + 1],
                self.v[i],
                self.v[i + 1],
                self.dv[i],
                self.dv[i + 1],
                t,
            );
            if derivative {
                dv
            } else {
                v
            }
        };
        let fa = pick(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = pick(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    fn sign_changes_of_values(&self) -> Vec<f64> {
        let n = self.t.len();
        let scale = self.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tiny = 1e-12 * scale;
        let mut zeros = Vec::new();
        for i in 0..n - 1 {
            let (a, b) = (self.v[i], self.v[i + 1]);
            if i + 1 == n - 1 && b.abs() <= tiny {
                break;
            }
            if a * b < 0.0 {
                zeros.push(self.bisect_interpolant(i, false));
            } else if b == 0.0 && i + 2 < n && self.v[i + 2] * a < 0.0 {
                zeros.push(self.t[i + 1]);
            }
        }
        if self.v[n - 1].abs() <= tiny {
            zeros.push(self.t[n - 1]);
        }
        zeros
    }

    fn sign_changes_of_derivative(&self) -> Vec<f64> {
        let n = self.t.len();
        let mut out = Vec::new();
        // skip t = 0 where v' vanishes by symmetry
        for i in 1..n - 1 {
            let (a, b) = (self.dv[i], self.dv[i + 1]);
            if a * b < 0.0 {
                out.push(self.bisect_interpolant(i, true));
            }
        }
        out
    }

    fn compute_extremal_values(&self) -> Vec<f64> {
        let mut bounds = vec![0.0];
        bounds.extend(self.zeros.iter().copied());
        if *bounds.last().unwrap() < 1.0 {
            bounds.push(1.0);
        }
        let mut out = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut best = 0.0f64;
            for (i, &t) in self.t.iter().enumerate() {
                if t >= a && t <= b {
                    best = best.max(self.v[i].abs());
                }
            }
            for &s in &self.critical_points {
                if s > a && s < b {
                    best = best.max(self.eval(s).0.abs());
                }
            }
            out.push(best);
        }
        out
    }

    /// Index ranges of nodes strictly inside each nodal zone.
    pub fn zone_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![0.0];
        bounds.extend(self.zeros.iter().copied());
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Reduced nonlinearity `g` with `-(t^{M-1}v')' = t^{M-1} g(v)`.
    pub fn reduced_nonlinearity<'a>(
        &self,
        spec: &'a ProblemSpec,
    ) -> Box<dyn Fn(f64) -> f64 + Send + Sync + 'a> {
        let c = self.meta.coupling();
        match &spec.nonlinearity {
            Nonlinearity::PowerLaw { p } => {
                let p = *p;
                Box::new(move |s: f64| c * s.abs().powf(p - 1.0) * s)
            }
            Nonlinearity::General(g) => {
                let f = g.f.clone();
                Box::new(move |s: f64| c * f(s))
            }
        }
    }

    /// Max over interior nodes of `|(t^{M-1}v')' + t^{M-1}g(v)|`, with the
    /// derivative of `t^{M-1}v'` taken by 7-point finite differences of the
    /// stored `v'` samples. Unnormalized.
    pub fn raw_residual(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let m = self.meta.m_eff;
        let n = self.t.len();
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let lo = i.saturating_sub(3).min(n.saturating_sub(7));
            let hi = (lo + 7).min(n);
            let w = fd_weights(self.t[i], &self.t[lo..hi], 1);
            let d2: f64 = (lo..hi).map(|k| w[1][k - lo] * self.dv[k]).sum();
            let t = self.t[i];
            let r = t.powf(m - 1.0) * (d2 + g(self.v[i])) + (m - 1.0) * t.powf(m - 2.0) * self.dv[i];
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Residual normalized by `1 + max |g(v)|`.
    pub fn normalized_residual(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let scale = self.v.iter().fold(0.0f64, |acc, &x| acc.max(g(x).abs()));
        self.raw_residual(g) / (1.0 + scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ProfileMeta {
        ProfileMeta {
            n: 3,
            alpha: 0.0,
            m_eff: 3.0,
            m: 2,
            p: Some(3.0),
            nonlinearity: "power(3)".into(),
            odd: true,
            normalization: Normalization::PowerAbsorbed,
        }
    }

    #[test]
    fn zeros_and_critical_points_from_samples() {
        // v = cos(3π t / 2): zeros at 1/3 and 1, critical point at 2/3
        let n = 2001;
        let k = 1.5 * std::f64::consts::PI;
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = t.iter().map(|&x| (k * x).cos()).collect();
        let dv: Vec<f64> = t.iter().map(|&x| -k * (k * x).sin()).collect();
        let p = NodalProfile::from_samples(t, v, dv, meta(), None);
        assert_eq!(p.zeros.len(), 2);
        assert!((p.zeros[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.zeros[1], 1.0);
        assert_eq!(p.critical_points.len(), 1);
        assert!((p.critical_points[0] - 2.0 / 3.0).abs() < 1e-8);
        assert!((p.extremal_values[0] - 1.0).abs() < 1e-15);
        assert!((p.extremal_values[1] - 1.0).abs() < 1e-12);
    }
}
