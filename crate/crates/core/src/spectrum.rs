//! Classical and singular Sturm-Liouville spectra of the linearized reduced
//! operator
//!
//! `-(t^{M-1}ψ')' - t^{M-1} V ψ = ν t^{M-1} ψ` (classical, `ψ'(0) = 0`),
//! `-(t^{M-1}ψ')' - t^{M-1} V ψ = ν̂ t^{M-3} ψ` (singular),
//!
//! both with `ψ(1) = 0`, by Prüfer-angle shooting in `x = ln t`.
//!
//! With `u = ψ`, `y = tψ'` the equation reads `u_x = y`,
//! `y_x = -(M-2) y - q u`, where `q = t²(V + ν)` or `q = t²V + ν̂`. In polar
//! form `u = ρ sin θ`, `y = ρ cos θ`:
//!
//! `θ_x = cos²θ + (M-2) sinθ cosθ + q sin²θ`,
//! `(ln ρ)_x = sinθ cosθ (1 - q) - (M-2) cos²θ`.
//!
//! `θ_x = 1` wherever `u = 0`, so `θ` only crosses multiples of `π` upwards
//! and `⌊θ(0)/π⌋` counts the eigenvalues below the trial value.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{brent, fd_weights};
use crate::ode::{Dop853, Flow};
use crate::problem::{Nonlinearity, ProblemSpec, ScalarFn};
use crate::profile::{NodalProfile, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EigenKind {
    /// Weight `t^{M-1}`.
    Classical,
    /// Weight `t^{M-3}`.
    Singular,
}

impl EigenKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EigenKind::Classical => "classical",
            EigenKind::Singular => "singular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classical" => Some(EigenKind::Classical),
            "singular" => Some(EigenKind::Singular),
            _ => None,
        }
    }

    /// Exponent of `t` in the weight, measured in `dx = dt/t`.
    pub fn weight_exponent(&self, m: f64) -> f64 {
        match self {
            EigenKind::Classical => m,
            EigenKind::Singular => m - 2.0,
        }
    }
}

#[derive(Clone)]
enum Source {
    Profile {
        profile: Arc<NodalProfile>,
        /// Derivative of the reduced nonlinearity, `V = dg(v)`.
        dg: ScalarFn,
        g: ScalarFn,
    },
    Function(ScalarFn),
}

/// `V(t)` together with the effective dimension.
#[derive(Clone)]
pub struct LinearizedPotential {
    pub m_eff: f64,
    source: Source,
    /// Sample grid (the profile grid when built from a profile).
    pub grid: Vec<f64>,
    pub samples: Vec<f64>,
}

impl std::fmt::Debug for LinearizedPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearizedPotential")
            .field("m_eff", &self.m_eff)
            .field("nodes", &self.grid.len())
            .field("max", &self.max())
            .finish()
    }
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

impl LinearizedPotential {
    /// `V = p|v|^{p-1}` for power profiles, `V = c f'(v)` otherwise.
    pub fn from_profile(profile: &NodalProfile, spec: &ProblemSpec) -> Self {
        let c = match profile.meta.normalization {
            Normalization::PowerAbsorbed => 1.0,
            Normalization::GeneralF => spec.transformed().coupling,
        };
        let (dg, g): (ScalarFn, ScalarFn) = match &spec.nonlinearity {
            Nonlinearity::PowerLaw { p } => {
                let p = *p;
                (
                    Arc::new(move |s: f64| c * p * s.abs().powf(p - 1.0)),
                    Arc::new(move |s: f64| c * s.abs().powf(p - 1.0) * s),
                )
            }
            Nonlinearity::General(gf) => {
                let (df, f) = (gf.df.clone(), gf.f.clone());
                (Arc::new(move |s: f64| c * df(s)), Arc::new(move |s: f64| c * f(s)))
            }
        };
        let samples = profile.v.iter().map(|&v| dg(v)).collect();
        Self {
            m_eff: profile.meta.m_eff,
            grid: profile.t.clone(),
            samples,
            source: Source::Profile {
                profile: Arc::new(profile.clone()),
                dg,
                g,
            },
        }
    }

    pub fn from_fn(m_eff: f64, f: ScalarFn) -> Self {
        let grid = uniform_grid(2001);
        let samples = grid.iter().map(|&t| f(t)).collect();
        Self {
            m_eff,
            source: Source::Function(f),
            grid,
            samples,
        }
    }

    pub fn zero(m_eff: f64) -> Self {
        Self::from_fn(m_eff, Arc::new(|_| 0.0))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match &self.source {
            Source::Profile { profile, dg, .. } => dg(profile.eval(t).0),
            Source::Function(f) => f(t),
        }
    }

    pub fn at_origin(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// `max t² |V|` over the sample grid.
    pub fn max_scaled(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.samples)
            .fold(0.0f64, |m, (&t, &v)| m.max(t * t * v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn profile(&self) -> Option<&NodalProfile> {
        match &self.source {
            Source::Profile { profile, .. } => Some(profile),
            Source::Function(_) => None,
        }
    }

    /// `ζ = v'` and `ζ'` from the equation, when built from a profile.
    pub fn zeta(&self, t: f64) -> Option<(f64, f64)> {
        match &self.source {
            Source::Profile { profile, g, .. } => {
                let (v, dv) = profile.eval(t);
                let d2 = if t == 0.0 {
                    -g(v) / self.m_eff
                } else {
                    -(self.m_eff - 1.0) / t * dv - g(v)
                };
                Some((dv, d2))
            }
            Source::Function(_) => None,
        }
    }

    /// Right-hand side of the profile equation in `x = ln t` for the state
    /// `(v, t v')`, with the potential it produces. Integrating the profile
    /// alongside an eigenfunction keeps `V` as smooth as the profile itself,
    /// where the grid interpolant is only `C¹`.
    #[inline]
    fn carried(&self, t: f64, w: f64, yw: f64) -> (f64, f64, f64) {
        match &self.source {
            Source::Profile { dg, g, .. } => {
                (dg(w), yw, -(self.m_eff - 2.0) * yw - t * t * g(w))
            }
            Source::Function(f) => (f(t), 0.0, 0.0),
        }
    }

    /// Carried state `(v, t v')` at `t`.
    fn carried_at(&self, t: f64) -> [f64; 2] {
        match &self.source {
            Source::Profile { profile, .. } => {
                let (v, dv) = profile.eval(t);
                [v, t * dv]
            }
            Source::Function(_) => [0.0, 0.0],
        }
    }

    /// Left end of the shooting interval: small enough that the two-term
    /// series start-up is exact to rounding for values up to `|ν| ~ max V`.
    pub fn start_point(&self) -> f64 {
        let scale = 1.0 + 2.0 * self.max();
        1e-6f64.min(1e-4 / scale.sqrt())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Eigenvalue tolerance, relative to `max(1, |ν|)`.
    pub eig_tol: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            eig_tol: 1e-12,
            residual_tol: 1e-6,
            max_steps: 2_000_000,
        }
    }
}

impl SpectrumOptions {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            eig_tol: self.eig_tol / factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub index: usize,
    pub value: f64,
    pub kind: EigenKind,
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub nodal_count: usize,
    /// Relative defect of the Rayleigh quotient, `|R(ψ) - ν| / max(1, |ν|)`.
    pub residual: f64,
    pub rayleigh: f64,
    /// `γ₊` for singular pairs.
    pub frobenius_exponent: Option<f64>,
}

/// `γ₊(ν̂) = √(((M-2)/2)² - ν̂) - (M-2)/2`.
pub fn frobenius_exponent(m: f64, nu_hat: f64) -> f64 {
    let k = 0.5 * (m - 2.0);
    (k * k - nu_hat).sqrt() - k
}

/// Series start-up at `t_s`: `ψ ≈ t^γ (1 + a t²)`.
#[derive(Debug, Clone, Copy)]
struct StartUp {
    gamma: f64,
    a: f64,
    theta0: f64,
    ln_rho0: f64,
    /// `ln ψ(t_s)`.
    ln_psi0: f64,
}

fn start_up(pot: &LinearizedPotential, kind: EigenKind, nu: f64, ts: f64) -> Result<StartUp> {
    let m = pot.m_eff;
    let v0 = pot.at_origin();
    let (gamma, a) = match kind {
        EigenKind::Classical => (0.0, -(v0 + nu) / (2.0 * m)),
        EigenKind::Singular => {
            let k = 0.5 * (m - 2.0);
            if !(nu < k * k) {
                return Err(Error::Domain(format!(
                    "singular start-up needs ν̂ < {}; got {nu}",
                    k * k
                )));
            }
            let g = frobenius_exponent(m, nu);
            (g, -v0 / (2.0 * (2.0 * g + m)))
        }
    };
    let s = 1.0 + a * ts * ts;
    let c = gamma + (gamma + 2.0) * a * ts * ts;
    // u = t^γ s, y = t^γ c; the common factor only shifts ln ρ
    let theta0 = s.atan2(c);
    let ln_rho0 = gamma * ts.ln() + 0.5 * (s * s + c * c).ln();
    Ok(StartUp {
        gamma,
        a,
        theta0,
        ln_rho0,
        ln_psi0: gamma * ts.ln() + s.abs().ln(),
    })
}

/// Sturm-Liouville solver on a fixed potential.
pub struct SturmSolver<'a> {
    pub pot: &'a LinearizedPotential,
    pub opts: SpectrumOptions,
    ts: f64,
}

impl<'a> SturmSolver<'a> {
    pub fn new(pot: &'a LinearizedPotential, opts: SpectrumOptions) -> Self {
        Self {
            pot,
            opts,
            ts: pot.start_point(),
        }
    }

    fn solver(&self) -> Dop853 {
        Dop853 {
            rtol: self.opts.rtol,
            atol: self.opts.atol,
            max_steps: self.opts.max_steps,
            ..Dop853::default()
        }
    }

    #[inline]
    fn q(&self, kind: EigenKind, x: f64, nu: f64) -> (f64, f64) {
        let t = x.exp();
        let v = self.pot.eval(t);
        let q = match kind {
            EigenKind::Classical => t * t * (v + nu),
            EigenKind::Singular => t * t * v + nu,
        };
        (t, q)
    }

    #[inline]
    fn q_of(&self, kind: EigenKind, t: f64, v: f64, nu: f64) -> f64 {
        match kind {
            EigenKind::Classical => t * t * (v + nu),
            EigenKind::Singular => t * t * v + nu,
        }
    }

    /// Phase equation with the carried profile state in `y[1..3]`.
    #[inline]
    fn phase_rhs(&self, kind: EigenKind, nu: f64, x: f64, y: &[f64; 3]) -> [f64; 3] {
        let t = x.exp();
        let (v, dw, dyw) = self.pot.carried(t, y[1], y[2]);
        let q = self.q_of(kind, t, v, nu);
        let (s, c) = y[0].sin_cos();
        let m2 = self.pot.m_eff - 2.0;
        [c * c + m2 * s * c + q * s * s, dw, dyw]
    }

    fn left_state(&self) -> [f64; 2] {
        self.pot.carried_at(self.ts)
    }

    fn right_state(&self) -> [f64; 2] {
        self.pot.carried_at(1.0)
    }

    /// Prüfer phase at `t = 1`.
    pub fn phase(&self, kind: EigenKind, nu: f64) -> Result<f64> {
        let su = start_up(self.pot, kind, nu, self.ts)?;
        let [w, yw] = self.left_state();
        let end = self.solver().integrate(
            |x, y: &[f64; 3]| self.phase_rhs(kind, nu, x, y),
            self.ts.ln(),
            [su.theta0, w, yw],
            0.0,
            |_| Flow::Continue,
        )?;
        Ok(end.y[0])
    }

    /// Number of eigenvalues strictly below `nu`.
    pub fn count_below(&self, kind: EigenKind, nu: f64) -> Result<usize> {
        let th = self.phase(kind, nu)?;
        Ok((th / std::f64::consts::PI).floor().max(0.0) as usize)
    }

    /// The `k`-th eigenvalue (1-based) inside a bracket `lo < ν_k < hi`
    /// that is widened downwards / upwards as needed.
    pub fn eigenvalue(&self, kind: EigenKind, k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
        let target = k as f64 * std::f64::consts::PI;
        let mut expansions = 0;
        while self.phase(kind, lo)? >= target {
            expansions += 1;
            if expansions > 60 {
                return Err(Error::Bracket { index: k, lower: lo });
            }
            lo -= 2.0 * lo.abs() + 1.0;
        }
        let ceiling = match kind {
            EigenKind::Singular => {
                let kk = 0.5 * (self.pot.m_eff - 2.0);
                Some(kk * kk)
            }
            EigenKind::Classical => None,
        };
        expansions = 0;
        while self.phase(kind, hi)? <= target {
            expansions += 1;
            if expansions > 60 {
                return Err(Error::Bracket { index: k, lower: lo });
            }
            hi = match ceiling {
                Some(c) => {
                    let next = hi + 2.0 * hi.abs() + 1.0;
                    if next >= c {
                        0.5 * (hi + c)
                    } else {
                        next
                    }
                }
                None => hi + 2.0 * hi.abs() + 1.0,
            };
        }
        let mut err = None;
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let root = brent(
            |nu| match self.phase(kind, nu) {
                Ok(th) => th - target,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            self.opts.eig_tol * scale,
            400,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let nu0 = root.ok_or(Error::Bracket { index: k, lower: lo })?;
        self.refine(kind, k, nu0, lo, hi)
    }

    /// `θ_L(x_c) - θ_R(x_c)`, with `θ_L` from the origin and `θ_R` run
    /// backwards from `θ = 0` at `t = 1`. Equals `kπ` at the `k`-th
    /// eigenvalue for any `x_c`, and is increasing in `nu`.
    pub fn mismatch(&self, kind: EigenKind, nu: f64, xc: f64) -> Result<f64> {
        let su = start_up(self.pot, kind, nu, self.ts)?;
        let [w, yw] = self.left_state();
        let rhs = |x: f64, y: &[f64; 3]| self.phase_rhs(kind, nu, x, y);
        let left = self
            .solver()
            .integrate(rhs, self.ts.ln(), [su.theta0, w, yw], xc, |_| Flow::Continue)?;
        let [w, yw] = self.right_state();
        let right = self.solver().integrate(
            |s, y: &[f64; 3]| {
                let d = rhs(-s, y);
                [-d[0], -d[1], -d[2]]
            },
            0.0,
            [0.0, w, yw],
            -xc,
            |_| Flow::Continue,
        )?;
        Ok(left.y[0] - right.y[0])
    }

    /// Polish an eigenvalue found from the phase at `t = 1` with the
    /// two-sided mismatch, which stays well conditioned when the
    /// eigenfunction decays steeply towards `t = 1`.
    fn refine(&self, kind: EigenKind, k: usize, nu0: f64, lo: f64, hi: f64) -> Result<f64> {
        let xc = self.matching_point(kind, nu0);
        if xc >= 0.0 {
            return Ok(nu0);
        }
        let target = k as f64 * std::f64::consts::PI;
        let scale = nu0.abs().max(1.0);
        let f = |nu: f64| self.mismatch(kind, nu, xc).map(|d| d - target);
        let mut delta = 1e-7 * scale;
        let (mut a, mut b);
        loop {
            a = (nu0 - delta).max(lo);
            b = (nu0 + delta).min(hi);
            if f(a)? < 0.0 && f(b)? > 0.0 {
                break;
            }
            if a <= lo && b >= hi {
                return Ok(nu0);
            }
            delta *= 8.0;
        }
        let mut err = None;
        let root = brent(
            |nu| match f(nu) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            a,
            b,
            self.opts.eig_tol * scale,
            400,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(root.unwrap_or(nu0))
    }

    /// Matching abscissa `x_c = ln t_c` for two-sided integration: the
    /// right end of the last interval where the equation oscillates in `x`
    /// (`q > ((M-2)/2)²`), or the maximiser of `q` if there is none. Past
    /// that point the eigenfunction decays towards `t = 1` and a forward
    /// run is swamped by the growing solution.
    fn matching_point(&self, kind: EigenKind, nu: f64) -> f64 {
        let k = 0.5 * (self.pot.m_eff - 2.0);
        let x0 = self.ts.ln();
        let n = 4000;
        let mut best = (f64::NEG_INFINITY, x0);
        let mut last_allowed = None;
        for i in 0..=n {
            let x = x0 * (1.0 - i as f64 / n as f64);
            let (_, q) = self.q(kind, x, nu);
            if q > best.0 {
                best = (q, x);
            }
            if q > k * k {
                last_allowed = Some(x);
            }
        }
        let xc = last_allowed.unwrap_or(best.1);
        xc.max(x0 + 1e-3 * x0.abs())
    }

    /// Integrate `rhs` forward from `x0` to `xc` and backward from `0` to
    /// `xc`, sampling at the abscissae `xs` (increasing). Returns the left
    /// samples, the left end state, the right samples and the right end
    /// state. Quadratures are carried relative to `ρ²` so that they stay
    /// bounded while `ρ` grows; the right ones come out negated.
    #[allow(clippy::type_complexity)]
    fn two_sided<const D: usize, F>(
        &self,
        rhs: F,
        x0: f64,
        left: [f64; D],
        xc: f64,
        right: [f64; D],
        xs: &[f64],
    ) -> Result<(Vec<[f64; D]>, [f64; D], Vec<[f64; D]>, [f64; D])>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
    {
        let split = xs.partition_point(|&x| x <= xc);
        let (xl, xr) = xs.split_at(split);
        let mut ls: Vec<[f64; D]> = Vec::with_capacity(xl.len());
        let mut next = 0usize;
        let end_l = self.solver().integrate(&rhs, x0, left, xc, |step| {
            while next < xl.len() && xl[next] <= step.t1 {
                ls.push(if xl[next] == step.t1 { step.y1 } else { step.eval(xl[next]) });
                next += 1;
            }
            Flow::Continue
        })?;
        while ls.len() < xl.len() {
            ls.push(end_l.y);
        }
        if xc >= 0.0 {
            return Ok((ls, end_l.y, Vec::new(), right));
        }
        // s = -x runs from 0 to -xc
        let back: Vec<f64> = xr.iter().rev().map(|x| -x).collect();
        let mut rs: Vec<[f64; D]> = Vec::with_capacity(back.len());
        let mut next = 0usize;
        while next < back.len() && back[next] <= 0.0 {
            rs.push(right);
            next += 1;
        }
        let end_r = self.solver().integrate(
            |s, y: &[f64; D]| {
                let d = rhs(-s, y);
                let mut out = [0.0; D];
                for i in 0..D {
                    out[i] = -d[i];
                }
                out
            },
            0.0,
            right,
            -xc,
            |step| {
                while next < back.len() && back[next] <= step.t1 {
                    rs.push(if back[next] == step.t1 { step.y1 } else { step.eval(back[next]) });
                    next += 1;
                }
                Flow::Continue
            },
        )?;
        while rs.len() < back.len() {
            rs.push(end_r.y);
        }
        rs.reverse();
        Ok((ls, end_l.y, rs, end_r.y))
    }

    /// Integrate the eigenfunction for `nu`, sampled at `grid`, together
    /// with the Rayleigh integrals. The left run from the origin and the
    /// right run from `t = 1` are matched in amplitude at the turning point.
    pub fn eigenpair(&self, kind: EigenKind, index: usize, nu: f64, grid: &[f64]) -> Result<EigenPair> {
        let su = start_up(self.pot, kind, nu, self.ts)?;
        let m = self.pot.m_eff;
        let m2 = m - 2.0;
        let ew = kind.weight_exponent(m);
        let x0 = self.ts.ln();
        let xc = self.matching_point(kind, nu);
        // sample abscissae beyond the start-up point
        let first = grid.partition_point(|&t| t <= self.ts);
        let xs: Vec<f64> = grid[first..].iter().map(|t| t.ln()).collect();
        let pi = std::f64::consts::PI;
        let [wl, ywl] = self.left_state();
        let [wr, ywr] = self.right_state();
        let (ls, yl, rs, yr) = self.two_sided(
            |x, y: &[f64; 7]| {
                let t = x.exp();
                let (v, dw, dyw) = self.pot.carried(t, y[5], y[6]);
                let q = self.q_of(kind, t, v, nu);
                let (s, c) = y[0].sin_cos();
                let dl = s * c * (1.0 - q) - m2 * c * c;
                [
                    c * c + m2 * s * c + q * s * s,
                    dl,
                    t.powf(ew) * s * s - 2.0 * dl * y[2],
                    t.powf(m2) * c * c - 2.0 * dl * y[3],
                    t.powf(m) * v * s * s - 2.0 * dl * y[4],
                    dw,
                    dyw,
                ]
            },
            x0,
            [su.theta0, su.ln_rho0, 0.0, 0.0, 0.0, wl, ywl],
            xc,
            [pi, 0.0, 0.0, 0.0, 0.0, wr, ywr],
            &xs,
        )?;
        // right piece = σ · (right solution)
        let ln_sigma = yl[1] - yr[1];
        let sign = if (yl[0] - yr[0]).cos() < 0.0 { -1.0 } else { 1.0 };
        let rho2 = (2.0 * yl[1]).exp();

        let psi0sq = (2.0 * su.ln_psi0).exp();
        let v0 = self.pot.at_origin();
        let ts = self.ts;
        let (tn, tg, tv) = match kind {
            EigenKind::Classical => (
                psi0sq * ts.powf(m) / m,
                4.0 * su.a * su.a * psi0sq * ts.powf(m + 2.0) / (m + 2.0),
                v0 * psi0sq * ts.powf(m) / m,
            ),
            EigenKind::Singular => {
                let d = m - 2.0 + 2.0 * su.gamma;
                (
                    psi0sq * ts.powf(m - 2.0) / d,
                    su.gamma * su.gamma * psi0sq * ts.powf(m - 2.0) / d,
                    v0 * psi0sq * ts.powf(m) / (m + 2.0 * su.gamma),
                )
            }
        };
        let norm = rho2 * (yl[2] - yr[2]) + tn;
        let grad = rho2 * (yl[3] - yr[3]) + tg;
        let pot = rho2 * (yl[4] - yr[4]) + tv;
        let rayleigh = (grad - pot) / norm;
        let ln_scale = -0.5 * norm.ln();
        let scale = ln_scale.exp();

        let mut psi = Vec::with_capacity(grid.len());
        let mut dpsi = Vec::with_capacity(grid.len());
        for &t in &grid[..first] {
            let (p, d) = series_value(&su, t);
            psi.push(p * scale);
            dpsi.push(d * scale);
        }
        let samples = ls
            .iter()
            .map(|s| (s[0], s[1] + ln_scale, 1.0))
            .chain(rs.iter().map(|s| (s[0], s[1] + ln_sigma + ln_scale, sign)));
        for (k, (th, lr, sg)) in samples.enumerate() {
            let t = grid[first + k];
            let r = sg * lr.exp();
            let (sn, cs) = th.sin_cos();
            psi.push(r * sn);
            dpsi.push(r * cs / t);
        }
        // positive on the zone adjacent to the origin
        if let Some(&first_nz) = psi.iter().find(|v| **v != 0.0) {
            if first_nz < 0.0 {
                psi.iter_mut().for_each(|v| *v = -*v);
                dpsi.iter_mut().for_each(|v| *v = -*v);
            }
        }
        // Samples below the level of the boundary value carry no reliable
        // sign.
        let amp = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 10.0 * psi.last().map_or(0.0, |v| v.abs()) + 1e-12 * amp;
        let trusted: Vec<f64> = psi[..psi.len().saturating_sub(1)]
            .iter()
            .map(|&v| if v.abs() <= floor { 0.0 } else { v })
            .collect();
        let nodal_count = sign_changes(&trusted);
        Ok(EigenPair {
            index,
            value: nu,
            kind,
            t: grid.to_vec(),
            psi,
            dpsi,
            nodal_count,
            residual: (rayleigh - nu).abs() / nu.abs().max(1.0),
            rayleigh,
            frobenius_exponent: match kind {
                EigenKind::Singular => Some(su.gamma),
                EigenKind::Classical => None,
            },
        })
    }

    /// `|∫ w ψ_a ψ_b| / √(∫ w ψ_a² ∫ w ψ_b²)` for two eigenvalues of the same
    /// kind, integrated jointly from both ends.
    pub fn overlap(&self, kind: EigenKind, nu_a: f64, nu_b: f64) -> Result<f64> {
        let sa = start_up(self.pot, kind, nu_a, self.ts)?;
        let sb = start_up(self.pot, kind, nu_b, self.ts)?;
        let m = self.pot.m_eff;
        let m2 = m - 2.0;
        let ew = kind.weight_exponent(m);
        let pi = std::f64::consts::PI;
        let xc = self.matching_point(kind, nu_a.min(nu_b));
        let [wl, ywl] = self.left_state();
        let [wr, ywr] = self.right_state();
        let (_, yl, _, yr) = self.two_sided(
            |x, y: &[f64; 9]| {
                let t = x.exp();
                let (v, dw, dyw) = self.pot.carried(t, y[7], y[8]);
                let qa = self.q_of(kind, t, v, nu_a);
                let qb = self.q_of(kind, t, v, nu_b);
                let (s1, c1) = y[0].sin_cos();
                let (s2, c2) = y[2].sin_cos();
                let w = t.powf(ew);
                let da = s1 * c1 * (1.0 - qa) - m2 * c1 * c1;
                let db = s2 * c2 * (1.0 - qb) - m2 * c2 * c2;
                [
                    c1 * c1 + m2 * s1 * c1 + qa * s1 * s1,
                    da,
                    c2 * c2 + m2 * s2 * c2 + qb * s2 * s2,
                    db,
                    w * s1 * s2 - (da + db) * y[4],
                    w * s1 * s1 - 2.0 * da * y[5],
                    w * s2 * s2 - 2.0 * db * y[6],
                    dw,
                    dyw,
                ]
            },
            self.ts.ln(),
            [sa.theta0, sa.ln_rho0, sb.theta0, sb.ln_rho0, 0.0, 0.0, 0.0, wl, ywl],
            xc,
            [pi, 0.0, pi, 0.0, 0.0, 0.0, 0.0, wr, ywr],
            &[],
        )?;
        let ts = self.ts;
        let pa = sa.ln_psi0;
        let pb = sb.ln_psi0;
        let (tab, taa, tbb) = match kind {
            EigenKind::Classical => {
                let w = ts.powf(m) / m;
                ((pa + pb).exp() * w, (2.0 * pa).exp() * w, (2.0 * pb).exp() * w)
            }
            EigenKind::Singular => {
                let w = ts.powf(m - 2.0);
                (
                    (pa + pb).exp() * w / (m - 2.0 + sa.gamma + sb.gamma),
                    (2.0 * pa).exp() * w / (m - 2.0 + 2.0 * sa.gamma),
                    (2.0 * pb).exp() * w / (m - 2.0 + 2.0 * sb.gamma),
                )
            }
        };
        let sga = if (yl[0] - yr[0]).cos() < 0.0 { -1.0 } else { 1.0 };
        let sgb = if (yl[2] - yr[2]).cos() < 0.0 { -1.0 } else { 1.0 };
        let ab = (yl[1] + yl[3]).exp() * (yl[4] - sga * sgb * yr[4]) + tab;
        let aa = (2.0 * yl[1]).exp() * (yl[5] - yr[5]) + taa;
        let bb = (2.0 * yl[3]).exp() * (yl[6] - yr[6]) + tbb;
        Ok((ab / (aa * bb).sqrt()).abs())
    }
}

fn series_value(su: &StartUp, t: f64) -> (f64, f64) {
    let (g, a) = (su.gamma, su.a);
    if g == 0.0 {
        return (1.0 + a * t * t, 2.0 * a * t);
    }
    if t == 0.0 {
        let d = if g > 1.0 {
            0.0
        } else if g == 1.0 {
            1.0
        } else {
            f64::INFINITY
        };
        return (0.0, d);
    }
    let tg = t.powf(g);
    (tg * (1.0 + a * t * t), g * tg / t * (1.0 + a * t * t) + 2.0 * a * tg * t)
}

/// Sign changes in a sample sequence, skipping exact zeros.
pub fn sign_changes(v: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &x in v {
        if x == 0.0 {
            continue;
        }
        if last != 0.0 && x.signum() != last {
            count += 1;
        }
        last = x.signum();
    }
    count
}

fn sample_grid(pot: &LinearizedPotential) -> Vec<f64> {
    match pot.profile() {
        Some(p) => p.t.clone(),
        None => pot.grid.clone(),
    }
}

fn certify(pair: &EigenPair, opts: &SpectrumOptions) -> Result<()> {
    if pair.nodal_count + 1 != pair.index {
        return Err(Error::Certification {
            index: pair.index,
            reason: format!("nodal count {} for index {}", pair.nodal_count, pair.index),
        });
    }
    if !(pair.residual <= opts.residual_tol) {
        return Err(Error::Certification {
            index: pair.index,
            reason: format!("Rayleigh defect {:e}", pair.residual),
        });
    }
    Ok(())
}

/// The lowest `k_max` classical eigenpairs.
pub fn classical_spectrum(pot: &LinearizedPotential, k_max: usize, opts: &SpectrumOptions) -> Result<Vec<EigenPair>> {
    let solver = SturmSolver::new(pot, *opts);
    let grid = sample_grid(pot);
    // the quadratic form is bounded below by -max V
    let mut lo = -pot.max() - 1.0;
    let hi0 = 1.0f64;
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let nu = solver.eigenvalue(EigenKind::Classical, k, lo, hi0.max(lo + 1.0))?;
        let pair = solver.eigenpair(EigenKind::Classical, k, nu, &grid)?;
        certify(&pair, opts)?;
        lo = nu;
        out.push(pair);
    }
    check_increasing(&out)?;
    Ok(out)
}

fn check_increasing(pairs: &[EigenPair]) -> Result<()> {
    for w in pairs.windows(2) {
        if !(w[1].value > w[0].value) {
            return Err(Error::SolverFault(format!(
                "eigenvalues {} and {} not increasing ({} >= {})",
                w[0].index, w[1].index, w[0].value, w[1].value
            )));
        }
    }
    Ok(())
}

/// Just below zero: `0` when the Hardy constant is positive, a hair below
/// it in the plane where the threshold itself is `0`.
fn zero_minus(m: f64) -> f64 {
    if m > 2.0 + 1e-12 {
        0.0
    } else {
        -1e-12
    }
}

/// Count of negative classical eigenvalues.
pub fn classical_negative_count(pot: &LinearizedPotential, opts: &SpectrumOptions) -> Result<usize> {
    SturmSolver::new(pot, *opts).count_below(EigenKind::Classical, 0.0)
}

/// All negative singular eigenpairs, sorted increasing.
pub fn singular_spectrum_negative(pot: &LinearizedPotential, opts: &SpectrumOptions) -> Result<Vec<EigenPair>> {
    let solver = SturmSolver::new(pot, *opts);
    let grid = sample_grid(pot);
    let top = zero_minus(pot.m_eff);
    let count = solver.count_below(EigenKind::Singular, top)?;
    // window [-4 (max t²V + M), 0), widened until nothing lies below it
    let mut lower = -4.0 * (pot.max_scaled() + pot.m_eff);
    let mut widen = 0;
    while solver.count_below(EigenKind::Singular, lower)? > 0 {
        widen += 1;
        if widen > 60 {
            return Err(Error::NotExhaustive);
        }
        lower *= 2.0;
    }
    let mut out = Vec::with_capacity(count);
    let mut lo = lower;
    for k in 1..=count {
        let nu = solver.eigenvalue(EigenKind::Singular, k, lo, top)?;
        let pair = solver.eigenpair(EigenKind::Singular, k, nu, &grid)?;
        certify(&pair, opts)?;
        lo = nu;
        out.push(pair);
    }
    check_increasing(&out)?;
    // monotone count: nothing else below zero
    if solver.count_below(EigenKind::Singular, top)? != out.len() {
        return Err(Error::SolverFault("zero count changed during enumeration".into()));
    }
    Ok(out)
}

/// Max of `|∫ w ψ_i ψ_j|` over distinct pairs (unit-normalized).
pub fn max_overlap(pot: &LinearizedPotential, pairs: &[EigenPair], opts: &SpectrumOptions) -> Result<f64> {
    // the overlap is a cancellation, so integrate a decade tighter
    let solver = SturmSolver::new(pot, opts.tightened(10.0));
    let mut worst = 0.0f64;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            worst = worst.max(solver.overlap(pairs[i].kind, pairs[i].value, pairs[j].value)?);
        }
    }
    Ok(worst)
}

/// Residual of `(t^{M-1}(ψ'ζ - ψζ'))' = -(M-1+ν̂) t^{M-3} ψ ζ` with
/// `ζ = v'`: finite-difference left side against the right side, max
/// defect over the grid divided by `(|M-1| + |ν̂|) max |t^{M-3} ψ ζ|`. `zeta` overrides
/// the profile derivative (used for negative controls).
pub fn wronskian_residual_with(
    pair: &EigenPair,
    m_eff: f64,
    nu_hat: f64,
    zeta: &dyn Fn(f64) -> (f64, f64),
    breaks: &[f64],
) -> f64 {
    let t = &pair.t;
    let n = t.len();
    let mut w = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut prod = vec![0.0; n];
    for i in 0..n {
        let ti = t[i];
        if ti == 0.0 {
            continue;
        }
        let (z, dz) = zeta(ti);
        w[i] = ti.powf(m_eff - 1.0) * (pair.dpsi[i] * z - pair.psi[i] * dz);
        prod[i] = ti.powf(m_eff - 3.0) * pair.psi[i] * z;
        rhs[i] = -(m_eff - 1.0 + nu_hat) * prod[i];
    }
    // smooth pieces between breaks
    let mut cut = vec![0usize];
    for &b in breaks {
        if let Some(i) = t.iter().position(|&x| x == b) {
            if i > 0 && i + 1 < n {
                cut.push(i);
            }
        }
    }
    cut.push(n - 1);
    cut.sort_unstable();
    cut.dedup();
    // Scale of the two contributions `(M-1) t^{M-3}ψζ` and `ν̂ t^{M-3}ψζ`
    // separately: their sum nearly cancels for the top negative eigenvalue.
    let weight = (m_eff - 1.0).abs() + nu_hat.abs();
    let rhs_max = prod.iter().fold(0.0f64, |m, x| m.max(x.abs())) * weight;
    let mut worst = 0.0f64;
    for seg in cut.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi - lo < 7 {
            continue;
        }
        for i in lo + 1..hi {
            // skip the first nodes next to the singular end
            if t[i] <= 1e-6 || i < 4 {
                continue;
            }
            let s = i.saturating_sub(3).max(lo).min(hi + 1 - 7);
            let wts = fd_weights(t[i], &t[s..s + 7], 1);
            let dw: f64 = (0..7).map(|k| wts[1][k] * w[s + k]).sum();
            worst = worst.max((dw - rhs[i]).abs());
        }
    }
    worst / rhs_max.max(f64::MIN_POSITIVE)
}

/// [`wronskian_residual_with`] using the profile behind the potential.
pub fn wronskian_residual(pair: &EigenPair, pot: &LinearizedPotential) -> Option<f64> {
    let profile = pot.profile()?;
    let breaks: Vec<f64> = profile.zeros.clone();
    let z = |t: f64| pot.zeta(t).unwrap();
    Some(wronskian_residual_with(pair, pot.m_eff, pair.value, &z, &breaks))
}

/// Spectral data for one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub m_eff: f64,
    pub classical: Vec<EigenPair>,
    pub singular: Vec<EigenPair>,
    pub classical_negative: usize,
    /// Set once the negative singular list is certified complete.
    pub exhaustive: bool,
}

impl SpectrumResult {
    pub fn singular_values(&self) -> Vec<f64> {
        self.singular.iter().map(|p| p.value).collect()
    }

    pub fn classical_values(&self) -> Vec<f64> {
        self.classical.iter().map(|p| p.value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_shifts_spectrum() {
        // V ≡ 3 moves every classical eigenvalue down by 3
        let m = 3.0;
        let zero = LinearizedPotential::zero(m);
        let three = LinearizedPotential::from_fn(m, Arc::new(|_| 3.0));
        let o = SpectrumOptions::default();
        let a = classical_spectrum(&zero, 3, &o).unwrap();
        let b = classical_spectrum(&three, 3, &o).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.value - 3.0 - y.value).abs() < 1e-9 * x.value.abs());
        }
        // M = 3: ν_k = (kπ)² exactly (J_{1/2} zeros)
        for (k, p) in a.iter().enumerate() {
            let exact = ((k + 1) as f64 * std::f64::consts::PI).powi(2);
            assert!((p.value - exact).abs() < 1e-9 * exact, "{} vs {}", p.value, exact);
            assert_eq!(p.nodal_count, k);
        }
    }

    #[test]
    fn frobenius_exponent_is_indicial_root() {
        for &m in &[2.0, 2.5, 3.0, 4.0] {
            for &nu in &[-0.3, -2.0, -17.0] {
                let g = frobenius_exponent(m, nu);
                assert!(g > 0.0);
                assert!((g * g + (m - 2.0) * g + nu).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_constant_potential_has_negative_values() {
        // V ≡ c gives the Bessel-type problem ψ'' + ψ'/t + (c + ν̂/t²)ψ = 0 at
        // M = 2 whose ν̂ = -μ² solves J_μ(√c) = 0.
        let c = 100.0;
        let pot = LinearizedPotential::from_fn(2.0, Arc::new(move |_| c));
        let sp = singular_spectrum_negative(&pot, &SpectrumOptions::default()).unwrap();
        assert!(!sp.is_empty());
        for p in &sp {
            assert!(p.value < 0.0);
            let mu = (-p.value).sqrt();
            let j = crate::bessel::bessel_j(mu, c.sqrt());
            assert!(j.abs() < 1e-7, "J_{mu}(10) = {j}");
        }
    }
}
