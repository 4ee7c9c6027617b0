//! Radial nodal solutions of the reduced equation
//! `w'' + (M-1)/t w' + g(w) = 0`, `w'(0) = 0`, and checks of their
//! qualitative structure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{brent, hermite_cumulative};
use crate::ode::{DenseStep, Dop853, Flow};
use crate::problem::{Nonlinearity, ProblemSpec, ScalarFn, TransformedProblem};
use crate::profile::{NodalProfile, Normalization, ProfileMeta, SolverInfo};

/// The reduced ODE: effective dimension and the nonlinearity `g` with the
/// coupling constant already applied.
#[derive(Clone)]
pub struct ReducedOde {
    pub m_eff: f64,
    pub g: ScalarFn,
    /// Primitive of `g` vanishing at 0, if known.
    pub big_g: Option<ScalarFn>,
}

impl ReducedOde {
    pub fn new(spec: &ProblemSpec, tp: &TransformedProblem) -> Self {
        let c = match tp.normalization {
            Normalization::PowerAbsorbed => 1.0,
            Normalization::GeneralF => tp.coupling,
        };
        let (g, big_g): (ScalarFn, Option<ScalarFn>) = match &spec.nonlinearity {
            Nonlinearity::PowerLaw { p } => {
                let p = *p;
                (
                    Arc::new(move |s: f64| c * s.abs().powf(p - 1.0) * s),
                    Some(Arc::new(move |s: f64| c * s.abs().powf(p + 1.0) / (p + 1.0))),
                )
            }
            Nonlinearity::General(gf) => {
                let f = gf.f.clone();
                let prim = gf.primitive.clone();
                (
                    Arc::new(move |s: f64| c * f(s)),
                    prim.map(|pf| -> ScalarFn { Arc::new(move |s: f64| c * pf(s)) }),
                )
            }
        };
        Self {
            m_eff: tp.m_eff,
            g,
            big_g,
        }
    }

    #[inline]
    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -(self.m_eff - 1.0) / t * y[1] - (self.g)(y[0])]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    pub rtol: f64,
    pub atol: f64,
    /// End of the Taylor start-up interval `[0, t_start]`.
    pub t_start: f64,
    pub overflow_guard: f64,
    /// Absolute tolerance of event localization in `t`.
    pub event_tol: f64,
    /// Grid nodes recorded per accepted step.
    pub samples_per_step: usize,
    pub max_steps: usize,
    /// Residual above which a power profile is refined and then rejected.
    pub residual_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            t_start: 1e-6,
            overflow_guard: 1e12,
            event_tol: 1e-13,
            samples_per_step: 8,
            max_steps: 500_000,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Sign change of `w`.
    Zero,
    /// Sign change of `w'`.
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootEvent {
    pub kind: EventKind,
    pub t: f64,
    pub w: f64,
    pub dw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub events: Vec<ShootEvent>,
    pub steps: usize,
    /// True when the requested number of zeros was reached.
    pub reached_target: bool,
}

impl Trajectory {
    pub fn zeros(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Zero)
            .map(|e| e.t)
            .collect()
    }

    pub fn critical_points(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Critical)
            .map(|e| e.t)
            .collect()
    }
}

/// Where a shot starts.
#[derive(Debug, Clone, Copy)]
enum Start {
    /// Regular centre: `w(0) = w0`, `w'(0) = 0`.
    Centre(f64),
    /// `w(a) = 0`, `w'(a) = d`.
    Zero { a: f64, d: f64 },
}

fn locate(step: &DenseStep<2>, comp: usize, a: f64, b: f64, tol: f64) -> Result<f64> {
    brent(|t| step.eval(t)[comp], a, b, tol, 200).ok_or(Error::EventLocalization(a))
}

/// Integrate from `start` until `stop_after` zeros were crossed or `t_max`.
fn run(
    ode: &ReducedOde,
    start: Start,
    t_max: f64,
    stop_after: Option<usize>,
    opts: &ShootOptions,
    record: bool,
) -> Result<Trajectory> {
    let (t0, y0, mut traj) = match start {
        Start::Centre(w0) => {
            let ts = opts.t_start;
            let g0 = (ode.g)(w0);
            let m = ode.m_eff;
            let y0 = [w0 - g0 * ts * ts / (2.0 * m), -g0 * ts / m];
            let traj = Trajectory {
                t: vec![0.0],
                w: vec![w0],
                dw: vec![0.0],
                events: Vec::new(),
                steps: 0,
                reached_target: false,
            };
            (ts, y0, traj)
        }
        Start::Zero { a, d } => (
            a,
            [0.0, d],
            Trajectory {
                t: vec![a],
                w: vec![0.0],
                dw: vec![d],
                events: Vec::new(),
                steps: 0,
                reached_target: false,
            },
        ),
    };
    let solver = Dop853 {
        rtol: opts.rtol,
        atol: opts.atol,
        max_steps: opts.max_steps,
        ..Dop853::default()
    };
    let k = opts.samples_per_step.max(1);
    let mut zeros = 0usize;
    let mut failure: Option<Error> = None;
    let mut prev = (t0, y0);

    let end = solver.integrate(
        |t, y| ode.rhs(t, y),
        t0,
        y0,
        t_max,
        |step| {
            let h = step.h();
            for s in 1..=k {
                let tt = if s == k { step.t1 } else { step.t0 + h * s as f64 / k as f64 };
                let y = if s == k { step.y1 } else { step.eval(tt) };
                if y[0].abs() > opts.overflow_guard {
                    failure = Some(Error::BlowUp {
                        t: tt,
                        zeros,
                        value: y[0].abs(),
                    });
                    return Flow::StopAt(tt);
                }
                // events inside (prev.0, tt], in time order
                let mut found: Vec<(f64, EventKind)> = Vec::new();
                if prev.1[0] * y[0] < 0.0 {
                    match locate(step, 0, prev.0, tt, opts.event_tol) {
                        Ok(tz) => found.push((tz, EventKind::Zero)),
                        Err(e) => {
                            failure = Some(e);
                            return Flow::StopAt(tt);
                        }
                    }
                }
                if prev.1[1] * y[1] < 0.0 {
                    match locate(step, 1, prev.0, tt, opts.event_tol) {
                        Ok(tc) => found.push((tc, EventKind::Critical)),
                        Err(e) => {
                            failure = Some(e);
                            return Flow::StopAt(tt);
                        }
                    }
                }
                found.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (te, kind) in found {
                    let ye = step.eval(te);
                    match kind {
                        EventKind::Zero => {
                            zeros += 1;
                            traj.events.push(ShootEvent {
                                kind,
                                t: te,
                                w: 0.0,
                                dw: ye[1],
                            });
                            // zeros are grid nodes so that smooth pieces can be told apart
                            if record && te > *traj.t.last().unwrap() && te < tt {
                                traj.t.push(te);
                                traj.w.push(0.0);
                                traj.dw.push(ye[1]);
                            }
                            if stop_after == Some(zeros) {
                                traj.reached_target = true;
                                return Flow::StopAt(te);
                            }
                        }
                        EventKind::Critical => traj.events.push(ShootEvent {
                            kind,
                            t: te,
                            w: ye[0],
                            dw: 0.0,
                        }),
                    }
                }
                if record {
                    traj.t.push(tt);
                    traj.w.push(y[0]);
                    traj.dw.push(y[1]);
                }
                prev = (tt, y);
            }
            Flow::Continue
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    traj.steps = end.steps;
    Ok(traj)
}

/// Shoot from `w(0) = initial_value`, `w'(0) = 0` up to `t_max`, recording
/// every sign change of `w` and `w'`. With `stop_after = Some(k)` the run
/// ends exactly at the `k`-th zero.
pub fn shoot(
    spec: &ProblemSpec,
    tp: &TransformedProblem,
    initial_value: f64,
    t_max: f64,
    stop_after: Option<usize>,
    opts: &ShootOptions,
) -> Result<Trajectory> {
    if initial_value == 0.0 || !initial_value.is_finite() {
        return Err(Error::Domain("initial value must be finite and nonzero".into()));
    }
    if !(t_max > opts.t_start) {
        return Err(Error::Domain(format!("t_max = {t_max} must exceed the start-up point")));
    }
    let ode = ReducedOde::new(spec, tp);
    run(&ode, Start::Centre(initial_value), t_max, stop_after, opts, true)
}

/// The `m`-nodal solution of the power problem with `v(0) > 0` and its last
/// zero at `t = 1`, obtained by shooting from `v(0) = 1` and rescaling.
pub fn solve_power_nodal(spec: &ProblemSpec, tp: &TransformedProblem, opts: &ShootOptions) -> Result<NodalProfile> {
    let p = spec
        .nonlinearity
        .exponent()
        .ok_or_else(|| Error::Domain("solve_power_nodal needs a power nonlinearity".into()))?;
    spec.validate()?;
    let mut o = *opts;
    let mut last_residual = f64::NAN;
    for _attempt in 0..2 {
        let prof = power_profile_once(spec, tp, p, &o)?;
        let res = prof.residual_norm.unwrap_or(f64::INFINITY);
        if res <= o.residual_tol {
            return Ok(prof);
        }
        last_residual = res;
        o.rtol *= 0.1;
        o.samples_per_step *= 2;
    }
    Err(Error::Residual {
        residual: last_residual,
        tolerance: opts.residual_tol,
    })
}

fn power_profile_once(spec: &ProblemSpec, tp: &TransformedProblem, p: f64, opts: &ShootOptions) -> Result<NodalProfile> {
    let m = spec.m as usize;
    let ode = ReducedOde::new(spec, tp);
    let t_max = 1e8;
    let traj = run(&ode, Start::Centre(1.0), t_max, Some(m), opts, true)?;
    if !traj.reached_target {
        return Err(Error::ZeroNotFound {
            wanted: m,
            found: traj.zeros().len(),
            t_reached: *traj.t.last().unwrap(),
        });
    }
    let lambda = *traj.zeros().last().unwrap();
    let a = 2.0 / (p - 1.0);
    let sv = lambda.powf(a);
    let sd = lambda.powf(a + 1.0);
    let n = traj.t.len();
    let mut t: Vec<f64> = traj.t.iter().map(|x| x / lambda).collect();
    t[n - 1] = 1.0;
    let v: Vec<f64> = traj.w.iter().map(|x| x * sv).collect();
    let dv: Vec<f64> = traj.dw.iter().map(|x| x * sd).collect();
    let mut zeros: Vec<f64> = traj.zeros().iter().map(|x| x / lambda).collect();
    zeros[m - 1] = 1.0;
    let crit: Vec<f64> = traj.critical_points().iter().map(|x| x / lambda).collect();
    let info = SolverInfo {
        method: "shooting".into(),
        rtol: opts.rtol,
        steps: traj.steps,
        rescale: Some(lambda),
        defects: Vec::new(),
    };
    let mut prof = NodalProfile::with_events(t, v, dv, zeros, crit, ProfileMeta::from_spec(spec), info);
    let g = |s: f64| s.abs().powf(p - 1.0) * s;
    let breaks = zero_nodes(&prof);
    prof.residual_norm = Some(segmented_residual(&prof, &g, &breaks));
    Ok(prof)
}

/// `v_λ(t) = λ^{2/(p-1)} v(λt)` sampled on `t_i/λ`.
pub fn rescale_power_profile(profile: &NodalProfile, lambda: f64) -> NodalProfile {
    let p = profile.meta.p.expect("power profile");
    let a = 2.0 / (p - 1.0);
    let sv = lambda.powf(a);
    let sd = lambda.powf(a + 1.0);
    let mut out = profile.clone();
    out.t = profile.t.iter().map(|x| x / lambda).collect();
    out.v = profile.v.iter().map(|x| x * sv).collect();
    out.dv = profile.dv.iter().map(|x| x * sd).collect();
    out.zeros = profile.zeros.iter().map(|x| x / lambda).collect();
    out.critical_points = profile.critical_points.iter().map(|x| x / lambda).collect();
    out.extremal_values = profile.extremal_values.iter().map(|x| x * sv).collect();
    out.residual_norm = None;
    out
}

#[derive(Debug, Clone, Copy)]
pub struct NehariOptions {
    pub shoot: ShootOptions,
    /// Relative derivative-matching tolerance at partition points.
    pub defect_tol: f64,
    pub max_sweeps: usize,
}

impl Default for NehariOptions {
    fn default() -> Self {
        Self {
            shoot: ShootOptions::default(),
            defect_tol: 1e-6,
            max_sweeps: 200,
        }
    }
}

/// One-signed solution on `(a, b)` found by shooting, with its energy.
#[derive(Debug, Clone)]
struct Piece {
    dw_left: f64,
    dw_right: f64,
    energy: f64,
}

/// Solver for the nested minimization over partitions.
pub struct NehariSolver {
    ode: ReducedOde,
    big_g: ScalarFn,
    opts: NehariOptions,
    search: ShootOptions,
}

impl NehariSolver {
    pub fn new(spec: &ProblemSpec, tp: &TransformedProblem, opts: NehariOptions) -> Result<Self> {
        if !spec.nonlinearity.is_odd() {
            return Err(Error::Domain("Nehari construction needs an odd nonlinearity".into()));
        }
        let ode = ReducedOde::new(spec, tp);
        for s in [1e-3, 1e-1, 1.0, 10.0, 1e3] {
            if !((ode.g)(s) * s > 0.0) {
                return Err(Error::Domain(format!("f(s)/s > 0 fails at s = {s}")));
            }
        }
        let big_g = ode
            .big_g
            .clone()
            .ok_or_else(|| Error::Domain("Nehari energies need the primitive of f".into()))?;
        let search = ShootOptions {
            samples_per_step: 1,
            ..opts.shoot
        };
        Ok(Self {
            ode,
            big_g,
            opts,
            search,
        })
    }

    fn start(&self, a: f64, sign: f64, param: f64) -> Start {
        if a == 0.0 {
            Start::Centre(sign * param)
        } else {
            Start::Zero { a, d: sign * param }
        }
    }

    /// First zero after `a` of the shot with parameter `param`, or infinity.
    fn first_zero(&self, a: f64, b: f64, sign: f64, param: f64) -> Result<f64> {
        let cap = a + 4.0 * (b - a);
        match run(&self.ode, self.start(a, sign, param), cap, Some(1), &self.search, false) {
            Ok(tr) if tr.reached_target => Ok(tr.zeros()[0]),
            Ok(_) => Ok(f64::INFINITY),
            Err(Error::BlowUp { .. }) => Ok(a),
            Err(e) => Err(e),
        }
    }

    fn inner_param(&self, a: f64, b: f64, sign: f64) -> Result<f64> {
        let fail = |reason: String| Error::InnerSolve { a, b, reason };
        // larger amplitude means an earlier first zero
        let phi = |lp: f64| -> Result<f64> {
            let z = self.first_zero(a, b, sign, lp.exp())?;
            Ok(if z.is_finite() { (z - b) / (b - a) } else { 10.0 })
        };
        let mut lo = 0.0f64;
        let mut flo = phi(lo)?;
        let mut hi = lo;
        let mut fhi = flo;
        let mut tries = 0;
        while flo * fhi > 0.0 {
            tries += 1;
            if tries > 200 {
                return Err(fail("no bracket for the shooting parameter".into()));
            }
            if flo > 0.0 {
                lo = hi;
                flo = fhi;
                hi = lo + 1.0;
                fhi = phi(hi)?;
                if fhi > 0.0 {
                    lo = hi;
                    flo = fhi;
                }
            } else {
                hi = lo;
                fhi = flo;
                lo = hi - 1.0;
                flo = phi(lo)?;
                if flo < 0.0 {
                    hi = lo;
                    fhi = flo;
                }
            }
        }
        let mut err = None;
        let root = brent(
            |x| match phi(x) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            1e-15,
            300,
        );
        if let Some(e) = err {
            return Err(fail(e.to_string()));
        }
        root.map(f64::exp).ok_or_else(|| fail("bracket lost".into()))
    }

    /// Solve on `(a, b)` and integrate the energy
    /// `∫ t^{M-1} (w'^2/2 - G(w))`.
    fn piece(&self, a: f64, b: f64, sign: f64) -> Result<Piece> {
        let param = self.inner_param(a, b, sign)?;
        let m = self.ode.m_eff;
        let (t0, y0) = match self.start(a, sign, param) {
            Start::Centre(w0) => {
                let ts = self.opts.shoot.t_start;
                let g0 = (self.ode.g)(w0);
                (ts, [w0 - g0 * ts * ts / (2.0 * m), -g0 * ts / m, -(self.big_g)(w0) * ts.powf(m) / m])
            }
            Start::Zero { a, d } => (a, [0.0, d, 0.0]),
        };
        let solver = Dop853 {
            rtol: self.opts.shoot.rtol,
            atol: self.opts.shoot.atol,
            max_steps: self.opts.shoot.max_steps,
            ..Dop853::default()
        };
        let g = &self.ode.g;
        let big_g = &self.big_g;
        let end = solver.integrate(
            |t, y: &[f64; 3]| {
                let tm = t.powf(m - 1.0);
                [
                    y[1],
                    -(m - 1.0) / t * y[1] - g(y[0]),
                    tm * (0.5 * y[1] * y[1] - big_g(y[0])),
                ]
            },
            t0,
            y0,
            b,
            |_| Flow::Continue,
        )?;
        Ok(Piece {
            dw_left: if a == 0.0 { 0.0 } else { sign * param },
            dw_right: end.y[1],
            energy: end.y[2],
        })
    }

    fn sign_of_zone(i: usize) -> f64 {
        if i.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    fn bounds(partition: &[f64], i: usize) -> (f64, f64) {
        let a = if i == 0 { 0.0 } else { partition[i - 1] };
        let b = if i == partition.len() { 1.0 } else { partition[i] };
        (a, b)
    }

    /// Glued energy of a partition `0 < t_1 < ... < t_{m-1} < 1`.
    pub fn glued_energy(&self, partition: &[f64]) -> Result<f64> {
        let mut e = 0.0;
        for i in 0..=partition.len() {
            let (a, b) = Self::bounds(partition, i);
            e += self.piece(a, b, Self::sign_of_zone(i))?.energy;
        }
        Ok(e)
    }

    /// Derivative of the glued energy in `t_i` (index into partition):
    /// `t^{M-1} (w_R'^2 - w_L'^2) / 2`, plus the relative defect.
    fn partition_derivative(&self, partition: &[f64], k: usize) -> Result<(f64, f64)> {
        let (a, b) = Self::bounds(partition, k);
        let left = self.piece(a, b, Self::sign_of_zone(k))?;
        let (c, d) = Self::bounds(partition, k + 1);
        let right = self.piece(c, d, Self::sign_of_zone(k + 1))?;
        let t = partition[k];
        let (l, r) = (left.dw_right, right.dw_left);
        let deriv = 0.5 * t.powf(self.ode.m_eff - 1.0) * (r * r - l * l);
        let defect = (l - r).abs() / l.abs().max(r.abs());
        Ok((deriv, defect))
    }

    /// Energy of the two pieces adjacent to `t_k` when it is moved to `x`.
    fn local_energy(&self, partition: &[f64], k: usize, x: f64) -> Result<f64> {
        let mut p = partition.to_vec();
        p[k] = x;
        let (a, b) = Self::bounds(&p, k);
        let (c, d) = Self::bounds(&p, k + 1);
        Ok(self.piece(a, b, Self::sign_of_zone(k))?.energy + self.piece(c, d, Self::sign_of_zone(k + 1))?.energy)
    }

    fn minimize_coordinate(&self, partition: &mut [f64], k: usize) -> Result<()> {
        let lo = if k == 0 { 0.0 } else { partition[k - 1] };
        let hi = if k + 1 == partition.len() { 1.0 } else { partition[k + 1] };
        let width = hi - lo;
        // golden section on a window around the current point
        let cur = partition[k];
        let half = 0.25 * width;
        let mut a = (cur - half).max(lo + 1e-3 * width);
        let mut b = (cur + half).min(hi - 1e-3 * width);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - gr * (b - a);
        let mut x2 = a + gr * (b - a);
        let mut f1 = self.local_energy(partition, k, x1)?;
        let mut f2 = self.local_energy(partition, k, x2)?;
        while b - a > 1e-3 * width {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = self.local_energy(partition, k, x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = self.local_energy(partition, k, x2)?;
            }
        }
        // polish with the exact derivative when the window brackets its root
        let mut err = None;
        let mut deriv = |x: f64| {
            let mut p = partition.to_vec();
            p[k] = x;
            match self.partition_derivative(&p, k) {
                Ok((d, _)) => d,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        };
        let (da, db) = (deriv(a), deriv(b));
        if da < 0.0 && db > 0.0 {
            if let Some(x) = brent(&mut deriv, a, b, 1e-14, 200) {
                partition[k] = x;
            }
        } else {
            partition[k] = 0.5 * (a + b);
        }
        if let Some(e) = err {
            return Err(e);
        }
        Ok(())
    }

    /// Outer cyclic coordinate descent; returns the converged partition and
    /// its relative derivative defects.
    pub fn descend(&self, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut partition: Vec<f64> = (1..m).map(|i| i as f64 / m as f64).collect();
        if m == 1 {
            return Ok((partition, Vec::new()));
        }
        let mut defects = vec![f64::INFINITY; m - 1];
        for _sweep in 0..self.opts.max_sweeps {
            for k in 0..m - 1 {
                self.minimize_coordinate(&mut partition, k)?;
            }
            for (k, d) in defects.iter_mut().enumerate() {
                *d = self.partition_derivative(&partition, k)?.1;
            }
            if defects.iter().all(|d| *d < self.opts.defect_tol) {
                return Ok((partition, defects));
            }
        }
        Err(Error::DescentStalled { partition, defects })
    }

    /// Glue the piecewise solutions into a profile.
    pub fn glue(&self, spec: &ProblemSpec, partition: &[f64], defects: Vec<f64>) -> Result<NodalProfile> {
        let m = partition.len() + 1;
        let mut t = Vec::new();
        let mut v = Vec::new();
        let mut dv = Vec::new();
        let mut crit = Vec::new();
        let mut glue_nodes = Vec::new();
        let mut steps = 0;
        for i in 0..m {
            let (a, b) = Self::bounds(partition, i);
            let sign = Self::sign_of_zone(i);
            let param = self.inner_param(a, b, sign)?;
            let tr = run(&self.ode, self.start(a, sign, param), a + 4.0 * (b - a), Some(1), &self.opts.shoot, true)?;
            steps += tr.steps;
            crit.extend(tr.critical_points());
            let n = tr.t.len();
            if i == 0 {
                t.extend_from_slice(&tr.t[..n - 1]);
                v.extend_from_slice(&tr.w[..n - 1]);
                dv.extend_from_slice(&tr.dw[..n - 1]);
            } else {
                // the shared node carries the average of both one-sided slopes
                let last = dv.len() - 1;
                dv[last] = 0.5 * (dv[last] + tr.dw[0]);
                glue_nodes.push(last);
                t.extend_from_slice(&tr.t[1..n - 1]);
                v.extend_from_slice(&tr.w[1..n - 1]);
                dv.extend_from_slice(&tr.dw[1..n - 1]);
            }
            // the zone ends exactly at its partition point
            t.push(b);
            v.push(0.0);
            dv.push(tr.dw[n - 1]);
        }
        let mut zeros: Vec<f64> = partition.to_vec();
        zeros.push(1.0);
        let info = SolverInfo {
            method: "nehari".into(),
            rtol: self.opts.shoot.rtol,
            steps,
            rescale: None,
            defects,
        };
        let mut prof = NodalProfile::with_events(t, v, dv, zeros, crit, ProfileMeta::from_spec(spec), info);
        let g = self.ode.g.clone();
        prof.residual_norm = Some(segmented_residual(&prof, &*g, &glue_nodes));
        Ok(prof)
    }
}

/// Indices of interior grid nodes sitting exactly on a zero of the profile.
/// `f(v)` may lose smoothness there (e.g. `|v|^{p-1}v` with small `p`).
pub fn zero_nodes(prof: &NodalProfile) -> Vec<usize> {
    let n = prof.t.len();
    (1..n - 1).filter(|&i| prof.v[i] == 0.0).collect()
}

/// Normalized ODE residual with finite-difference stencils kept inside the
/// smooth pieces delimited by `breaks` (glue nodes are skipped).
pub fn segmented_residual(prof: &NodalProfile, g: &dyn Fn(f64) -> f64, breaks: &[usize]) -> f64 {
    let n = prof.t.len();
    let mut bounds = vec![0usize];
    bounds.extend_from_slice(breaks);
    bounds.push(n - 1);
    let mut worst = 0.0f64;
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 7 {
            continue;
        }
        let sub = NodalProfile {
            t: prof.t[lo..=hi].to_vec(),
            v: prof.v[lo..=hi].to_vec(),
            dv: prof.dv[lo..=hi].to_vec(),
            zeros: Vec::new(),
            critical_points: Vec::new(),
            extremal_values: Vec::new(),
            meta: prof.meta.clone(),
            residual_norm: None,
            info: SolverInfo::default(),
        };
        worst = worst.max(sub.raw_residual(g));
    }
    let scale = prof.v.iter().fold(0.0f64, |acc, &x| acc.max(g(x).abs()));
    worst / (1.0 + scale)
}

/// Nodal solution of an odd nonlinearity with `f(s)/s > 0` by minimizing the
/// glued energy over partitions of `[0, 1]`.
pub fn solve_nehari(spec: &ProblemSpec, tp: &TransformedProblem, m: u32, opts: NehariOptions) -> Result<NodalProfile> {
    if m < 1 {
        return Err(Error::Domain("m must be >= 1".into()));
    }
    let solver = NehariSolver::new(spec, tp, opts)?;
    let (partition, defects) = solver.descend(m as usize)?;
    let mut s = spec.clone();
    s.m = m;
    solver.glue(&s, &partition, defects)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub zero_count: usize,
    pub zero_count_ok: bool,
    pub sign_convention_ok: bool,
    pub first_zone_monotone: bool,
    /// Critical points counted in each interior nodal zone.
    pub critical_counts: Vec<usize>,
    pub critical_points_ok: bool,
    pub extremal_values: Vec<f64>,
    pub ordering_ok: bool,
    /// `None` when no primitive is available.
    pub energy_residual: Option<f64>,
    pub energy_ok: bool,
}

impl StructureReport {
    pub fn all_pass(&self) -> bool {
        self.zero_count_ok
            && self.sign_convention_ok
            && self.first_zone_monotone
            && self.critical_points_ok
            && self.ordering_ok
            && self.energy_ok
    }
}

/// Sample-level nodal zones: index ranges of constant sign.
fn sample_zones(prof: &NodalProfile) -> Vec<(usize, usize)> {
    let n = prof.v.len();
    let mut zones = Vec::new();
    let mut start = 0;
    let mut sign = prof.v[0].signum();
    for i in 1..n {
        let s = prof.v[i];
        if s == 0.0 {
            continue;
        }
        if s.signum() != sign {
            zones.push((start, i - 1));
            start = i;
            sign = s.signum();
        }
    }
    zones.push((start, n - 1));
    zones
}

/// Verify the qualitative structure of a nodal profile.
pub fn check_structure(profile: &NodalProfile, spec: &ProblemSpec, tol_energy: f64) -> StructureReport {
    let tp = spec.transformed();
    let ode = ReducedOde::new(spec, &tp);
    let n = profile.len();
    let v = &profile.v;
    let dv = &profile.dv;
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tiny = 1e-12 * scale;

    let zones = sample_zones(profile);
    let zero_count = zones.len() - 1 + usize::from(v[n - 1].abs() <= tiny);
    let zero_count_ok = zero_count == spec.m as usize;
    let sign_convention_ok = v[0] > 0.0 && v[n - 1].abs() <= tiny && dv[0].abs() <= 1e-12 * (1.0 + scale);

    // first zone: strictly decreasing samples and negative slopes
    let (_, end0) = zones[0];
    let mut first_zone_monotone = true;
    for i in 0..end0.min(n - 1) {
        if !(v[i + 1] < v[i]) || (i > 0 && !(dv[i] < 0.0)) {
            first_zone_monotone = false;
        }
    }

    // one critical point per interior zone, seen both in the slope samples
    // and in the sampled differences
    let mut critical_counts = Vec::new();
    for &(s, e) in zones.iter().skip(1) {
        let mut slope_changes = 0;
        let mut diff_changes = 0;
        for i in s..e {
            if dv[i] * dv[i + 1] < 0.0 {
                slope_changes += 1;
            }
        }
        let lo = s.saturating_sub(1);
        let hi = (e + 1).min(n - 1);
        let diffs: Vec<f64> = (lo..hi).map(|i| v[i + 1] - v[i]).filter(|d| *d != 0.0).collect();
        for w in diffs.windows(2) {
            if w[0] * w[1] < 0.0 {
                diff_changes += 1;
            }
        }
        critical_counts.push(slope_changes.max(diff_changes));
    }
    let critical_points_ok = critical_counts.iter().all(|&c| c == 1);

    let mut extremal_values: Vec<f64> = zones
        .iter()
        .map(|&(s, e)| v[s..=e].iter().fold(0.0f64, |a, x| a.max(x.abs())))
        .collect();
    if v[n - 1].abs() <= tiny && zones.len() > 1 {
        let last = zones[zones.len() - 1];
        if last.0 == last.1 {
            extremal_values.pop();
        }
    }
    let ordering_ok = if profile.meta.odd {
        extremal_values.windows(2).all(|w| w[0] > w[1]) && extremal_values.iter().all(|&x| x <= extremal_values[0])
    } else {
        let even_ok = extremal_values.iter().step_by(2).collect::<Vec<_>>().windows(2).all(|w| w[0] > w[1]);
        let odd_ok = extremal_values.iter().skip(1).step_by(2).collect::<Vec<_>>().windows(2).all(|w| w[0] > w[1]);
        even_ok && odd_ok && extremal_values.iter().all(|&x| x <= extremal_values[0])
    };

    let energy_residual = ode.big_g.as_ref().map(|big_g| energy_identity_residual(profile, &ode, &**big_g));
    let energy_ok = energy_residual.is_none_or(|r| r <= tol_energy);

    StructureReport {
        zero_count,
        zero_count_ok,
        sign_convention_ok,
        first_zone_monotone,
        critical_counts,
        critical_points_ok,
        extremal_values,
        ordering_ok,
        energy_residual,
        energy_ok,
    }
}

/// Max over the grid of `|½v'^2 + (M-1)∫_0^t v'^2/s ds - (G(v(0)) - G(v))|`
/// divided by `G(v(0))`.
pub fn energy_identity_residual(profile: &NodalProfile, ode: &ReducedOde, big_g: &dyn Fn(f64) -> f64) -> f64 {
    let m = ode.m_eff;
    let t = &profile.t;
    let v = &profile.v;
    let dv = &profile.dv;
    let n = t.len();
    let g = &ode.g;
    let g0 = g(v[0]);
    let mut q = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    for i in 0..n {
        if t[i] == 0.0 {
            q.push(0.0);
            dq.push(g0 * g0 / (m * m));
        } else {
            let s = t[i];
            let d2 = -(m - 1.0) / s * dv[i] - g(v[i]);
            q.push(dv[i] * dv[i] / s);
            dq.push(2.0 * dv[i] * d2 / s - dv[i] * dv[i] / (s * s));
        }
    }
    let cum = hermite_cumulative(t, &q, &dq);
    let e0 = big_g(v[0]);
    let mut worst = 0.0f64;
    for i in 0..n {
        let lhs = 0.5 * dv[i] * dv[i] + (m - 1.0) * cum[i];
        let rhs = e0 - big_g(v[i]);
        worst = worst.max((lhs - rhs).abs());
    }
    worst / e0.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZReport {
    /// `z = t v' + 2v/(p-1)` on the profile grid.
    pub z: Vec<f64>,
    pub zeros: Vec<f64>,
    pub z0: f64,
    pub z0_positive: bool,
    /// `(-1)^i z(t_i) > 0` at every zero `t_i` of `v`.
    pub alternation_ok: bool,
    /// Set when `|z|` sits below the noise floor on consecutive nodes.
    pub ambiguous: bool,
}

pub fn z_function(profile: &NodalProfile, p: f64) -> ZReport {
    let a = 2.0 / (p - 1.0);
    let t = &profile.t;
    let n = t.len();
    let z: Vec<f64> = (0..n).map(|i| t[i] * profile.dv[i] + a * profile.v[i]).collect();
    let zmax = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-12 * zmax;
    let mut ambiguous = false;
    let mut zeros = Vec::new();
    let zf = |x: f64| {
        let (v, d) = profile.eval(x);
        x * d + a * v
    };
    let mut last_sign = z[0].signum();
    let mut last_idx = 0usize;
    for i in 1..n - 1 {
        if z[i].abs() <= floor {
            if z[i - 1].abs() <= floor {
                ambiguous = true;
            }
            continue;
        }
        let s = z[i].signum();
        if s != last_sign {
            let root = brent(zf, t[last_idx], t[i], 1e-14, 200).unwrap_or(0.5 * (t[last_idx] + t[i]));
            zeros.push(root);
            last_sign = s;
        }
        last_idx = i;
    }
    // a sign change between the last interior node and t = 1
    if z[n - 1].abs() > floor && z[n - 1].signum() != last_sign {
        let root = brent(zf, t[last_idx], t[n - 1], 1e-14, 200).unwrap_or(t[last_idx]);
        if root < 1.0 {
            zeros.push(root);
        }
    }
    let z0 = z[0];
    let alternation_ok = profile.zeros.iter().enumerate().all(|(i, &tz)| {
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        sign * zf(tz) > 0.0
    });
    ZReport {
        z,
        zeros,
        z0,
        z0_positive: z0 > 0.0,
        alternation_ok,
        ambiguous,
    }
}

/// `Q(ε) = ∫_ε^1 t^{M-3} v'(t)^2 dt`, by 8-point Gauss-Legendre on each grid
/// interval of the Hermite interpolant.
pub fn hardy_tail(profile: &NodalProfile, eps: f64) -> f64 {
    let m = profile.meta.m_eff;
    let f = |t: f64| {
        let d = profile.eval(t).1;
        t.powf(m - 3.0) * d * d
    };
    let mut edges: Vec<f64> = vec![eps];
    edges.extend(profile.t.iter().copied().filter(|&x| x > eps));
    let mut s = 0.0;
    for w in edges.windows(2) {
        s += gauss_legendre(&f, w[0], w[1]);
    }
    s
}

const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        s += GL_W[k] * (f(c - h * GL_X[k]) + f(c + h * GL_X[k]));
    }
    s * h
}

/// Fit `|Q(ε) - Q(ε/2)| ≈ C ε^δ` over `eps` by least squares in log-log and
/// return `δ`.
pub fn hardy_decay_exponent(profile: &NodalProfile, eps: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let d = (hardy_tail(profile, e) - hardy_tail(profile, 0.5 * e)).abs();
            (e.ln(), d.max(f64::MIN_POSITIVE).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::GeneralF;

    #[test]
    fn zero_nonlinearity_keeps_initial_value() {
        let spec = ProblemSpec::new(3, 0.0, Nonlinearity::General(GeneralF::zero()), 1).unwrap();
        let tp = spec.transformed();
        let tr = shoot(&spec, &tp, 0.7, 5.0, None, &ShootOptions::default()).unwrap();
        assert!(tr.events.is_empty());
        assert!(tr.w.iter().all(|&w| w == 0.7));
    }

    #[test]
    fn curvature_at_centre_is_negative() {
        let spec = ProblemSpec::power(3, 0.0, 3.0, 1).unwrap();
        let tp = spec.transformed();
        let tr = shoot(&spec, &tp, 1.0, 10.0, Some(1), &ShootOptions::default()).unwrap();
        // w(t) - w(0) ~ w''(0) t^2 / 2 near the centre
        assert!(tr.w[1] < tr.w[0]);
        let first = tr.zeros()[0];
        for i in 0..tr.t.len() - 1 {
            if tr.t[i + 1] <= first {
                assert!(tr.w[i + 1] < tr.w[i]);
            }
        }
    }

    #[test]
    fn power_profile_structure() {
        let spec = ProblemSpec::power(3, 0.0, 3.0, 2).unwrap();
        let tp = spec.transformed();
        let prof = solve_power_nodal(&spec, &tp, &ShootOptions::default()).unwrap();
        assert_eq!(prof.zeros.len(), 2);
        assert_eq!(prof.critical_points.len(), 1);
        assert!(prof.extremal_values[0] > prof.extremal_values[1]);
        assert!(prof.residual_norm.unwrap() <= 1e-8);
        let rep = check_structure(&prof, &spec, 1e-6);
        assert!(rep.all_pass(), "{rep:?}");
        let z = z_function(&prof, 3.0);
        assert_eq!(z.zeros.len(), 2);
        assert!(z.z0_positive && z.alternation_ok && !z.ambiguous);
    }
}
