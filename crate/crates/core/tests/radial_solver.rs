use proptest::prelude::*;
use radmorse::numerics::hermite_cubic;
use radmorse::problem::{GeneralF, Nonlinearity, ProblemSpec};
use radmorse::profile::NodalProfile;
use radmorse::radial::*;

fn power_profile(n: u32, alpha: f64, p: f64, m: u32) -> (ProblemSpec, NodalProfile) {
    let spec = ProblemSpec::power(n, alpha, p, m).unwrap();
    let prof = solve_power_nodal(&spec, &spec.transformed(), &ShootOptions::default()).unwrap();
    (spec, prof)
}

/// Unnormalized residual with stencils kept inside smooth pieces.
fn raw_segmented(prof: &NodalProfile, p: f64) -> f64 {
    let g = |s: f64| s.abs().powf(p - 1.0) * s;
    let scale = prof.v.iter().fold(0.0f64, |acc, &x| acc.max(g(x).abs()));
    segmented_residual(prof, &g, &zero_nodes(prof)) * (1.0 + scale)
}

/// Classical fixed-step RK4 for `w'' + (M-1)/t w' + |w|^{p-1} w = 0` from a
/// fourth-order Taylor start, returning the first zero.
fn rk4_first_zero(m: f64, p: f64, h: f64) -> f64 {
    let g = |w: f64| w.abs().powf(p - 1.0) * w;
    let dg = |w: f64| p * w.abs().powf(p - 1.0);
    let rhs = |t: f64, y: [f64; 2]| [y[1], -(m - 1.0) / t * y[1] - g(y[0])];
    let w0 = 1.0;
    let a = -g(w0) / (2.0 * m);
    let b = -dg(w0) * a / (8.0 + 4.0 * m);
    let mut t = 1e-3;
    let mut y = [w0 + a * t * t + b * t.powi(4), 2.0 * a * t + 4.0 * b * t.powi(3)];
    loop {
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] <= 0.0 {
            let (mut lo, mut hi) = (t, t + h);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let v = hermite_cubic(t, t + h, y[0], next[0], y[1], next[1], mid).0;
                if v > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        y = next;
        t += h;
    }
}

#[test]
fn first_zero_matches_fixed_step_integrator() {
    let spec = ProblemSpec::power(2, 4.0, 5.0, 1).unwrap();
    let tp = spec.transformed();
    let tr = shoot(&spec, &tp, 1.0, 50.0, Some(1), &ShootOptions::default()).unwrap();
    let adaptive = tr.zeros()[0];
    let coarse = rk4_first_zero(tp.m_eff, 5.0, 2e-4);
    let fine = rk4_first_zero(tp.m_eff, 5.0, 1e-4);
    assert!((coarse - fine).abs() < 1e-9, "{coarse} {fine}");
    assert!((adaptive - fine).abs() <= 1e-8, "{adaptive} vs {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rescaling_preserves_the_equation(lambda in 0.3f64..4.0, which in 0usize..3) {
        let (n, alpha, p, m) = [(3, 0.0, 3.0, 2), (2, 4.0, 5.0, 3), (4, 2.0, 2.0, 2)][which];
        let (_, prof) = power_profile(n, alpha, p, m);
        let scaled = rescale_power_profile(&prof, lambda);
        // t^{M-1}-weighted residual of λ^a v(λt) is λ^{a+3-M} times the original
        let a = 2.0 / (p - 1.0);
        let factor = lambda.powf(a + 3.0 - prof.meta.m_eff);
        let g_scale = prof.v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs().powf(p)));
        let lhs = raw_segmented(&scaled, p) / factor;
        let rhs = raw_segmented(&prof, p) + 1e-12 * (1.0 + g_scale);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs:e} > {rhs:e}");
    }
}

#[test]
fn nehari_matches_shooting() {
    for (m, tol) in [(1u32, 1e-6), (3, 1e-4)] {
        let (pspec, prof) = power_profile(2, 4.0, 5.0, m);
        let gspec = ProblemSpec::new(2, 4.0, Nonlinearity::General(GeneralF::power(5.0)), m).unwrap();
        let gp = solve_nehari(&gspec, &gspec.transformed(), m, NehariOptions::default()).unwrap();
        // the general normalization keeps the coupling c: v = c^{1/(p-1)} w
        let c = pspec.transformed().coupling;
        let w0 = gp.v0() * c.powf(1.0 / 4.0);
        let rel = (w0 - prof.v0()).abs() / prof.v0();
        assert!(rel <= tol, "m={m}: {w0} vs {} ({rel:e})", prof.v0());
        assert_eq!(gp.zeros.len(), m as usize);
        assert!(gp.v0() > 0.0);
    }
}

#[test]
fn nehari_partition_is_stationary() {
    let spec = ProblemSpec::new(3, 1.0, Nonlinearity::General(GeneralF::power(3.0)), 2).unwrap();
    let solver = NehariSolver::new(&spec, &spec.transformed(), NehariOptions::default()).unwrap();
    let (partition, defects) = solver.descend(2).unwrap();
    assert!(defects.iter().all(|d| *d < 1e-6));
    let e0 = solver.glued_energy(&partition).unwrap();
    let h = 1e-4;
    for k in 0..partition.len() {
        for s in [-h, h] {
            let mut q = partition.clone();
            q[k] += s;
            let e = solver.glued_energy(&q).unwrap();
            assert!(e >= e0 - 1e-8, "moving t_{k} by {s} lowers the energy {e0} -> {e}");
        }
    }
    let glued = solver.glue(&spec, &partition, defects).unwrap();
    assert!(glued.v0() > 0.0);
    let mid = 0.5 * (partition[0] + 1.0);
    assert!(glued.eval(mid).0 < 0.0);
}

#[test]
fn m1_profile_has_no_interior_critical_points() {
    let (spec, prof) = power_profile(3, 2.0, 3.0, 1);
    assert!(prof.critical_points.is_empty());
    let rep = check_structure(&prof, &spec, 1e-6);
    assert!(rep.all_pass(), "{rep:?}");
    assert!(rep.energy_residual.unwrap() <= 1e-6);
}

#[test]
fn corrupted_profile_fails_structure_checks() {
    let (spec, mut prof) = power_profile(3, 0.0, 3.0, 2);
    let i = prof.t.iter().position(|&t| t > 0.5 * prof.zeros[0]).unwrap();
    prof.v[i] = -prof.v[i];
    let corrupted = NodalProfile::from_samples(prof.t.clone(), prof.v.clone(), prof.dv.clone(), prof.meta.clone(), None);
    let rep = check_structure(&corrupted, &spec, 1e-6);
    assert!(!rep.first_zone_monotone || !rep.critical_points_ok || !rep.zero_count_ok);
    assert!(!rep.all_pass());
}

#[test]
fn z_function_counts_and_signs() {
    for (n, alpha, p, m) in [(3, 0.0, 3.0, 3), (2, 6.0, 2.0, 4), (5, 6.0, 5.0, 2)] {
        let (_, prof) = power_profile(n, alpha, p, m);
        let z = z_function(&prof, p);
        assert_eq!(z.zeros.len(), m as usize);
        assert!((z.z0 - 2.0 * prof.v0() / (p - 1.0)).abs() < 1e-12 * prof.v0());
        assert!(z.z0_positive && z.alternation_ok && !z.ambiguous);
    }
}

#[test]
fn hardy_tail_is_cauchy() {
    for (n, alpha) in [(3, 0.0), (4, 2.0), (5, 6.0)] {
        let (_, prof) = power_profile(n, alpha, 2.0, 2);
        let delta = hardy_decay_exponent(&prof, &[1e-2, 5e-3, 2.5e-3, 1.25e-3]);
        assert!(delta > 0.0, "N={n} α={alpha}: δ = {delta}");
    }
}

#[test]
fn grid_refinement_converges() {
    let spec = ProblemSpec::power(4, 1.0, 3.0, 3).unwrap();
    let tp = spec.transformed();
    let base = ShootOptions::default();
    let mut fine = base;
    fine.rtol *= 0.5;
    fine.atol *= 0.5;
    let a = solve_power_nodal(&spec, &tp, &base).unwrap();
    let b = solve_power_nodal(&spec, &tp, &fine).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs();
    assert!(rel(a.v0(), b.v0()) <= 1e-6);
    for (x, y) in a.zeros.iter().zip(&b.zeros) {
        assert!(rel(*x, *y) <= 1e-6);
    }
    for (x, y) in a.extremal_values.iter().zip(&b.extremal_values) {
        assert!(rel(*x, *y) <= 1e-6);
    }
}

#[test]
fn non_odd_flag_uses_interleaved_ordering() {
    let (spec, prof) = power_profile(3, 0.0, 3.0, 4);
    // lift the last zone so that M_2 < M_3 < M_1: the strict chain breaks
    // while the interleaved chains M_0 > M_2 and M_1 > M_3 survive
    let e = &prof.extremal_values;
    let k = 0.5 * (e[1] + e[2]) / e[3];
    let v: Vec<f64> = prof.t.iter().zip(&prof.v).map(|(&t, &x)| if t > prof.zeros[2] { k * x } else { x }).collect();
    let dv: Vec<f64> = prof.t.iter().zip(&prof.dv).map(|(&t, &x)| if t > prof.zeros[2] { k * x } else { x }).collect();
    let mut meta = prof.meta.clone();
    let odd = NodalProfile::from_samples(prof.t.clone(), v.clone(), dv.clone(), meta.clone(), None);
    assert!(!check_structure(&odd, &spec, 1e-6).ordering_ok);
    meta.odd = false;
    let general = NodalProfile::from_samples(prof.t.clone(), v, dv, meta, None);
    assert!(check_structure(&general, &spec, 1e-6).ordering_ok);
}
