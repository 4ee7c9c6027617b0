use proptest::prelude::*;
use radmorse::morse::{self, assemble, j_threshold, lambda_hat, scale_factor};
use radmorse::problem::*;
use radmorse::profile::NodalProfile;
use radmorse::radial::{solve_power_nodal, ShootOptions};

/// `C(n, k)` by the multiplicative formula in 128-bit integers.
fn binom(n: i64, k: i64) -> i128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn profile(n: u32, alpha: f64, p: f64, m: u32) -> (ProblemSpec, NodalProfile) {
    let spec = ProblemSpec::power(n, alpha, p, m).unwrap();
    let prof = solve_power_nodal(&spec, &spec.transformed(), &ShootOptions::default()).unwrap();
    (spec, prof)
}

proptest! {
    #[test]
    fn multiplicity_is_harmonic_polynomial_dimension(n in 2u32..=10, j in 0u32..=20) {
        let mode = spherical_mode(n, j).unwrap();
        let (n, j) = (n as i64, j as i64);
        prop_assert_eq!(mode.multiplicity as i128, binom(n + j - 1, j) - binom(n + j - 3, j - 2));
        prop_assert_eq!(mode.lambda as i64, j * (n - 2 + j));
    }

    #[test]
    fn effective_dimension_range_and_monotonicity(n in 2u32..=12, a in 0.0f64..50.0, da in 1e-3f64..10.0) {
        let m1 = compute_m(n, a).unwrap();
        let m2 = compute_m(n, a + da).unwrap();
        prop_assert!((2.0..=n as f64).contains(&m1));
        if n >= 3 {
            prop_assert!(m2 < m1);
        } else {
            prop_assert_eq!(m1, 2.0);
        }
        // Hardy threshold transported by the scale factor
        let lhs = (scale_factor(a) * 0.5 * (m1 - 2.0)).powi(2);
        let rhs = (0.5 * (n as f64 - 2.0)).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn ceiling_matches_negative_set(
        n in 2u32..=6,
        alpha in 0.0f64..12.0,
        raw in prop::collection::vec(-80.0f64..-1e-3, 0..5),
    ) {
        let spec = ProblemSpec::power(n, alpha, 1.5, 1).unwrap();
        let tp = spec.transformed();
        let mut nu = raw;
        nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rep = assemble(&spec, &tp, &nu, true).unwrap();
        prop_assert!(rep.ceiling_consistent(64).unwrap());
        prop_assert_eq!(rep.mode_count(), rep.morse_index);
        prop_assert_eq!(rep.m_rad, nu.len());
        for w in rep.j_values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for (i, &j) in rep.j_values.iter().enumerate() {
            prop_assert!(j > 0.0);
            // Λ̂^rad below the transported Hardy threshold
            let rad = lambda_hat(alpha, nu[i], 0.0);
            prop_assert!(rad < (0.5 * (n as f64 - 2.0)).powi(2));
        }
        for mode in &rep.modes {
            prop_assert!(mode.lambda_hat < 0.0);
        }
    }

    #[test]
    fn threshold_identity_at_minus_m_minus_1(n in 2u32..=9, alpha in 0.0f64..20.0) {
        let m = compute_m(n, alpha).unwrap();
        let j = j_threshold(alpha, m, -(m - 1.0));
        prop_assert!((j - scale_factor(alpha)).abs() <= 1e-12 * scale_factor(alpha));
    }
}

#[test]
fn alpha_zero_reduction() {
    for (n, p, m) in [(3u32, 3.0, 2u32), (4, 2.0, 3), (5, 2.0, 2), (2, 3.0, 4)] {
        let (spec, prof) = profile(n, 0.0, p, m);
        let pot = radmorse::spectrum::LinearizedPotential::from_profile(&prof, &spec);
        let sing = radmorse::spectrum::singular_spectrum_negative(&pot, &Default::default()).unwrap();
        let nu: Vec<f64> = sing.iter().map(|e| e.value).collect();
        let rep = assemble(&spec, &spec.transformed(), &nu, true).unwrap();
        let (diff, direct) = morse::alpha_zero_check(&rep).unwrap();
        assert!(diff <= 1e-10, "N={n}: J discrepancy {diff:e}");
        assert_eq!(direct, rep.morse_index);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transform_round_trip(which in 0usize..4, alpha in 0.0f64..8.0) {
        let (n, p, m) = [(3u32, 3.0, 2u32), (2, 5.0, 3), (4, 2.0, 1), (5, 2.0, 2)][which];
        let Ok(spec) = ProblemSpec::power(n, alpha, p, m) else { return Ok(()) };
        let prof = solve_power_nodal(&spec, &spec.transformed(), &ShootOptions::default()).unwrap();
        let back = transform_forward(&transform_inverse(&prof, &spec), &spec).unwrap();
        let vs = prof.v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let ds = prof.dv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..prof.t.len() {
            prop_assert!((back.t[i] - prof.t[i]).abs() <= 1e-14 * prof.t[i].max(1e-300) + 1e-300);
            prop_assert!((back.v[i] - prof.v[i]).abs() <= 1e-14 * vs);
            prop_assert!((back.dv[i] - prof.dv[i]).abs() <= 1e-13 * ds);
        }
        // zeros map in order through r = t^{2/(2+α)}
        let r = transform_inverse(&prof, &spec);
        let u = NodalProfile::from_samples(r.r.clone(), r.u.clone(), r.du.clone(), prof.meta.clone(), None);
        prop_assert_eq!(u.zeros.len(), prof.zeros.len());
        for (ru, tz) in u.zeros.iter().zip(&prof.zeros) {
            prop_assert!((ru - t_to_r(*tz, alpha)).abs() <= 1e-9);
        }
    }
}
