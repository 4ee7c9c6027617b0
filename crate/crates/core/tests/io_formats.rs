use radmorse::io::{read_profile, write_profile};
use radmorse::problem::{GeneralF, Nonlinearity, ProblemSpec};
use radmorse::radial::{solve_nehari, solve_power_nodal, NehariOptions, ShootOptions};

#[test]
fn power_profile_round_trips_exactly() {
    let spec = ProblemSpec::power(3, 2.0, 3.0, 3).unwrap();
    let prof = solve_power_nodal(&spec, &spec.transformed(), &ShootOptions::default()).unwrap();
    let text = write_profile(&prof);
    let back = read_profile(&text).unwrap();
    assert_eq!(back, prof);
    assert_eq!(write_profile(&back), text);
}

#[test]
fn glued_profile_round_trips_exactly() {
    let spec = ProblemSpec::new(2, 1.0, Nonlinearity::General(GeneralF::power(3.0)), 2).unwrap();
    let prof = solve_nehari(&spec, &spec.transformed(), 2, NehariOptions::default()).unwrap();
    let back = read_profile(&write_profile(&prof)).unwrap();
    assert_eq!(back, prof);
}

#[test]
fn malformed_profiles_are_rejected() {
    assert!(read_profile("").is_err());
    assert!(read_profile("# radmorse-spectrum v1\nt v dv\n").is_err());
    let spec = ProblemSpec::power(2, 0.0, 3.0, 1).unwrap();
    let prof = solve_power_nodal(&spec, &spec.transformed(), &ShootOptions::default()).unwrap();
    let text = write_profile(&prof);
    let broken = text.replacen("0e0 ", "zz ", 1);
    assert!(read_profile(&broken).is_err());
}
