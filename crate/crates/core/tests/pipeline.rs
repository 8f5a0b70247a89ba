//! Small end-to-end runs through fields, mollify, pde, sde and harness.

use fblab::fields::{estimate_form_bound, make_hardy_drift, Modulation, OriginConcentratingFamily};
use fblab::harness::{verify_criteria, Criterion, Level, Scale, Suite};
use fblab::mollify::{build_sequence, GammaRule, MollifyConfig};
use fblab::pde::{gaussian, solve_forward_cauchy, SpaceTimeGrid};
use fblab::sde::{duality_check, SimConfig};
use fblab::LabError;

#[test]
fn mollified_hardy_runs_through_solver_and_simulator() {
    let b = make_hardy_drift(3, 0.04, 1.0, Modulation::Constant(1.0)).unwrap();
    let cert = b.certificate().unwrap().clone();
    let cfg = MollifyConfig {
        cells: 36,
        ..MollifyConfig::default()
    };
    let seq = build_sequence(&b, &cert, &[4, 8], &GammaRule::default(), &cfg).unwrap();
    assert!(seq[0].1.c_m < seq[1].1.c_m && seq[1].1.c_m < 1.0);
    assert!(seq[0].1.eps_m > seq[1].1.eps_m);
    let fam = OriginConcentratingFamily::new(3, 5);
    assert!(estimate_form_bound(&seq[1].0, &fam, 8).unwrap() <= 0.042);

    let grid = SpaceTimeGrid {
        cells: 32,
        steps: 40,
        ..SpaceTimeGrid::default()
    };
    assert!(matches!(
        solve_forward_cauchy(&b, &gaussian(vec![0.0; 3], 0.25), None, &grid),
        Err(LabError::RejectedSingularField(_))
    ));
    let sim = SimConfig {
        n_paths: 2000,
        h_t: 0.01,
        ..SimConfig::default()
    };
    let rep = duality_check(&[0.5, 0.0, 0.0], &gaussian(vec![0.0; 3], 0.5), &seq[1].0, &grid, &sim).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn oversized_time_step_fails_the_suite_with_a_stability_error() {
    let mut scale = Scale::for_level(Level::Quick);
    scale.grid.steps = 2;
    let suite = Suite::with_scale(Level::Quick, scale);
    let dir = tempfile::tempdir().unwrap();
    let rep = verify_criteria(&suite, &[Criterion::HeatOracle], dir.path()).unwrap();
    assert!(!rep.pass());
    let first = rep.first_failure().unwrap();
    assert_eq!(first.name, "heat-oracle");
    assert!(first.detail.contains("CFL"), "{}", first.detail);
    let csv = std::fs::read_to_string(rep.dir.join("criteria.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("1,heat-oracle,false"), "{csv}");
}
