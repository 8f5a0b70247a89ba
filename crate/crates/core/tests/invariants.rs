//! Property tests for invariants that hold for every admissible input.

use fblab::fields::{make_constant_drift, make_hardy_drift, rayleigh_quotient, Modulation, RandomBumpFamily, TestFamily};
use fblab::harness::{ExperimentConfig, ExperimentKind, FieldSpec};
use fblab::io::Block;
use fblab::mollify::{scaling_factor, GammaRule};
use fblab::pde::{gaussian, solve_forward_cauchy, SpaceTimeGrid, Weight};
use fblab::sde::{ks_statistic, mean_stderr, simulate_euler, SimConfig};
use fblab::special::sobolev_constant;
use proptest::prelude::*;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_gradient_is_dominated_by_the_weight(
        kappa in 0.05f64..5.0,
        theta in 1.6f64..8.0,
        x in prop::array::uniform3(-20.0f64..20.0),
    ) {
        let w = Weight::new(kappa, theta, 3).unwrap();
        let mut g = [0.0; 3];
        let rho = w.gradient(&x, &mut g);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm <= theta * kappa.sqrt() * rho * (1.0 + 1e-12));
        prop_assert!(rho > 0.0 && rho <= 1.0);
    }

    #[test]
    fn scaling_factor_rises_to_one(delta in 1e-4f64..4.0, gamma0 in 0.01f64..10.0, quadratic: bool) {
        let rule = if quadratic { GammaRule::Quadratic { gamma0 } } else { GammaRule::Harmonic { gamma0 } };
        let cs = sobolev_constant(3);
        let mut prev = 0.0;
        for m in 1..=128u32 {
            let c = scaling_factor(delta, cs, rule.gamma(m));
            prop_assert!(c > 0.0 && c <= 1.0);
            prop_assert!(c > prev);
            prev = c;
        }
        prop_assert_eq!(scaling_factor(0.0, cs, rule.gamma(1)), 1.0);
    }

    #[test]
    fn hardy_magnitude_is_exactly_inverse_radius(
        delta in 1e-3f64..60.0,
        x in prop::array::uniform3(-5.0f64..5.0),
        attracting: bool,
    ) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        prop_assume!(r2 > 1e-8);
        let b = make_hardy_drift(3, delta, if attracting { 1.0 } else { -1.0 }, Modulation::Constant(1.0)).unwrap();
        let v = b.eval(0.3, &x).unwrap();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        prop_assert!((n2 * r2 / (delta / 4.0) - 1.0).abs() < 1e-10);
        let radial: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assert_eq!(radial > 0.0, attracting);
    }

    #[test]
    fn ks_statistic_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(-3.0f64..3.0, 1..60),
        b in prop::collection::vec(-3.0f64..3.0, 1..60),
    ) {
        let (a, b) = (sorted(a), sorted(b));
        prop_assert_eq!(ks_statistic(&a, &a), 0.0);
        let d = ks_statistic(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a));
    }

    #[test]
    fn mean_stderr_of_a_shifted_sample(v in prop::collection::vec(-1e3f64..1e3, 2..50), shift in -10.0f64..10.0) {
        let (m, s) = mean_stderr(&v);
        let w: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let (m2, s2) = mean_stderr(&w);
        prop_assert!((m2 - m - shift).abs() < 1e-9 * (1.0 + m.abs()));
        prop_assert!((s2 - s).abs() < 1e-9 * (1.0 + s));
        prop_assert!(mean_stderr(&vec![shift; v.len()]).1 <= 1e-14 * (1.0 + shift.abs()));
    }

    #[test]
    fn blocks_round_trip(shape in prop::collection::vec(1usize..5, 1..4), seed in 0u64..1000) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 7.0 - 50.0).collect();
        let b = Block {
            origin: vec![-1.5; shape.len()],
            spacing: vec![0.25; shape.len()],
            shape,
            data,
        };
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        prop_assert_eq!(Block::read_from(&mut buf.as_slice()).unwrap(), b);
    }

    #[test]
    fn configs_round_trip_through_toml(
        cells in 4usize..200,
        steps in 1usize..1000,
        seed: u64,
        n_paths in 1usize..100_000,
        h_t in 1e-5f64..0.1,
        delta in 1e-3f64..10.0,
    ) {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Simulate,
            FieldSpec::Hardy { dim: 3, delta, sign: -1.0, amplitude: 0.5, omega: 2.0 },
        );
        cfg.grid.cells = cells;
        cfg.grid.steps = steps;
        cfg.seed = seed;
        cfg.sim.n_paths = n_paths;
        cfg.sim.h_t = h_t;
        cfg.sim.horizon = h_t * 10.0;
        cfg.mollify.levels = vec![2, 4];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hardy_rayleigh_quotients_respect_the_certified_bound(delta in 0.01f64..2.0, index in 0usize..500) {
        let b = make_hardy_drift(3, delta, 1.0, Modulation::Constant(1.0)).unwrap();
        let phi = RandomBumpFamily::new(3, 11).candidate(index);
        let g = b.certificate().unwrap().g.clone();
        let q = rayleigh_quotient(&b, &phi, &g);
        prop_assume!(q.is_ok());
        let q = q.unwrap();
        prop_assert!(q > 0.0 && q <= delta * 1.05, "q={q} delta={delta}");
    }

    #[test]
    fn forward_solves_obey_the_maximum_principle(
        c in prop::array::uniform3(-1.0f64..1.0),
        center in prop::array::uniform3(-1.0f64..1.0),
        sigma2 in 0.1f64..1.0,
    ) {
        let b = make_constant_drift(&c).unwrap();
        let grid = SpaceTimeGrid { cells: 16, steps: 12, save_every: 1, ..SpaceTimeGrid::default() };
        let sol = solve_forward_cauchy(&b, &gaussian(center.to_vec(), sigma2), None, &grid).unwrap();
        for w in sol.sup_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for level in &sol.levels {
            prop_assert!(level.iter().all(|v| *v >= -1e-12));
        }
    }

    #[test]
    fn simulations_are_reproducible(seed: u64, x in prop::array::uniform3(-1.0f64..1.0)) {
        let b = make_constant_drift(&[0.3, 0.0, -0.2]).unwrap();
        let cfg = SimConfig { n_paths: 50, horizon: 0.1, h_t: 0.01, seed, ..SimConfig::default() };
        let e1 = simulate_euler(&b, &x, &cfg).unwrap();
        let e2 = simulate_euler(&b, &x, &cfg).unwrap();
        prop_assert_eq!(&e1.data, &e2.data);
        let other = SimConfig { seed: seed.wrapping_add(1), ..cfg };
        prop_assert_ne!(&simulate_euler(&b, &x, &other).unwrap().data, &e1.data);
    }
}
