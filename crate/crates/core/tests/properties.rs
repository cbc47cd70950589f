use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use reachkit::boundary::weyl_grid;
use reachkit::cli::Pipeline;
use reachkit::config::{parse_config, Config, OutputFormat, Outputs, SystemSpec};
use reachkit::format::sig12;
use reachkit::lti_model::{canonical_transform, companion_matrix, LtiProblem, NumericalSettings};
use reachkit::volume::jacobian_abs_det;
use reachkit::{fixtures, ReachError, WeylPoint};

fn problem(n: usize, a: Vec<f64>, b: Vec<f64>, bounds: (f64, f64), t: f64) -> LtiProblem {
    LtiProblem::new(
        DMatrix::from_row_slice(n, n, &a),
        DVector::from_vec(b),
        bounds.0.min(bounds.1),
        bounds.0.max(bounds.1),
        DVector::zeros(n),
        t,
        NumericalSettings::default(),
    )
    .unwrap()
}

fn system(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-2.0..2.0f64, n * n), prop::collection::vec(-2.0..2.0f64, n))
}

fn sorted_sigma(n: usize, t: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=t, n - 1).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_transform_round_trips(n in 2usize..=4, seed in any::<u64>()) {
        let mut rng = proptest::test_runner::TestRng::from_seed(
            proptest::test_runner::RngAlgorithm::ChaCha, &seed.to_le_bytes().repeat(4));
        let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = problem(n, a, b, (-1.0, 1.0), 1.0);
        let cf = match canonical_transform(&p) {
            Ok(cf) => cf,
            Err(ReachError::NotControllable { .. } | ReachError::RepeatedEigenvalues { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let z = DVector::from_fn(n, |i, _| (i as f64 + 1.0).sin());
        let back = cf.to_original(&cf.to_canonical(&z));
        let cond = cf.m.amax() * cf.m_inv.amax();
        prop_assert!((back - &z).amax() <= 1e-12 * cond.max(1.0));
        prop_assert_eq!(&cf.a_con, &companion_matrix(&cf.c));
        let mb = &cf.m * &p.b;
        let mut e_n = DVector::zeros(n);
        e_n[n - 1] = 1.0;
        prop_assert!((mb - e_n).amax() <= 1e-9 * cond.max(1.0));
        let direct = &cf.m * &p.a * &cf.m_inv;
        prop_assert!((direct - &cf.a_con).amax() <= 1e-8 * cond.max(1.0) * p.a.amax().max(1.0));
    }

    #[test]
    fn boundary_is_antipodal((a, b) in system(2), sigma in sorted_sigma(2, 2.0), lo in -1.0..0.0f64, hi in 0.0..1.0f64) {
        let p = problem(2, a, b, (lo, hi), 2.0);
        let Ok(pipe) = Pipeline::new(p) else { return Ok(()) };
        let reach = pipe.reach(2.0).unwrap();
        let s = reach.boundary_pair(&WeylPoint::new(sigma, 2.0).unwrap()).unwrap();
        let gap = (&s.x_upper + &s.x_lower - &s.eta * 2.0).amax();
        prop_assert!(gap <= 1e-10 * (1.0 + s.x_upper.amax()));
    }

    #[test]
    fn three_state_boundary_is_antipodal(sigma in sorted_sigma(3, 2.0)) {
        let p = fixtures::damped_three_state(2.0);
        let pipe = Pipeline::new(p).unwrap();
        let reach = pipe.reach(2.0).unwrap();
        let s = reach.boundary_pair(&WeylPoint::new(sigma, 2.0).unwrap()).unwrap();
        prop_assert!((&s.x_upper + &s.x_lower - &s.eta * 2.0).amax() <= 1e-10);
    }

    #[test]
    fn jacobian_is_symmetric_in_lambda(sigma in sorted_sigma(3, 1.5), lam in 0.0..=1.0f64) {
        let p = fixtures::unit_spectrum_cubic(1.5);
        let pipe = Pipeline::new(p).unwrap();
        let reach = pipe.reach(1.5).unwrap();
        let w = WeylPoint::new(sigma, 1.5).unwrap();
        let a = jacobian_abs_det(&w, lam, &reach).unwrap();
        let b = jacobian_abs_det(&w, 1.0 - lam, &reach).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-13 * a.max(b).max(1e-300));
    }

    #[test]
    fn support_dominates_boundary((a, b) in system(2), angle in 0.0..std::f64::consts::TAU, scale in 0.1..10.0f64) {
        let p = problem(2, a, b, (-0.5, 0.3), 1.5);
        let Ok(pipe) = Pipeline::new(p) else { return Ok(()) };
        let reach = pipe.reach(1.5).unwrap();
        let y = DVector::from_vec(vec![angle.cos(), angle.sin()]);
        let h = reach.support(&y).unwrap();
        prop_assert!((reach.support(&(&y * scale)).unwrap() - scale * h).abs() <= 1e-12 * scale * (1.0 + h.abs()));
        let scale_x = 1.0 + reach.eta().amax();
        for sigma in weyl_grid(1.5, 2, 40).unwrap() {
            let s = reach.boundary_pair(&sigma).unwrap();
            prop_assert!(y.dot(&s.x_upper) <= h + 1e-9 * scale_x);
            prop_assert!(y.dot(&s.x_lower) <= h + 1e-9 * scale_x);
        }
    }

    #[test]
    fn envelope_invariants((a, b) in system(2), lo in -1.0..0.5f64, width in 0.0..1.5f64) {
        let p = problem(2, a, b, (lo, lo + width), 2.0);
        let Ok(pipe) = Pipeline::new(p.clone()) else { return Ok(()) };
        let e = &pipe.envelope;
        let floor = 0.5 * (p.v_max - p.v_min);
        for j in 0..e.len() {
            prop_assert!(e.f_minus[j] <= 0.0 && e.f_plus[j] >= 0.0);
            prop_assert!(e.i_min[j] <= e.i_max[j] && e.u_min[j] <= e.u_max[j]);
            prop_assert!(e.mu[j] >= floor * (1.0 - 1e-15));
            let identity = (p.v_max - p.v_min) * (1.0 - e.f_minus[j] + e.f_plus[j]);
            prop_assert!((e.i_max[j] - e.i_min[j] - identity).abs() <= 1e-12 * (1.0 + identity.abs()));
        }
    }

    #[test]
    fn weyl_grid_enumerates_ordered_tuples(n in 1usize..=4, res in 2usize..=9) {
        let g = weyl_grid(1.0, n, res).unwrap();
        // C(res + n - 2, n - 1)
        let k = n - 1;
        let expected = (0..k).fold(1usize, |acc, i| acc * (res + i) / (i + 1));
        prop_assert_eq!(g.len(), expected);
        for w in &g {
            prop_assert!(w.as_slice().windows(2).all(|p| p[0] <= p[1]));
        }
        for pair in g.windows(2) {
            prop_assert!(pair[0].as_slice() < pair[1].as_slice());
        }
    }

    #[test]
    fn config_round_trips(
        (a, b) in system(2),
        z0 in prop::collection::vec(-1.0..1.0f64, 2),
        lo in -1.0..0.0f64,
        t in 0.1..5.0f64,
        dt in 1e-3..0.05f64,
        grid in 2usize..500,
        seed in any::<u64>(),
        samples in prop::option::of(3usize..5000),
        fmt in prop::sample::select(vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]),
    ) {
        let numerics = NumericalSettings { dt, sigma_grid: grid, lambda_grid: grid + 1, seed, sphere_samples: samples, ..Default::default() };
        let c = Config {
            system: SystemSpec { a, b, v_min: lo, v_max: -lo, z0, t_final: t },
            numerics,
            outputs: Outputs { format: fmt, path: None },
        };
        let parsed = parse_config(&c.to_json()).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_json(), c.to_json());
    }

    #[test]
    fn sig12_keeps_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = sig12(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }
}
