use proptest::prelude::*;
use quantum_action::instanton::*;
use quantum_action::trajectory::{solve_euclidean_bvp, BoundaryPair};
use quantum_action::{QuantumActionParams1D, TransitionTime};

fn well(m: f64, v0: f64, v2: f64, v4: f64) -> QuantumActionParams1D {
    QuantumActionParams1D::new(m, &[v0, 0.0, v2, 0.0, v4], TransitionTime::Finite(0.5)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shape_identities(m in 0.3..3.0f64, v0 in -2.0..2.0f64, v2 in -2.0..-0.05f64, v4 in 0.05..2.0f64) {
        let p = well(m, v0, v2, v4);
        let s = analyze_double_well(&p, 0.0).unwrap();
        let b = s.big_a_tilde.powi(2) * s.a_tilde.powi(4);
        prop_assert!((b - s.b_tilde).abs() <= 4.0 * f64::EPSILON * s.b_tilde, "{} vs {}", b, s.b_tilde);
        // Minima of the even part sit at ±ã, a barrier B̃ above.
        let v = |x: f64| v0 + v2 * x * x + v4 * x.powi(4);
        prop_assert!((v(0.0) - v(s.a_tilde) - s.b_tilde).abs() <= 1e-12 * (1.0 + s.b_tilde + v0.abs()));
        prop_assert!(s.dv(s.a_tilde).abs() <= 1e-12 * (v2.abs() * s.a_tilde));

        let prof = instanton_profile(&s, m).unwrap();
        prop_assert!(prof.times.len() >= 1000);
        prop_assert!(prof.eom_residual(&s) < 1e-8, "{}", prof.eom_residual(&s));
        let n = prof.times.len();
        for k in 0..n {
            prop_assert_eq!(prof.x[k], -prof.x[n - 1 - k]);
            prop_assert_eq!(prof.times[k], -prof.times[n - 1 - k]);
        }
        prop_assert!(prof.x.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((prof.x[n - 1] - s.a_tilde).abs() < 1e-3 * s.a_tilde);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn relaxed_path_matches_the_kink(m in 0.5..2.0f64, v2 in -1.5..-0.3f64, v4 in 0.2..1.0f64) {
        let p = well(m, 0.0, v2, v4);
        let s = analyze_double_well(&p, 0.0).unwrap();
        let prof = instanton_profile(&s, m).unwrap();
        let edge = 0.99 * s.a_tilde;
        let b = BoundaryPair::new(-edge, edge, 10.0 / prof.kappa).unwrap();
        let sol = solve_euclidean_bvp(&p, &b, 2048, 1e-10).unwrap();
        // Align on the zero crossing; the kink centre is a near-zero mode.
        let k = sol.path.windows(2).position(|w| w[0] < 0.0 && w[1] >= 0.0).unwrap();
        let (t0, t1, x0, x1) = (sol.times[k], sol.times[k + 1], sol.path[k], sol.path[k + 1]);
        let centre = t0 - x0 * (t1 - t0) / (x1 - x0);
        let worst = sol
            .times
            .iter()
            .zip(&sol.path)
            .filter(|(t, _)| prof.at(*t - centre).abs() <= edge)
            .map(|(t, x)| (x - prof.at(t - centre)).abs())
            .fold(0.0, f64::max);
        prop_assert!(worst < 1e-3 * s.a_tilde.max(1.0), "{}", worst);
    }
}
