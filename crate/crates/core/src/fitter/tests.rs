use super::*;
use crate::model::PotentialSpec;
use crate::propagator::amplitude_table;

fn harmonic_table(t: f64, grid_pts: &[f64]) -> AmplitudeTable {
    let action = ClassicalAction::new(1.0, PotentialSpec::harmonic(1.0, 1.0)).unwrap();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let decomp = SpectralDecomposition::for_min_time(&action, &grid, t, &PhysConstants::default()).unwrap();
    amplitude_table(&decomp, grid_pts, t, 1e-10).unwrap()
}

fn small_grid() -> Vec<f64> {
    (0..9).map(|i| -2.0 + 0.5 * i as f64).collect()
}

fn harmonic_ansatz(t: f64) -> QuantumActionParams1D {
    // Deliberately off the optimum.
    QuantumActionParams1D::new(1.1, &[0.0, 0.05, 0.45, -0.02, 0.03], TransitionTime::Finite(t)).unwrap()
}

#[test]
fn jacobian_matches_envelope_theorem() {
    // At a stationary path ∂Σ/∂m = Σ(Δx)²/2h and ∂Σ/∂v_k = h·trap(x^k).
    let t = 0.5;
    let table = AmplitudeTable {
        transition_time: t,
        pairs: vec![(-1.5, 0.3), (0.0, 0.0), (-0.8, 1.2), (0.4, 2.0)],
        values: vec![1.0; 4],
        floor: 1e-10,
    };
    let ansatz = QuantumActionParams1D::new(0.99, &[1.5, 0.01, -0.75, 0.02, 0.49], TransitionTime::Finite(t)).unwrap();
    let config = FitConfig {
        free: Some(QuantumActionParams1D::names().iter().map(|s| s.to_string()).collect()),
        ..FitConfig::default()
    };
    let problem = build_1d(&table, &ansatz, &config).unwrap();
    let theta = free_values(&problem);
    let eval = lm::evaluate(&problem, &theta, None).unwrap();
    let d = lm::sigma_jacobian(&problem, &theta, &eval.paths, config.fd_step).unwrap();
    for (p, path) in eval.paths.iter().enumerate() {
        let n = path.len() - 1;
        let h = t / n as f64;
        let dm: f64 = path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (2.0 * h);
        assert!(
            (d[(p, 0)] - dm).abs() < 1e-7 * dm.abs().max(1.0),
            "m: {} vs {dm}",
            d[(p, 0)]
        );
        for k in 0..5 {
            let f: Vec<f64> = path.iter().map(|x| x.powi(k as i32)).collect();
            let trap = h * (f[1..n].iter().sum::<f64>() + 0.5 * (f[0] + f[n]));
            let got = d[(p, k + 1)];
            assert!((got - trap).abs() < 1e-7 * trap.abs().max(1.0), "v{k}: {got} vs {trap}");
        }
    }
}

#[test]
fn harmonic_fit_recovers_classical_action() {
    let t = 1.0;
    let table = harmonic_table(t, &small_grid());
    let fit = fit_quantum_action(&table, &harmonic_ansatz(t), &FitConfig::default()).unwrap();
    let p = fit.one_d().unwrap();
    assert!(fit.converged);
    assert!((p.m_tilde - 1.0).abs() < 1e-3, "{p:?}");
    assert!((p.v_tilde[2] - 0.5).abs() < 1e-3, "{p:?}");
    for k in [0, 1, 3, 4] {
        assert!(p.v_tilde[k].abs() < 1e-3, "{p:?}");
    }
    assert!(fit.chi2_per_pair() < 1e-8, "{}", fit.chi2_per_pair());
    // Mehler prefactor.
    let ln_z = 0.5 * (1.0 / (2.0 * std::f64::consts::PI * t.sinh())).ln();
    assert!((p.ln_z - ln_z).abs() < 1e-3, "{} vs {ln_z}", p.ln_z);
    assert!(fit.uncertainties.values().all(|u| *u >= 0.0));
}

#[test]
fn reported_chi2_reproduces() {
    let t = 0.7;
    let table = harmonic_table(t, &small_grid());
    for normalization in [Normalization::Fitted, Normalization::Unit, Normalization::FreeParticle] {
        let config = FitConfig {
            normalization,
            ..FitConfig::default()
        };
        let fit = fit_quantum_action(&table, &harmonic_ansatz(t), &config).unwrap();
        let again = evaluate_chi2(&table, fit.one_d().unwrap(), &config).unwrap();
        assert!(
            (again - fit.chi2).abs() <= 1e-10 * fit.chi2.max(f64::MIN_POSITIVE),
            "{again} vs {}",
            fit.chi2
        );
    }
}

#[test]
fn gauges_agree_on_observables() {
    let t = 0.7;
    let table = harmonic_table(t, &small_grid());
    let run = |normalization| {
        let config = FitConfig {
            normalization,
            ..FitConfig::default()
        };
        fit_quantum_action(&table, &harmonic_ansatz(t), &config).unwrap()
    };
    let fitted = run(Normalization::Fitted);
    let unit = run(Normalization::Unit);
    let free = run(Normalization::FreeParticle);
    let (a, b, c) = (fitted.one_d().unwrap(), unit.one_d().unwrap(), free.one_d().unwrap());
    assert_eq!(b.ln_z, 0.0);
    let combo = |p: &QuantumActionParams1D| p.v_tilde[0] * t - p.ln_z;
    assert!((combo(a) - combo(b)).abs() < 1e-12);
    assert!((combo(a) - combo(c)).abs() < 1e-12);
    assert!((c.ln_z - free_particle_ln_z(c.m_tilde, t, 1.0, 1)).abs() < 1e-14);
    assert!((unit.uncertainties["v0"] - fitted.uncertainties["ln_z"] / t).abs() < 1e-15);
}

#[test]
fn normalisation_decouples_from_action() {
    let t = 0.7;
    let table = harmonic_table(t, &small_grid());
    let (dt, e_ref) = (0.3_f64, 1.7);
    let shifted = table.scaled((-dt * e_ref).exp());
    let a = fit_quantum_action(&table, &harmonic_ansatz(t), &FitConfig::default()).unwrap();
    let b = fit_quantum_action(&shifted, &harmonic_ansatz(t), &FitConfig::default()).unwrap();
    let (pa, pb) = (a.one_d().unwrap(), b.one_d().unwrap());
    assert!((pb.ln_z - pa.ln_z + dt * e_ref).abs() < 1e-9);
    assert!((pa.m_tilde - pb.m_tilde).abs() < 1e-9);
    for k in 0..5 {
        assert!((pa.v_tilde[k] - pb.v_tilde[k]).abs() < 1e-9);
    }
}

#[test]
fn free_v0_is_degenerate_with_ln_z() {
    let t = 0.7;
    let table = harmonic_table(t, &small_grid());
    let config = FitConfig {
        free: Some(vec!["m_tilde".into(), "v0".into(), "v2".into()]),
        ..FitConfig::default()
    };
    match fit_quantum_action(&table, &harmonic_ansatz(t), &config) {
        Err(Error::DegenerateFit { null_direction, .. }) => {
            let v0 = null_direction.iter().find(|(n, _)| n == "v0").unwrap().1;
            assert!((v0 - 1.0).abs() < 1e-6, "{null_direction:?}");
        }
        other => panic!("expected degenerate fit, got {other:?}"),
    }
}

#[test]
fn too_few_pairs_is_degenerate_table() {
    let t = 0.7;
    let table = harmonic_table(t, &[-1.0, 0.0, 1.0, 2.0]);
    assert!(matches!(
        fit_quantum_action(&table, &harmonic_ansatz(t), &FitConfig::default()),
        Err(Error::DegenerateTable { .. })
    ));
}

#[test]
fn config_validation() {
    let bad = [
        FitConfig {
            floor: 0.0,
            ..FitConfig::default()
        },
        FitConfig {
            floor: 1.0,
            ..FitConfig::default()
        },
        FitConfig {
            optimizer: OptimizerConfig {
                max_iter: 99,
                ..OptimizerConfig::default()
            },
            ..FitConfig::default()
        },
        FitConfig {
            n_t: 10,
            ..FitConfig::default()
        },
        FitConfig {
            free: Some(vec!["mass".into()]),
            ..FitConfig::default()
        },
    ];
    let table = harmonic_table(1.0, &small_grid());
    for c in bad {
        assert!(fit_quantum_action(&table, &harmonic_ansatz(1.0), &c).is_err(), "{c:?}");
    }
}

#[test]
fn family_of_harmonic_is_constant() {
    let action = ClassicalAction::new(1.0, PotentialSpec::harmonic(1.0, 1.0)).unwrap();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let config = FitConfig {
        boundary_grid: small_grid(),
        ..FitConfig::default()
    };
    let family = fit_family(&action, &[0.5, 1.0, 2.0], &config, &grid).unwrap();
    assert_eq!(family.len(), 3);
    for point in &family {
        let fit = point.outcome.as_ref().unwrap();
        let p = fit.one_d().unwrap();
        assert!(
            (p.m_tilde - 1.0).abs() < 1e-3 && (p.v_tilde[2] - 0.5).abs() < 1e-3,
            "{p:?}"
        );
    }
    assert!(fit_family(&action, &[1.0, 0.5], &config, &grid).is_err());
}
