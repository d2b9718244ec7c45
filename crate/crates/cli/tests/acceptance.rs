//! End-to-end acceptance run. Prints one verdict line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use qaction_cli::{run, Command, RunConfig};
use quantum_action::asymptotic::*;
use quantum_action::chaos::{poincare_section, SectionConfig};
use quantum_action::fitter::{fit_quantum_action, FitConfig, FitReport, Normalization};
use quantum_action::instanton::{analyze_double_well, instanton_profile};
use quantum_action::propagator::*;
use quantum_action::*;

type Criterion = (&'static str, fn(&mut Verdict), Duration);

struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn within(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.check(
            (got - want).abs() <= tol,
            format!("{name} = {got:.6} (want {want} ± {tol:.3e})"),
        );
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn mehler(xi: f64, xf: f64, t: f64) -> f64 {
    let (s, c) = (t.sinh(), t.cosh());
    (1.0 / (2.0 * std::f64::consts::PI * s)).sqrt() * (-((xi * xi + xf * xf) * c - 2.0 * xi * xf) / (2.0 * s)).exp()
}

fn free_kernel(xi: f64, xf: f64, t: f64) -> f64 {
    (1.0 / (2.0 * std::f64::consts::PI * t)).sqrt() * (-(xf - xi) * (xf - xi) / (2.0 * t)).exp()
}

fn harmonic() -> ClassicalAction {
    ClassicalAction::new(1.0, PotentialSpec::harmonic(1.0, 1.0)).unwrap()
}

fn double_well() -> ClassicalAction {
    ClassicalAction::new(1.0, PotentialSpec::double_well()).unwrap()
}

fn criterion_1(v: &mut Verdict) {
    let action = harmonic();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let boundary: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    let d = SpectralDecomposition::for_min_time(&action, &grid, 0.5, &PhysConstants::default()).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let table = amplitude_table(&d, &boundary, t, 1e-10).unwrap();
        // Start away from the answer.
        let ansatz =
            QuantumActionParams1D::new(1.1, &[0.0, 0.05, 0.45, -0.02, 0.03], TransitionTime::Finite(t)).unwrap();
        let fit = fit_quantum_action(&table, &ansatz, &FitConfig::default()).unwrap();
        let p = fit.one_d().unwrap();
        v.within(&format!("T={t} m_tilde"), p.m_tilde, 1.0, 1e-3);
        for (k, want) in [0.0, 0.0, 0.5, 0.0, 0.0].into_iter().enumerate() {
            v.within(&format!("T={t} v{k}"), p.v_tilde[k], want, 1e-3);
        }
        let per_pair = fit.chi2_per_pair();
        v.check(per_pair < 1e-8, format!("T={t} chi2/pair = {per_pair:.2e}"));
    }
}

fn criterion_2(v: &mut Verdict) {
    let free = ClassicalAction::new(1.0, PotentialSpec::polynomial(&[0.0]).unwrap()).unwrap();
    let boundary: Vec<f64> = (0..20).map(|i| -3.0 + 6.0 * i as f64 / 19.0).collect();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let d = SpectralDecomposition::for_min_time(&free, &grid, 1.0, &PhysConstants::default()).unwrap();
    let table = amplitude_table(&d, &boundary, 1.0, 0.0).unwrap();
    let worst = table
        .pairs
        .iter()
        .zip(&table.values)
        .map(|(&(a, b), g)| (g / free_kernel(a, b, 1.0) - 1.0).abs())
        .fold(0.0, f64::max);
    v.check(
        table.len() >= 200 && worst < 1e-4,
        format!("free T=1: {} pairs, max rel err {worst:.2e}", table.len()),
    );

    let boundary: Vec<f64> = (0..20).map(|i| -2.0 + 4.0 * i as f64 / 19.0).collect();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let d = SpectralDecomposition::for_min_time(&harmonic(), &grid, 0.5, &PhysConstants::default()).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let table = amplitude_table(&d, &boundary, t, 0.0).unwrap();
        let worst = table
            .pairs
            .iter()
            .zip(&table.values)
            .map(|(&(a, b), g)| (g / mehler(a, b, t) - 1.0).abs())
            .fold(0.0, f64::max);
        v.check(
            table.len() >= 200 && worst < 1e-4,
            format!("harmonic T={t}: {} pairs, max rel err {worst:.2e}", table.len()),
        );
    }
}

fn criterion_3(v: &mut Verdict) {
    let config = RunConfig::load(&configs().join("double_well.toml")).unwrap();
    let out = tempfile::tempdir().unwrap();
    run(Command::Fit, &config, out.path()).unwrap();
    let report = FitReport::parse(&fs::read_to_string(out.path().join("fit_report.toml")).unwrap()).unwrap();
    assert_eq!(report.normalization, Normalization::Unit);
    let p = &report.parameters;
    // 3 % or five quoted standard errors, whichever is larger.
    for (name, want, sigma) in [
        ("m_tilde", 0.9961, 0.0002),
        ("v0", 1.5710, 0.0017),
        ("v2", -0.745, 0.006),
        ("v4", 0.493, 0.003),
    ] {
        let tol = (0.03 * f64::abs(want)).max(5.0 * sigma);
        v.within(name, p[name], want, tol);
    }
    v.within("v1", p["v1"], 0.0, 0.01);
    v.within("v3", p["v3"], 0.0, 0.01);
    let ActionParams::OneD(q) = report.params().unwrap() else {
        unreachable!()
    };
    let shape = analyze_double_well(&q, 0.01).unwrap();
    let prof = instanton_profile(&shape, q.m_tilde).unwrap();
    v.within("a_tilde", shape.a_tilde, 0.869, 0.01);
    v.within("B_tilde", shape.b_tilde, 0.281, 0.01);
    v.within("kappa", prof.kappa, 0.865, 0.01);
}

fn criterion_4(v: &mut Verdict) {
    let t = 0.05;
    let action = double_well();
    let grid = GridSpec1D::new(-6.0, 6.0, 1024).unwrap();
    let config = FitConfig {
        normalization: Normalization::FreeParticle,
        ..FitConfig::default()
    };
    let d = SpectralDecomposition::for_min_time(&action, &grid, t, &config.constants).unwrap();
    let table = amplitude_table(&d, &config.boundary_grid, t, config.floor).unwrap();
    let ansatz = QuantumActionParams1D::from_classical(&action, TransitionTime::Finite(t)).unwrap();
    let fit = fit_quantum_action(&table, &ansatz, &config).unwrap();
    let p = fit.one_d().unwrap();
    v.within("m_tilde", p.m_tilde, 1.0, 0.02);
    // Vanishing coefficients are held to 2 % of the largest classical one.
    for (k, want) in [0.5, 0.0, -1.0, 0.0, 0.5].into_iter().enumerate() {
        v.within(&format!("v{k}"), p.v_tilde[k], want, 0.02 * f64::abs(want).max(1.0));
    }
}

fn criterion_5(v: &mut Verdict) {
    let c = PhysConstants::atomic();
    let grid = GridSpec1D::radial(150.0, 8192).unwrap();
    for l in 1..=4u32 {
        let s = hydrogen_sector(l, &c).unwrap();
        let lf = f64::from(l);
        let ulp = |x: f64| 4.0 * f64::EPSILON * x.abs();
        let e_exact = -1.0 / (2.0 * (lf + 1.0) * (lf + 1.0));
        v.check(s.e_l == e_exact, format!("l={l} E_l = {} (want {e_exact})", s.e_l));
        v.check(
            (s.mu - lf * lf / 2.0).abs() <= ulp(s.mu),
            format!("l={l} mu = {}", s.mu),
        );
        v.check(
            (s.nu - lf / (lf + 1.0)).abs() <= ulp(s.nu),
            format!("l={l} nu = {}", s.nu),
        );
        v.check(
            (s.v_min - s.e_l).abs() <= ulp(s.e_l),
            format!("l={l} min V = {}", s.v_min),
        );
        v.check(
            (s.r_star - lf * (lf + 1.0)).abs() <= ulp(s.r_star),
            format!("l={l} r* = {}", s.r_star),
        );

        let action = ClassicalAction::new(1.0, PotentialSpec::radial(l, 1.0, 1.0).unwrap()).unwrap();
        let gs = ground_state(&spectral_decompose(&action, &grid, 1, &c).unwrap());
        v.within(&format!("l={l} E_grid"), gs.e_gr, s.e_l, 1e-4);
        let phi = gs.divided_by_radius();
        let r = phi.grid.point(phi.argmax());
        v.within(&format!("l={l} argmax phi"), r, s.r_star, grid.spacing());
    }
}

fn criterion_6(v: &mut Verdict) {
    let c = PhysConstants::default();
    let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
    let action = harmonic();
    let gs = ground_state(&spectral_decompose(&action, &grid, 1, &c).unwrap());
    well_checks(v, "harmonic", &action, &gs, &c, f64::NEG_INFINITY);

    let ca = PhysConstants::atomic();
    let grid = GridSpec1D::radial(150.0, 8192).unwrap();
    for l in 1..=4u32 {
        let action = ClassicalAction::new(1.0, PotentialSpec::radial(l, 1.0, 1.0).unwrap()).unwrap();
        let phi = ground_state(&spectral_decompose(&action, &grid, 1, &ca).unwrap()).divided_by_radius();
        // The Coulomb and centrifugal terms are singular at r = 0; judge
        // the residual from half a Bohr radius outwards.
        well_checks(v, &format!("hydrogen l={l}"), &action, &phi, &ca, 0.5);
    }
}

fn well_checks(v: &mut Verdict, name: &str, action: &ClassicalAction, gs: &GroundState, c: &PhysConstants, r_min: f64) {
    let p = extract_quantum_potential(gs, c).unwrap();
    let wkb = wkb_ground_state(&p, c).unwrap();
    let l2 = l2_distance(&wkb, &restrict_to_window(gs, &p)).unwrap();
    v.check(l2 < 1e-3, format!("{name}: round-trip L2 {l2:.2e}"));
    let res = verify_transformation_law(&p, action, gs.e_gr, c)
        .unwrap()
        .max_abs_within(r_min, f64::INFINITY);
    v.check(res < 1e-3, format!("{name}: transformation residual {res:.2e}"));
    let h = p.grid.spacing();
    let u_min =
        p.u.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, u)| if *u < a.1 { (i, *u) } else { a })
            .0;
    let peak = gs.grid.point(gs.argmax());
    v.check(
        (peak - p.x[u_min]).abs() <= h && (peak - p.x_star).abs() <= h,
        format!(
            "{name}: argmax psi {peak:.4}, argmin U {:.4}, x* {:.4}",
            p.x[u_min], p.x_star
        ),
    );
    v.check(p.v_min == gs.e_gr, format!("{name}: V_min = E_gr"));
}

fn criterion_7(v: &mut Verdict) {
    let base = RunConfig::load(&configs().join("anharmonic_2d.toml")).unwrap();
    let params = |v22: f64| {
        let a = ClassicalAction::new(1.0, PotentialSpec::quartic_2d(0.0, 0.5, v22, 0.0)).unwrap();
        QuantumActionParams2D::from_classical(&a, TransitionTime::Finite(4.5)).unwrap()
    };
    let section = |v22: f64| {
        poincare_section(&SectionConfig {
            params: params(v22),
            energy: base.chaos.energy,
            n_seeds: base.chaos.n_seeds,
            seed: base.chaos.seed,
            t_max: base.chaos.t_max,
            dt: base.chaos.dt,
        })
        .unwrap()
    };
    let coupled = section(0.05);
    let err = coupled.max_energy_error();
    v.check(
        err < 1e-6 && coupled.aborted.iter().all(Option::is_none),
        format!(
            "E=10, t_max={}: {} crossings, max |H-E|/E {err:.2e}",
            base.chaos.t_max,
            coupled.n_crossings()
        ),
    );
    let free = section(0.0);
    let e = base.chaos.energy;
    let worst = free
        .points
        .iter()
        .map(|pts| {
            let ex: Vec<f64> = pts.iter().map(|(x, px)| 0.5 * px * px + 0.5 * x * x).collect();
            let mean = ex.iter().sum::<f64>() / ex.len() as f64;
            ex.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ex.len() as f64
        })
        .fold(0.0, f64::max);
    v.check(
        worst < 1e-10 * e * e,
        format!("v22=0 invariant-curve variance {worst:.2e}"),
    );

    let mut config = base.clone();
    config.fit.cross_terms = true;
    let out = tempfile::tempdir().unwrap();
    run(Command::Fit, &config, out.path()).unwrap();
    let report = FitReport::parse(&fs::read_to_string(out.path().join("fit_report.toml")).unwrap()).unwrap();
    let p = &report.parameters;
    v.check(
        p["v22"] < 0.05,
        format!("fitted v22 = {:.6} ± {:.1e}", p["v22"], report.uncertainties["v22"]),
    );
    // "Small": every diagnostic cross term below 1e-3 in magnitude.
    for name in CrossTerms::NAMES {
        v.check(
            p[name].abs() < 1e-3,
            format!("{name} = {:.2e} ± {:.1e}", p[name], report.uncertainties[name]),
        );
    }
}

fn criterion_8(v: &mut Verdict) {
    let jobs = [
        ("amplitude", "harmonic.toml"),
        ("amplitude", "anharmonic_2d.toml"),
        ("ground-state", "double_well.toml"),
        ("fit", "double_well.toml"),
        ("fit-family", "double_well_family.toml"),
        ("qpotential", "hydrogen.toml"),
        ("instanton", "double_well_family.toml"),
        ("poincare", "anharmonic_2d.toml"),
        ("poincare", "anharmonic_2d_quantum.toml"),
        ("hydrogen", "hydrogen.toml"),
    ];
    let root = tempfile::tempdir().unwrap();
    for (k, (command, file)) in jobs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run_no, threads) in ["1", "4", "4"].iter().enumerate() {
            let dir = root.path().join(format!("{k}-{run_no}"));
            let status = Process::new(env!("CARGO_BIN_EXE_qaction"))
                .args([
                    command,
                    "--config",
                    configs().join(file).to_str().unwrap(),
                    "--threads",
                    threads,
                ])
                .arg("--out")
                .arg(&dir)
                .output()
                .unwrap();
            if !status.status.success() {
                v.check(
                    false,
                    format!("{command} {file}: {}", String::from_utf8_lossy(&status.stderr).trim()),
                );
                return;
            }
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            outputs.push(files);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        v.check(
            same,
            format!(
                "{command} {file}: {} files identical over 1/4/4 threads",
                outputs[0].len()
            ),
        );
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("harmonic identity", criterion_1, Duration::from_secs(60)),
        ("propagator oracles", criterion_2, Duration::from_secs(60)),
        ("double-well reproduction", criterion_3, Duration::from_secs(600)),
        ("classical limit", criterion_4, Duration::from_secs(600)),
        ("hydrogen sector", criterion_5, Duration::from_secs(120)),
        ("asymptotic analytics", criterion_6, Duration::from_secs(120)),
        ("chaos properties", criterion_7, Duration::from_secs(900)),
        ("determinism", criterion_8, Duration::from_secs(1800)),
    ];
    let mut failed = 0;
    for (i, (title, f, limit)) in criteria.iter().enumerate() {
        let mut v = Verdict::new();
        let start = Instant::now();
        f(&mut v);
        let took = start.elapsed();
        v.check(
            took <= *limit,
            format!("runtime {:.1}s (limit {}s)", took.as_secs_f64(), limit.as_secs()),
        );
        let pass = v.failures.is_empty();
        println!(
            "criterion {} ({title}): {} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        for note in &v.failures {
            println!("    failed: {note}");
        }
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            for note in &v.notes {
                println!("    ok: {note}");
            }
        }
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
