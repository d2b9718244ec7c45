use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use quantum_action::asymptotic::{
    extract_quantum_potential, hydrogen_report, hydrogen_sector, l2_distance, restrict_to_window,
    verify_transformation_law, wkb_ground_state,
};
use quantum_action::chaos::{poincare_section, SectionConfig};
use quantum_action::fitter::{fit_family, fit_quantum_action, fit_quantum_action_2d, FitReport, FitResult};
use quantum_action::instanton::{fitted_shape, instanton_family, instanton_profile, InstantonProfile};
use quantum_action::propagator::{
    amplitude_table, amplitude_table_2d, ground_state, spectral_decompose, AmplitudeTable2D, GridSpec1D, GroundState,
    SpectralDecomposition, SplitStepOptions,
};
use quantum_action::{
    ActionParams, ClassicalAction, CrossTerms, PotentialSpec, QuantumActionParams1D, QuantumActionParams2D,
    TransitionTime,
};

use crate::config::{ActionKind, RunConfig, SectionAction};
use crate::{header, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Amplitude,
    GroundState,
    Fit,
    FitFamily,
    Qpotential,
    Instanton,
    Poincare,
    Hydrogen,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Amplitude,
        Command::GroundState,
        Command::Fit,
        Command::FitFamily,
        Command::Qpotential,
        Command::Instanton,
        Command::Poincare,
        Command::Hydrogen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Amplitude => "amplitude",
            Command::GroundState => "ground-state",
            Command::Fit => "fit",
            Command::FitFamily => "fit-family",
            Command::Qpotential => "qpotential",
            Command::Instanton => "instanton",
            Command::Poincare => "poincare",
            Command::Hydrogen => "hydrogen",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Writer<'a> {
    command: Command,
    config: &'a RunConfig,
    out: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn emit<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let path = self.out.join(name);
        let mut buf = header::render(self.command.name(), self.config).into_bytes();
        body(&mut buf).map_err(|e| CliError::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Runs one command and returns the files it wrote.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    config.check_files()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut w = Writer {
        command,
        config,
        out,
        written: Vec::new(),
    };
    match command {
        Command::Amplitude => amplitude(config, &mut w)?,
        Command::GroundState => ground_state_cmd(config, &mut w)?,
        Command::Fit => fit(config, &mut w)?,
        Command::FitFamily => family(config, &mut w)?,
        Command::Qpotential => qpotential(config, &mut w)?,
        Command::Instanton => instanton(config, &mut w)?,
        Command::Poincare => poincare(config, &mut w)?,
        Command::Hydrogen => hydrogen(config, &mut w)?,
    }
    Ok(w.written)
}

fn is_2d(config: &RunConfig) -> bool {
    config.action.kind == ActionKind::Quartic2d
}

fn need_1d(config: &RunConfig, what: &str) -> Result<(), CliError> {
    if is_2d(config) {
        Err(CliError::Config(format!("{what} needs a one-dimensional action")))
    } else {
        Ok(())
    }
}

fn need_2d(config: &RunConfig, what: &str) -> Result<(), CliError> {
    if is_2d(config) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} needs a quartic_2d action")))
    }
}

fn table_2d(config: &RunConfig, action: &ClassicalAction, t: f64) -> Result<AmplitudeTable2D, CliError> {
    let options = SplitStepOptions {
        min_steps: config.grid.min_steps_2d,
    };
    Ok(amplitude_table_2d(
        action,
        &config.grid_2d()?,
        &config.lattice(),
        t,
        config.fit.floor,
        &config.constants()?,
        &options,
    )?)
}

fn decomposition(config: &RunConfig, action: &ClassicalAction, t_min: f64) -> Result<SpectralDecomposition, CliError> {
    Ok(SpectralDecomposition::for_min_time(
        action,
        &config.grid_1d()?,
        t_min,
        &config.constants()?,
    )?)
}

fn amplitude(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let action = config.classical_action()?;
    let t = config.fit.t;
    if is_2d(config) {
        let table = table_2d(config, &action, t)?;
        return w.emit("amplitude_2d.csv", |b| {
            writeln!(b, "x_i,y_i,x_f,y_f,T,G")?;
            for (((xi, yi), (xf, yf)), g) in table.pairs.iter().zip(&table.values) {
                writeln!(b, "{xi},{yi},{xf},{yf},{t},{g}")?;
            }
            Ok(())
        });
    }
    let boundary = config.checked_boundary_grid()?;
    let decomp = decomposition(config, &action, t)?;
    let table = amplitude_table(&decomp, &boundary, t, config.fit.floor)?;
    w.emit("amplitude.csv", |b| table.write_csv(b))
}

/// Ground state on the configured grid; for radial actions the physical
/// `φ = u/r`.
fn solve_ground_state(config: &RunConfig, action: &ClassicalAction) -> Result<GroundState, CliError> {
    let decomp = spectral_decompose(action, &config.grid_1d()?, 1, &config.constants()?)?;
    let gs = ground_state(&decomp);
    Ok(match action.potential {
        PotentialSpec::Radial { .. } => gs.divided_by_radius(),
        _ => gs,
    })
}

fn ground_state_cmd(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    need_1d(config, "ground-state")?;
    let action = config.classical_action()?;
    let gs = solve_ground_state(config, &action)?;
    let x_max = gs.grid.point(gs.argmax());
    w.emit("ground_state.csv", |b| gs.write_csv(b))?;
    w.emit("ground_state.toml", |b| {
        writeln!(b, "e_gr = {:?}\nx_argmax = {:?}", gs.e_gr, x_max)
    })
}

fn report_bytes(fit: &FitResult, b: &mut Vec<u8>) -> std::io::Result<()> {
    let text = FitReport::from_result(fit)
        .and_then(|r| r.to_toml())
        .map_err(std::io::Error::other)?;
    b.extend_from_slice(text.as_bytes());
    Ok(())
}

fn fit_2d_at(config: &RunConfig, action: &ClassicalAction, t: f64) -> Result<FitResult, CliError> {
    let table = table_2d(config, action, t)?;
    let mut ansatz = QuantumActionParams2D::from_classical(action, TransitionTime::Finite(t))?;
    if config.fit.cross_terms {
        ansatz.cross_terms = Some(CrossTerms::default());
    }
    Ok(fit_quantum_action_2d(&table, &ansatz, &config.fit_config()?)?)
}

fn fit(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let action = config.classical_action()?;
    let t = config.fit.t;
    let result = if is_2d(config) {
        fit_2d_at(config, &action, t)?
    } else {
        let boundary = config.checked_boundary_grid()?;
        let decomp = decomposition(config, &action, t)?;
        let table = amplitude_table(&decomp, &boundary, t, config.fit.floor)?;
        let ansatz = QuantumActionParams1D::from_classical(&action, TransitionTime::Finite(t))?;
        fit_quantum_action(&table, &ansatz, &config.fit_config()?)?
    };
    w.emit("fit_report.toml", |b| report_bytes(&result, b))
}

fn family(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    need_1d(config, "fit-family")?;
    let action = config.classical_action()?;
    let points = fit_family(&action, &config.fit.t_list, &config.fit_config()?, &config.grid_1d()?)?;
    w.emit("fit_family.csv", |b| {
        writeln!(b, "T,m_tilde,v0,v1,v2,v3,v4,ln_z,chi2,n_pairs,converged")?;
        for p in &points {
            match p.outcome.as_ref().map(|f| (f, f.one_d())) {
                Ok((f, Some(q))) => {
                    let v = q.v_tilde;
                    writeln!(
                        b,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        p.transition_time,
                        q.m_tilde,
                        v[0],
                        v[1],
                        v[2],
                        v[3],
                        v[4],
                        q.ln_z,
                        f.chi2,
                        f.n_pairs,
                        f.converged
                    )?;
                }
                Ok((_, None)) => writeln!(b, "# T={}: not a 1-D fit", p.transition_time)?,
                Err(e) => writeln!(b, "# T={}: {e}", p.transition_time)?,
            }
        }
        Ok(())
    })?;
    // The table is written either way; a failed member still fails the run.
    match points.into_iter().find_map(|p| p.outcome.err()) {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn qpotential(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    need_1d(config, "qpotential")?;
    let action = config.classical_action()?;
    let constants = config.constants()?;
    let gs = solve_ground_state(config, &action)?;
    let profile = extract_quantum_potential(&gs, &constants)?;
    let residual = verify_transformation_law(&profile, &action, gs.e_gr, &constants)?;
    let wkb = wkb_ground_state(&profile, &constants)?;
    let l2 = l2_distance(&wkb, &restrict_to_window(&gs, &profile))?;
    w.emit("qpotential.csv", |b| profile.write_csv(b))?;
    w.emit("transformation.csv", |b| {
        writeln!(b, "x,residual")?;
        for (x, r) in residual.x.iter().zip(&residual.residual) {
            writeln!(b, "{x},{r}")?;
        }
        Ok(())
    })?;
    w.emit("wkb.csv", |b| wkb.write_csv(b))?;
    w.emit("qpotential.toml", |b| {
        writeln!(b, "e_gr = {:?}", gs.e_gr)?;
        writeln!(b, "x_star = {:?}", profile.x_star)?;
        writeln!(b, "x_argmax_psi = {:?}", gs.grid.point(gs.argmax()))?;
        writeln!(b, "transformation_max_abs = {:?}", residual.max_abs)?;
        writeln!(b, "transformation_x_at_max = {:?}", residual.x_at_max)?;
        writeln!(b, "wkb_l2 = {l2:?}")
    })
}

fn write_profile(w: &mut Writer, profile: &InstantonProfile, b_tilde: f64) -> Result<(), CliError> {
    w.emit("instanton_profile.csv", |b| profile.write_csv(b))?;
    w.emit("instanton.toml", |b| {
        writeln!(b, "a_tilde = {:?}", profile.a_tilde)?;
        writeln!(b, "b_tilde = {b_tilde:?}")?;
        writeln!(b, "kappa = {:?}", profile.kappa)?;
        writeln!(b, "m_tilde = {:?}", profile.m_tilde)
    })
}

fn instanton(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    if let Some(path) = &config.instanton.report {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let report = FitReport::parse(&text)?;
        let ActionParams::OneD(p) = report.params()? else {
            return Err(CliError::Config("instanton needs a 1-D fit report".into()));
        };
        let shape = fitted_shape(&p, &report.uncertainties)?;
        let profile = instanton_profile(&shape, p.m_tilde)?;
        return write_profile(w, &profile, shape.b_tilde);
    }
    need_1d(config, "instanton")?;
    let action = config.classical_action()?;
    let points = fit_family(&action, &config.fit.t_list, &config.fit_config()?, &config.grid_1d()?)?;
    let fam = instanton_family(&points);
    w.emit("instanton_family.csv", |b| fam.write_csv(b))?;
    // Profile of the largest T that still describes a double well.
    let last = points.iter().rev().find_map(|p| {
        let fit = p.outcome.as_ref().ok()?;
        let q = fit.one_d()?;
        fitted_shape(q, &fit.uncertainties).ok().map(|s| (s, q.m_tilde))
    });
    match last {
        Some((shape, m)) => write_profile(w, &instanton_profile(&shape, m)?, shape.b_tilde),
        None => Err(quantum_action::Error::NotDoubleWell("no member of the family is a double well".into()).into()),
    }
}

fn poincare(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    need_2d(config, "poincare")?;
    let action = config.classical_action()?;
    let c = &config.chaos;
    let params = if let Some(path) = &c.report {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        match FitReport::parse(&text)?.params()? {
            ActionParams::TwoD(p) => p,
            ActionParams::OneD(_) => return Err(CliError::Config("poincare needs a 2-D fit report".into())),
        }
    } else {
        match c.action {
            SectionAction::Classical => QuantumActionParams2D::from_classical(&action, TransitionTime::Finite(c.t))?,
            SectionAction::Quantum => {
                let result = fit_2d_at(config, &action, c.t)?;
                w.emit("quantum_action.toml", |b| report_bytes(&result, b))?;
                result.two_d().cloned().expect("2-D fit")
            }
        }
    };
    let section = poincare_section(&SectionConfig {
        params,
        energy: c.energy,
        n_seeds: c.n_seeds,
        seed: c.seed,
        t_max: c.t_max,
        dt: c.dt,
    })?;
    w.emit("poincare.csv", |b| section.write_csv(b))
}

fn hydrogen(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let constants = config.constants()?;
    let h = &config.hydrogen;
    let sectors =
        h.l.iter()
            .map(|&l| hydrogen_sector(l, &constants))
            .collect::<Result<Vec<_>, _>>()?;
    let report = hydrogen_report(&sectors)?;
    w.emit("hydrogen.toml", |b| b.write_all(report.as_bytes()))?;
    if !h.grid_check {
        return Ok(());
    }
    let grid = GridSpec1D::radial(h.r_max, h.n_points)?;
    let rows = sectors
        .par_iter()
        .map(|s| {
            let potential = PotentialSpec::radial(s.l, constants.mass_default, constants.charge_sq)?;
            let action = ClassicalAction::new(constants.mass_default, potential)?;
            let gs = ground_state(&spectral_decompose(&action, &grid, 1, &constants)?);
            let phi = gs.divided_by_radius();
            Ok((s.clone(), gs.e_gr, phi.grid.point(phi.argmax())))
        })
        .collect::<Result<Vec<_>, quantum_action::Error>>()?;
    w.emit("hydrogen_grid.csv", |b| {
        writeln!(b, "l,E_l,E_grid,r_star,r_argmax,spacing")?;
        for (s, e, r) in &rows {
            writeln!(b, "{},{},{},{},{},{}", s.l, s.e_l, e, s.r_star, r, grid.spacing())?;
        }
        Ok(())
    })
}
