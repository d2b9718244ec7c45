//! Run configuration: one TOML file with dotted section prefixes
//! (`action.kind = "polynomial"`, `fit.t = 0.5`, ...). Unknown keys are
//! rejected and every numeric field is range-checked before a run starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quantum_action::fitter::{FitConfig, Normalization, OptimizerConfig};
use quantum_action::propagator::{Grid2D, GridSpec1D};
use quantum_action::{ClassicalAction, PhysConstants, PotentialSpec};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Execution environment; never echoed into outputs.
    #[serde(default, skip_serializing)]
    pub run: RunSection,
    pub action: ActionSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub instanton: InstantonSection,
    #[serde(default)]
    pub chaos: ChaosSection,
    #[serde(default)]
    pub hydrogen: HydrogenSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    #[default]
    Polynomial,
    Radial,
    #[serde(rename = "quartic_2d")]
    Quartic2d,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    pub kind: ActionKind,
    #[serde(default = "one")]
    pub mass: f64,
    /// Polynomial coefficients `c_0 … c_4`.
    pub coeffs: Option<Vec<f64>>,
    /// Angular momentum of a radial action.
    pub l: Option<u32>,
    pub v0: Option<f64>,
    pub v2: Option<f64>,
    pub v22: Option<f64>,
    pub v4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub hbar: f64,
    pub charge_sq: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        ConstantsSection {
            hbar: 1.0,
            charge_sq: 1.0,
        }
    }
}

/// 1-D box `[x_min, x_max]` (`[0, x_max]` for radial actions) and the 2-D
/// periodic box `[−half_width, half_width)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub half_width: f64,
    pub n_2d: usize,
    pub min_steps_2d: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x_min: -6.0,
            x_max: 6.0,
            n_points: 1024,
            half_width: 7.0,
            n_2d: 64,
            min_steps_2d: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub t: f64,
    pub t_list: Vec<f64>,
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub boundary_points: usize,
    /// Side of the square lattice of 2-D boundary points on
    /// `[−lattice_half_width, lattice_half_width]²`.
    pub lattice_points: usize,
    pub lattice_half_width: f64,
    pub floor: f64,
    pub n_t: usize,
    pub multi_start: usize,
    pub bvp_tol: f64,
    pub fd_step: f64,
    pub max_iter: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub normalization: Normalization,
    pub cross_terms: bool,
    pub free: Option<Vec<String>>,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        FitSection {
            t: 0.5,
            t_list: vec![0.5],
            boundary_min: -3.0,
            boundary_max: 3.0,
            boundary_points: 21,
            lattice_points: 5,
            lattice_half_width: 1.5,
            floor: f.floor,
            n_t: f.n_t,
            multi_start: f.multi_start,
            bvp_tol: f.bvp_tol,
            fd_step: f.fd_step,
            max_iter: f.optimizer.max_iter,
            gradient_tol: f.optimizer.gradient_tol,
            step_tol: f.optimizer.step_tol,
            normalization: f.normalization,
            cross_terms: false,
            free: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstantonSection {
    /// Saved fit report to draw the profile from instead of fitting.
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionAction {
    #[default]
    Classical,
    Quantum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    pub action: SectionAction,
    /// Transition time of the quantum action.
    pub t: f64,
    pub energy: f64,
    pub n_seeds: usize,
    pub seed: u64,
    pub t_max: f64,
    pub dt: f64,
    pub report: Option<PathBuf>,
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection {
            action: SectionAction::Classical,
            t: 4.5,
            energy: 10.0,
            n_seeds: 8,
            seed: 0,
            t_max: 1000.0,
            dt: 1e-3,
            report: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydrogenSection {
    pub l: Vec<u32>,
    /// Also diagonalise each sector on a radial grid.
    pub grid_check: bool,
    pub r_max: f64,
    pub n_points: usize,
}

impl Default for HydrogenSection {
    fn default() -> Self {
        HydrogenSection {
            l: vec![1, 2, 3, 4],
            grid_check: true,
            r_max: 150.0,
            n_points: 8192,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(bad(msg()))
    }
}

impl RunConfig {
    /// Parses and validates; errors carry the offending line where the TOML
    /// parser reports one.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => bad(format!("line {l}: {}", e.message())),
                None => bad(e.message().to_string()),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        // Referenced files are resolved against the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.instanton.report, &mut config.chaos.report]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.check_files()?;
        Ok(config)
    }

    pub fn check_files(&self) -> Result<(), CliError> {
        for p in [&self.instanton.report, &self.chaos.report].into_iter().flatten() {
            check(p.is_file(), || {
                format!("referenced file {} does not exist", p.display())
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.classical_action()?;
        self.constants()?;
        let g = &self.grid;
        GridSpec1D::new(g.x_min, g.x_max, g.n_points).map_err(|e| bad(format!("grid: {e}")))?;
        Grid2D::new(g.half_width, g.n_2d).map_err(|e| bad(format!("grid: {e}")))?;
        check(g.min_steps_2d >= 1, || "grid.min_steps_2d must be ≥ 1".into())?;

        let f = &self.fit;
        let positive = |t: f64| t > 0.0 && t.is_finite();
        check(positive(f.t), || format!("fit.t must be > 0, got {}", f.t))?;
        check(!f.t_list.is_empty(), || "fit.t_list must not be empty".into())?;
        check(f.t_list.iter().all(|t| positive(*t)), || {
            "fit.t_list entries must be > 0".into()
        })?;
        check(f.t_list.windows(2).all(|w| w[1] > w[0]), || {
            "fit.t_list must be strictly ascending".into()
        })?;
        check(
            f.boundary_min.is_finite() && f.boundary_max.is_finite() && f.boundary_min < f.boundary_max,
            || "fit.boundary_min must be below fit.boundary_max".into(),
        )?;
        check(f.boundary_points >= 2, || "fit.boundary_points must be ≥ 2".into())?;
        check(f.lattice_points >= 2, || "fit.lattice_points must be ≥ 2".into())?;
        check(
            positive(f.lattice_half_width) && f.lattice_half_width < g.half_width,
            || "fit.lattice_half_width must lie in (0, grid.half_width)".into(),
        )?;
        self.fit_config()?.validate().map_err(|e| bad(format!("fit: {e}")))?;

        let c = &self.chaos;
        check(c.energy.is_finite(), || "chaos.energy must be finite".into())?;
        check(c.n_seeds >= 1, || "chaos.n_seeds must be ≥ 1".into())?;
        check(positive(c.t) && positive(c.t_max), || {
            "chaos.t and chaos.t_max must be > 0".into()
        })?;
        check(positive(c.dt) && c.dt <= c.t_max, || {
            "chaos.dt must lie in (0, t_max]".into()
        })?;

        let h = &self.hydrogen;
        check(!h.l.is_empty() && h.l.iter().all(|l| (1..=20).contains(l)), || {
            "hydrogen.l entries must lie in 1..=20".into()
        })?;
        GridSpec1D::radial(h.r_max, h.n_points).map_err(|e| bad(format!("hydrogen: {e}")))?;
        Ok(())
    }

    pub fn constants(&self) -> Result<PhysConstants, CliError> {
        let c = PhysConstants {
            hbar: self.constants.hbar,
            mass_default: self.action.mass,
            charge_sq: self.constants.charge_sq,
        };
        c.validate().map_err(|e| bad(format!("constants: {e}")))?;
        Ok(c)
    }

    pub fn classical_action(&self) -> Result<ClassicalAction, CliError> {
        let a = &self.action;
        let potential = match a.kind {
            ActionKind::Polynomial => {
                check(a.l.is_none() && a.v22.is_none(), || {
                    "polynomial actions take action.coeffs only".into()
                })?;
                let coeffs = a.coeffs.as_ref().ok_or_else(|| bad("action.coeffs is required"))?;
                PotentialSpec::polynomial(coeffs).map_err(|e| bad(format!("action: {e}")))?
            }
            ActionKind::Radial => {
                check(a.coeffs.is_none() && a.v22.is_none(), || {
                    "radial actions take action.l only".into()
                })?;
                let l = a.l.ok_or_else(|| bad("action.l is required"))?;
                PotentialSpec::radial(l, a.mass, self.constants.charge_sq).map_err(|e| bad(format!("action: {e}")))?
            }
            ActionKind::Quartic2d => {
                check(a.coeffs.is_none() && a.l.is_none(), || {
                    "quartic_2d actions take action.v0, v2, v22, v4".into()
                })?;
                PotentialSpec::quartic_2d(
                    a.v0.unwrap_or(0.0),
                    a.v2.ok_or_else(|| bad("action.v2 is required"))?,
                    a.v22.unwrap_or(0.0),
                    a.v4.unwrap_or(0.0),
                )
            }
        };
        if a.kind != ActionKind::Quartic2d {
            check(a.v0.is_none() && a.v2.is_none() && a.v4.is_none(), || {
                "action.v0/v2/v4 belong to quartic_2d actions".into()
            })?;
        }
        ClassicalAction::new(a.mass, potential).map_err(|e| bad(format!("action: {e}")))
    }

    pub fn grid_1d(&self) -> Result<GridSpec1D, CliError> {
        let g = &self.grid;
        let grid = match self.action.kind {
            ActionKind::Radial => GridSpec1D::radial(g.x_max, g.n_points),
            _ => GridSpec1D::new(g.x_min, g.x_max, g.n_points),
        };
        grid.map_err(|e| bad(format!("grid: {e}")))
    }

    pub fn grid_2d(&self) -> Result<Grid2D, CliError> {
        Grid2D::new(self.grid.half_width, self.grid.n_2d).map_err(|e| bad(format!("grid: {e}")))
    }

    /// Boundary grid of 1-D amplitude tables; radial actions need it inside
    /// `r > 0`.
    pub fn checked_boundary_grid(&self) -> Result<Vec<f64>, CliError> {
        check(
            self.action.kind != ActionKind::Radial || self.fit.boundary_min > 0.0,
            || "fit.boundary_min must be > 0 for radial actions".into(),
        )?;
        Ok(self.boundary_grid())
    }

    pub fn boundary_grid(&self) -> Vec<f64> {
        let f = &self.fit;
        let n = f.boundary_points;
        (0..n)
            .map(|i| f.boundary_min + (f.boundary_max - f.boundary_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn lattice(&self) -> Vec<(f64, f64)> {
        let (n, l) = (self.fit.lattice_points, self.fit.lattice_half_width);
        let coord = |i: usize| -l + 2.0 * l * i as f64 / (n - 1) as f64;
        (0..n).flat_map(|i| (0..n).map(move |j| (coord(i), coord(j)))).collect()
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let f = &self.fit;
        Ok(FitConfig {
            boundary_grid: self.boundary_grid(),
            floor: f.floor,
            weights: None,
            optimizer: OptimizerConfig {
                max_iter: f.max_iter,
                gradient_tol: f.gradient_tol,
                step_tol: f.step_tol,
            },
            n_t: f.n_t,
            multi_start: f.multi_start,
            bvp_tol: f.bvp_tol,
            normalization: f.normalization,
            fd_step: f.fd_step,
            constants: self.constants()?,
            free: f.free.clone(),
        })
    }

    /// Flat `section.key = value` lines of every echoed field, in a fixed
    /// order.
    pub fn echo_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("run config serialises");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        v => out.push(format!("{prefix} = {v}")),
    }
}
