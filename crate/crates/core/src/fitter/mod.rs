//! Fits of the quantum action `(m̃, Ṽ)` and the normalisation `ln Z̃` to a
//! table of Euclidean amplitudes at fixed transition time.
//!
//! The objective is `χ² = Σ_p w_p [ln G_p − ln Z̃ + Σ̃_p/ħ]²`. Only the sum
//! `ṽ0·T/ħ − ln Z̃` is observable, so `ṽ0` is held fixed by default and the
//! gauge is chosen afterwards (see [`Normalization`]).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActionParams, ClassicalAction, CrossTerms, PhysConstants, QuantumActionParams1D, QuantumActionParams2D,
    TransitionTime,
};
use crate::propagator::{amplitude_table, AmplitudeTable, AmplitudeTable2D, GridSpec1D, SpectralDecomposition};
use crate::trajectory::{
    refine_path, refine_path_2d, solve_euclidean_bvp, solve_euclidean_bvp_2d, BoundaryPair, BoundaryPair2D,
    DEFAULT_MAX_ITER, MIN_SLICES,
};

mod lm;
pub mod report;

use lm::{LmSettings, Problem};

pub use report::FitReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Stop when the Gauss–Newton step would reduce `χ²` by less than this
    /// fraction.
    pub gradient_tol: f64,
    /// Stop when no parameter moves by more than this relative amount.
    pub step_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iter: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-10,
        }
    }
}

/// How the unobservable combination `ṽ0·T/ħ − ln Z̃` is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `ṽ0` stays at the ansatz value, `ln Z̃` is fitted.
    #[default]
    Fitted,
    /// `Z̃ = 1`; everything goes into `ṽ0`.
    Unit,
    /// `Z̃` is the free-particle prefactor of mass `m̃`.
    FreeParticle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Boundary positions whose pairs make up the table (used when the fitter
    /// builds tables itself, e.g. in [`fit_family`]).
    pub boundary_grid: Vec<f64>,
    /// Relative amplitude cutoff, in `(0, 1)`.
    pub floor: f64,
    /// Per-pair weights; uniform if absent.
    pub weights: Option<Vec<f64>>,
    pub optimizer: OptimizerConfig,
    pub n_t: usize,
    /// Number of optimiser starts; starts after the first perturb the ansatz.
    pub multi_start: usize,
    pub bvp_tol: f64,
    pub normalization: Normalization,
    /// Relative step of the finite-difference Jacobian.
    pub fd_step: f64,
    pub constants: PhysConstants,
    /// Names of the free parameters; default is all but `v0`.
    pub free: Option<Vec<String>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            boundary_grid: (0..21).map(|i| -3.0 + 0.3 * i as f64).collect(),
            floor: 1e-10,
            weights: None,
            optimizer: OptimizerConfig::default(),
            n_t: 64,
            multi_start: 1,
            bvp_tol: 1e-10,
            normalization: Normalization::Fitted,
            fd_step: 1e-5,
            constants: PhysConstants::default(),
            free: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(Error::invalid(format!("floor must lie in (0, 1), got {}", self.floor)));
        }
        if self.optimizer.max_iter < 100 {
            return Err(Error::invalid(format!(
                "optimizer.max_iter must be ≥ 100, got {}",
                self.optimizer.max_iter
            )));
        }
        if !(self.optimizer.gradient_tol > 0.0) || !(self.optimizer.step_tol > 0.0) {
            return Err(Error::invalid("optimizer tolerances must be > 0"));
        }
        if self.n_t < MIN_SLICES {
            return Err(Error::invalid(format!("n_t must be ≥ {MIN_SLICES}, got {}", self.n_t)));
        }
        if self.multi_start == 0 {
            return Err(Error::invalid("multi_start must be ≥ 1"));
        }
        if !(self.bvp_tol > 0.0) || !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return Err(Error::invalid("bvp_tol and fd_step must be positive (fd_step < 0.1)"));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::invalid("weights must be positive and finite"));
            }
        }
        if self.boundary_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("boundary grid must be finite"));
        }
        self.constants.validate()
    }

    fn settings(&self) -> LmSettings {
        LmSettings {
            max_iter: self.optimizer.max_iter,
            gradient_tol: self.optimizer.gradient_tol,
            step_tol: self.optimizer.step_tol,
            fd_step: self.fd_step,
        }
    }

    fn sqrt_weights(&self, n: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0; n]),
            Some(w) if w.len() == n => Ok(w.iter().map(|x| x.sqrt()).collect()),
            Some(w) => Err(Error::invalid(format!("{} weights given for {n} pairs", w.len()))),
        }
    }

    fn free_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        match &self.free {
            None => Ok((0..names.len()).filter(|&i| names[i] != "v0").collect()),
            Some(list) => {
                let mut idx = Vec::new();
                for n in list {
                    let i = names
                        .iter()
                        .position(|x| x == n)
                        .ok_or_else(|| Error::invalid(format!("unknown parameter {n:?}")))?;
                    if !idx.contains(&i) {
                        idx.push(i);
                    }
                }
                idx.sort_unstable();
                if idx.is_empty() {
                    return Err(Error::invalid("no free parameters"));
                }
                Ok(idx)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ActionParams,
    pub chi2: f64,
    /// 1σ per parameter name, including `ln_z`; fixed parameters get 0.
    pub uncertainties: BTreeMap<String, f64>,
    pub n_pairs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub normalization: Normalization,
}

impl FitResult {
    pub fn transition_time(&self) -> TransitionTime {
        match &self.params {
            ActionParams::OneD(p) => p.transition_time,
            ActionParams::TwoD(p) => p.transition_time,
        }
    }

    pub fn one_d(&self) -> Option<&QuantumActionParams1D> {
        match &self.params {
            ActionParams::OneD(p) => Some(p),
            ActionParams::TwoD(_) => None,
        }
    }

    pub fn two_d(&self) -> Option<&QuantumActionParams2D> {
        match &self.params {
            ActionParams::TwoD(p) => Some(p),
            ActionParams::OneD(_) => None,
        }
    }

    /// Parameter values by name, including `ln_z`.
    pub fn values(&self) -> BTreeMap<String, f64> {
        let (names, vals, ln_z) = match &self.params {
            ActionParams::OneD(p) => (names_1d(), full_1d(p), p.ln_z),
            ActionParams::TwoD(p) => (names_2d(p.cross_terms.is_some()), full_2d(p), p.ln_z),
        };
        let mut out: BTreeMap<String, f64> = names.into_iter().zip(vals).collect();
        out.insert("ln_z".into(), ln_z);
        out
    }

    pub fn chi2_per_pair(&self) -> f64 {
        self.chi2 / self.n_pairs as f64
    }
}

fn names_1d() -> Vec<String> {
    QuantumActionParams1D::names().iter().map(|s| s.to_string()).collect()
}

fn full_1d(p: &QuantumActionParams1D) -> Vec<f64> {
    let mut v = vec![p.m_tilde];
    v.extend_from_slice(&p.v_tilde);
    v
}

fn names_2d(cross: bool) -> Vec<String> {
    let mut n: Vec<String> = QuantumActionParams2D::names().iter().map(|s| s.to_string()).collect();
    if cross {
        n.extend(CrossTerms::NAMES.iter().map(|s| s.to_string()));
    }
    n
}

fn full_2d(p: &QuantumActionParams2D) -> Vec<f64> {
    let mut v = vec![p.m_tilde, p.v_tilde_0, p.v_tilde_2, p.v_tilde_22, p.v_tilde_4];
    if let Some(c) = &p.cross_terms {
        v.extend_from_slice(&c.to_array());
    }
    v
}

/// Free-particle `ln Z̃` for mass `m` in `dim` dimensions.
pub fn free_particle_ln_z(m: f64, t: f64, hbar: f64, dim: usize) -> f64 {
    0.5 * dim as f64 * (m / (2.0 * std::f64::consts::PI * hbar * t)).ln()
}

trait Model: Problem {
    fn names(&self) -> &[String];
    fn free(&self) -> &[usize];
    fn full(&self) -> &[f64];
    fn dim(&self) -> usize;
    fn t(&self) -> f64;
    fn to_params(&self, full: &[f64], ln_z: f64) -> ActionParams;
    fn with_full(&self, full: &[f64]) -> Self;

    fn expand(&self, theta: &[f64]) -> Vec<f64> {
        let mut f = self.full().to_vec();
        for (i, t) in self.free().iter().zip(theta) {
            f[*i] = *t;
        }
        f
    }
}

struct Problem1D {
    pairs: Vec<BoundaryPair>,
    ln_g: Vec<f64>,
    sqrt_w: Vec<f64>,
    hbar: f64,
    names: Vec<String>,
    free: Vec<usize>,
    full: Vec<f64>,
    transition_time: f64,
    n_t: usize,
    tol: f64,
}

impl Problem1D {
    fn params(&self, theta: &[f64]) -> QuantumActionParams1D {
        let f = self.expand(theta);
        QuantumActionParams1D {
            m_tilde: f[0],
            v_tilde: [f[1], f[2], f[3], f[4], f[5]],
            transition_time: TransitionTime::Finite(self.transition_time),
            ln_z: 0.0,
        }
    }
}

impl Problem for Problem1D {
    type Path = Vec<f64>;

    fn ln_g(&self) -> &[f64] {
        &self.ln_g
    }
    fn sqrt_w(&self) -> &[f64] {
        &self.sqrt_w
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
    fn admissible(&self, theta: &[f64]) -> bool {
        let f = self.expand(theta);
        f.iter().all(|x| x.is_finite()) && f[0] > 0.0
    }
    fn sigma(&self, theta: &[f64], p: usize, warm: Option<&Vec<f64>>) -> Result<(f64, Vec<f64>)> {
        let params = self.params(theta);
        let sol = match warm {
            Some(path) => refine_path(&params, &self.pairs[p], path, self.tol, DEFAULT_MAX_ITER)?,
            None => solve_euclidean_bvp(&params, &self.pairs[p], self.n_t, self.tol)?,
        };
        Ok((sol.sigma, sol.path))
    }
}

impl Model for Problem1D {
    fn with_full(&self, full: &[f64]) -> Self {
        Problem1D {
            pairs: self.pairs.clone(),
            ln_g: self.ln_g.clone(),
            sqrt_w: self.sqrt_w.clone(),
            names: self.names.clone(),
            free: self.free.clone(),
            full: full.to_vec(),
            ..*self
        }
    }
    fn names(&self) -> &[String] {
        &self.names
    }
    fn free(&self) -> &[usize] {
        &self.free
    }
    fn full(&self) -> &[f64] {
        &self.full
    }
    fn dim(&self) -> usize {
        1
    }
    fn t(&self) -> f64 {
        self.transition_time
    }
    fn to_params(&self, full: &[f64], ln_z: f64) -> ActionParams {
        ActionParams::OneD(QuantumActionParams1D {
            m_tilde: full[0],
            v_tilde: [full[1], full[2], full[3], full[4], full[5]],
            transition_time: TransitionTime::Finite(self.transition_time),
            ln_z,
        })
    }
}

struct Problem2D {
    pairs: Vec<BoundaryPair2D>,
    ln_g: Vec<f64>,
    sqrt_w: Vec<f64>,
    hbar: f64,
    names: Vec<String>,
    free: Vec<usize>,
    full: Vec<f64>,
    transition_time: f64,
    n_t: usize,
    tol: f64,
}

fn params_2d(f: &[f64], t: f64, ln_z: f64) -> QuantumActionParams2D {
    QuantumActionParams2D {
        m_tilde: f[0],
        v_tilde_0: f[1],
        v_tilde_2: f[2],
        v_tilde_22: f[3],
        v_tilde_4: f[4],
        cross_terms: (f.len() > 5).then(|| CrossTerms::from_array([f[5], f[6], f[7], f[8], f[9]])),
        transition_time: TransitionTime::Finite(t),
        ln_z,
    }
}

impl Problem for Problem2D {
    type Path = Vec<(f64, f64)>;

    fn ln_g(&self) -> &[f64] {
        &self.ln_g
    }
    fn sqrt_w(&self) -> &[f64] {
        &self.sqrt_w
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
    fn admissible(&self, theta: &[f64]) -> bool {
        let f = self.expand(theta);
        let c = if f.len() > 5 { f[5] } else { 0.0 };
        f.iter().all(|x| x.is_finite()) && f[0] > 0.0 && c.abs() < f[0]
    }
    fn sigma(&self, theta: &[f64], p: usize, warm: Option<&Vec<(f64, f64)>>) -> Result<(f64, Vec<(f64, f64)>)> {
        let params = params_2d(&self.expand(theta), self.transition_time, 0.0);
        let sol = match warm {
            Some(path) => refine_path_2d(&params, &self.pairs[p], path, self.tol, DEFAULT_MAX_ITER)?,
            None => solve_euclidean_bvp_2d(&params, &self.pairs[p], self.n_t, self.tol)?,
        };
        Ok((sol.sigma, sol.path))
    }
}

impl Model for Problem2D {
    fn with_full(&self, full: &[f64]) -> Self {
        Problem2D {
            pairs: self.pairs.clone(),
            ln_g: self.ln_g.clone(),
            sqrt_w: self.sqrt_w.clone(),
            names: self.names.clone(),
            free: self.free.clone(),
            full: full.to_vec(),
            ..*self
        }
    }
    fn names(&self) -> &[String] {
        &self.names
    }
    fn free(&self) -> &[usize] {
        &self.free
    }
    fn full(&self) -> &[f64] {
        &self.full
    }
    fn dim(&self) -> usize {
        2
    }
    fn t(&self) -> f64 {
        self.transition_time
    }
    fn to_params(&self, full: &[f64], ln_z: f64) -> ActionParams {
        ActionParams::TwoD(params_2d(full, self.transition_time, ln_z))
    }
}

fn check_pairs(n_pairs: usize, n_free: usize, floor: f64) -> Result<()> {
    // ln Z̃ counts as a parameter too.
    if n_pairs < 3 * (n_free + 1) {
        return Err(Error::DegenerateTable { floor });
    }
    Ok(())
}

fn ln_values(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|g| {
            if *g > 0.0 && g.is_finite() {
                Ok(g.ln())
            } else {
                Err(Error::invalid(format!("amplitude must be positive, got {g}")))
            }
        })
        .collect()
}

fn table_time(t: f64) -> Result<f64> {
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::invalid(format!("transition time must be > 0, got {t}")))
    }
}

fn build_1d(table: &AmplitudeTable, ansatz: &QuantumActionParams1D, config: &FitConfig) -> Result<Problem1D> {
    config.validate()?;
    let t = table_time(table.transition_time)?;
    let names = names_1d();
    let free = config.free_indices(&names)?;
    let pairs = table
        .pairs
        .iter()
        .map(|&(a, b)| BoundaryPair::new(a, b, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Problem1D {
        ln_g: ln_values(&table.values)?,
        sqrt_w: config.sqrt_weights(pairs.len())?,
        pairs,
        hbar: config.constants.hbar,
        names,
        free,
        full: full_1d(ansatz),
        transition_time: t,
        n_t: config.n_t,
        tol: config.bvp_tol,
    })
}

fn build_2d(table: &AmplitudeTable2D, ansatz: &QuantumActionParams2D, config: &FitConfig) -> Result<Problem2D> {
    config.validate()?;
    ansatz.validate()?;
    let t = table_time(table.transition_time)?;
    let names = names_2d(ansatz.cross_terms.is_some());
    let free = config.free_indices(&names)?;
    let pairs = table
        .pairs
        .iter()
        .map(|&(a, b)| BoundaryPair2D::new(a, b, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Problem2D {
        ln_g: ln_values(&table.values)?,
        sqrt_w: config.sqrt_weights(pairs.len())?,
        pairs,
        hbar: config.constants.hbar,
        names,
        free,
        full: full_2d(ansatz),
        transition_time: t,
        n_t: config.n_t,
        tol: config.bvp_tol,
    })
}

/// Fits the 1-D quantum action to `table` starting from `ansatz`.
pub fn fit_quantum_action(
    table: &AmplitudeTable,
    ansatz: &QuantumActionParams1D,
    config: &FitConfig,
) -> Result<FitResult> {
    let problem = build_1d(table, ansatz, config)?;
    run_fit(&problem, table.floor, config)
}

/// Fits the symmetry-restricted 2-D ansatz (and its cross terms, if the
/// ansatz carries them) to `table`.
pub fn fit_quantum_action_2d(
    table: &AmplitudeTable2D,
    ansatz: &QuantumActionParams2D,
    config: &FitConfig,
) -> Result<FitResult> {
    let problem = build_2d(table, ansatz, config)?;
    run_fit(&problem, table.floor, config)
}

/// `χ²` of `params` against `table`, with `ln Z̃` eliminated and every
/// trajectory solved from scratch.
pub fn evaluate_chi2(table: &AmplitudeTable, params: &QuantumActionParams1D, config: &FitConfig) -> Result<f64> {
    let problem = build_1d(table, params, config)?;
    let theta = free_values(&problem);
    Ok(lm::evaluate(&problem, &theta, None)?.chi2)
}

pub fn evaluate_chi2_2d(table: &AmplitudeTable2D, params: &QuantumActionParams2D, config: &FitConfig) -> Result<f64> {
    let problem = build_2d(table, params, config)?;
    let theta = free_values(&problem);
    Ok(lm::evaluate(&problem, &theta, None)?.chi2)
}

fn free_values<M: Model>(m: &M) -> Vec<f64> {
    m.free().iter().map(|&i| m.full()[i]).collect()
}

fn perturbed(theta: &[f64], restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_6a_c7 + restart as u64);
    theta
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            // Keep the mass positive and well away from zero.
            if i == 0 && *t > 0.0 {
                t * (1.0 + 0.2 * u)
            } else if *t == 0.0 {
                0.02 * u
            } else {
                t * (1.0 + 0.2 * u)
            }
        })
        .collect()
}

fn run_fit<M: Model>(problem: &M, floor: f64, config: &FitConfig) -> Result<FitResult> {
    let free_names: Vec<String> = problem.free().iter().map(|&i| problem.names()[i].clone()).collect();
    let n = problem.ln_g().len();
    check_pairs(n, free_names.len(), floor)?;
    let theta0 = free_values(problem);
    if !problem.admissible(&theta0) {
        return Err(Error::invalid("ansatz is not admissible"));
    }
    let settings = config.settings();
    let mut best: Option<(f64, lm::LmOutcome)> = None;
    for restart in 0..config.multi_start {
        let start = if restart == 0 {
            theta0.clone()
        } else {
            let p = perturbed(&theta0, restart);
            if !problem.admissible(&p) {
                continue;
            }
            p
        };
        let outcome = match lm::levenberg_marquardt(problem, &start, &free_names, &settings) {
            Ok(o) => o,
            Err(e @ Error::DegenerateFit { .. }) => return Err(e),
            Err(e) if restart == 0 => return Err(e),
            Err(_) => continue,
        };
        let chi2 = lm::evaluate(problem, &outcome.theta, None)?.chi2;
        if best.as_ref().is_none_or(|(c, _)| chi2 < *c) {
            best = Some((chi2, outcome));
        }
    }
    let (_, outcome) = best.ok_or_else(|| Error::invalid("no admissible start"))?;
    finish(problem, outcome, config)
}

fn finish<M: Model>(problem: &M, outcome: lm::LmOutcome, config: &FitConfig) -> Result<FitResult> {
    let theta = &outcome.theta;
    let eval = lm::evaluate(problem, theta, None)?;
    let d = lm::sigma_jacobian(problem, theta, &eval.paths, config.fd_step)?;
    let free_names: Vec<String> = problem.free().iter().map(|&i| problem.names()[i].clone()).collect();
    lm::rank_check(&lm::projected(problem.sqrt_w(), &d), &d, problem.sqrt_w(), &free_names)?;

    // Covariance of (θ, ln Z̃) from the augmented Jacobian.
    let n = d.nrows();
    let k = d.ncols();
    let sw = problem.sqrt_w();
    let j_aug = DMatrix::from_fn(n, k + 1, |p, c| if c < k { sw[p] * d[(p, c)] } else { -sw[p] });
    let dof = (n - k - 1) as f64;
    let cov = (j_aug.transpose() * &j_aug)
        .try_inverse()
        .map(|m| m * (eval.chi2 / dof))
        .unwrap_or_else(|| DMatrix::from_element(k + 1, k + 1, f64::INFINITY));
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();

    let mut full = problem.expand(theta);
    let mut ln_z = eval.ln_z;
    let mut unc: BTreeMap<String, f64> = problem.names().iter().map(|n| (n.clone(), 0.0)).collect();
    for (c, &i) in problem.free().iter().enumerate() {
        unc.insert(problem.names()[i].clone(), sd(c));
    }
    let mut ln_z_sd = sd(k);
    let hbar = config.constants.hbar;
    let t = problem.t();
    // v0 is index 1 in both layouts.
    match config.normalization {
        Normalization::Fitted => {}
        Normalization::Unit => {
            full[1] -= hbar * ln_z / t;
            ln_z = 0.0;
            unc.insert("v0".into(), hbar / t * ln_z_sd);
            ln_z_sd = 0.0;
        }
        Normalization::FreeParticle => {
            let dim = problem.dim();
            let ln_z_fp = free_particle_ln_z(full[0], t, hbar, dim);
            full[1] += hbar / t * (ln_z_fp - ln_z);
            ln_z = ln_z_fp;
            // Linear propagation through m̃ (if free) and the fitted ln Z̃.
            let dfp_dm = 0.5 * dim as f64 / full[0];
            let m_col = problem.free().iter().position(|&i| i == 0);
            let var_v0 = match m_col {
                Some(c) => dfp_dm * dfp_dm * cov[(c, c)] - 2.0 * dfp_dm * cov[(c, k)] + cov[(k, k)],
                None => cov[(k, k)],
            };
            unc.insert("v0".into(), hbar / t * var_v0.max(0.0).sqrt());
            ln_z_sd = m_col.map_or(0.0, |c| dfp_dm.abs() * sd(c));
        }
    }
    unc.insert("ln_z".into(), ln_z_sd);
    let params = problem.to_params(&full, ln_z);

    // Report the χ² of exactly the reported parameters, solved cold.
    let chi2 = chi2_of_full(problem, &full)?;
    Ok(FitResult {
        params,
        chi2,
        uncertainties: unc,
        n_pairs: n,
        converged: outcome.converged,
        iterations: outcome.iterations,
        normalization: config.normalization,
    })
}

/// `χ²` at a full parameter vector, solved cold; identical to
/// [`evaluate_chi2`] on the corresponding parameters.
fn chi2_of_full<M: Model>(problem: &M, full: &[f64]) -> Result<f64> {
    let rebuilt = problem.with_full(full);
    let theta = free_values(&rebuilt);
    Ok(lm::evaluate(&rebuilt, &theta, None)?.chi2)
}

/// One entry of a parameter flow over transition times.
#[derive(Debug)]
pub struct FamilyPoint {
    pub transition_time: f64,
    pub outcome: Result<FitResult>,
}

/// Fits at each `T` of an ascending list, warm-starting from the previous
/// successful fit (the first from the classical action). A per-`T` fit error
/// is recorded and the family continues; a degenerate table is recorded and
/// ends the family.
pub fn fit_family(
    action: &ClassicalAction,
    t_list: &[f64],
    config: &FitConfig,
    grid: &GridSpec1D,
) -> Result<Vec<FamilyPoint>> {
    config.validate()?;
    if t_list.is_empty() {
        return Err(Error::invalid("empty list of transition times"));
    }
    if t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("transition times must be positive"));
    }
    if t_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("transition times must be strictly ascending"));
    }
    let decomp = SpectralDecomposition::for_min_time(action, grid, t_list[0], &config.constants)?;
    let mut ansatz = QuantumActionParams1D::from_classical(action, TransitionTime::Finite(t_list[0]))?;
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let table = match amplitude_table(&decomp, &config.boundary_grid, t, config.floor) {
            Ok(table) => table,
            Err(e @ Error::DegenerateTable { .. }) => {
                out.push(FamilyPoint {
                    transition_time: t,
                    outcome: Err(e),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let mut start = ansatz.clone();
        start.transition_time = TransitionTime::Finite(t);
        // Warm starts carry only the observable part; re-pin v0 so the gauge
        // of the previous fit does not leak into this one.
        start.v_tilde[0] = ansatz_v0(action);
        let outcome = match fit_quantum_action(&table, &start, config) {
            Err(e @ Error::DegenerateTable { .. }) => {
                out.push(FamilyPoint {
                    transition_time: t,
                    outcome: Err(e),
                });
                break;
            }
            other => other,
        };
        if let Ok(fit) = &outcome {
            if let Some(p) = fit.one_d() {
                ansatz = p.clone();
            }
        }
        out.push(FamilyPoint {
            transition_time: t,
            outcome,
        });
    }
    Ok(out)
}

fn ansatz_v0(action: &ClassicalAction) -> f64 {
    match &action.potential {
        crate::model::PotentialSpec::Polynomial1D { coeffs } => coeffs.first().copied().unwrap_or(0.0),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests;
