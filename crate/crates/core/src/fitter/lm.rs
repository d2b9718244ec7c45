//! Levenberg–Marquardt on log amplitudes with `ln Z̃` projected out.
//!
//! Residuals are `r_p = √w_p (ln G_p + Σ̃_p/ħ − ln Z̃)` where `ln Z̃` is the
//! weighted mean of `ln G_p + Σ̃_p/ħ`; the Jacobian is projected the same way.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// One fitting problem: a set of boundary pairs whose classical action is a
/// function of the free parameter vector `θ`.
pub(crate) trait Problem: Sync {
    type Path: Clone + Send + Sync;

    fn ln_g(&self) -> &[f64];
    fn sqrt_w(&self) -> &[f64];
    fn hbar(&self) -> f64;
    /// Whether `θ` is admissible (e.g. positive mass).
    fn admissible(&self, theta: &[f64]) -> bool;
    /// `Σ̃` of pair `p`; `warm` is a previous solution used as initial guess.
    fn sigma(&self, theta: &[f64], p: usize, warm: Option<&Self::Path>) -> Result<(f64, Self::Path)>;
}

pub(crate) struct Evaluation<P> {
    pub paths: Vec<P>,
    pub residuals: Vec<f64>,
    pub ln_z: f64,
    pub chi2: f64,
}

pub(crate) fn evaluate<Q: Problem>(
    problem: &Q,
    theta: &[f64],
    warm: Option<&[Q::Path]>,
) -> Result<Evaluation<Q::Path>> {
    let n = problem.ln_g().len();
    let solved = (0..n)
        .into_par_iter()
        .map(|p| {
            let w = warm.map(|w| &w[p]);
            match problem.sigma(theta, p, w) {
                Ok(r) => Ok(r),
                Err(_) if w.is_some() => problem.sigma(theta, p, None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (sigmas, paths): (Vec<f64>, Vec<Q::Path>) = solved.into_iter().unzip();
    let (residuals, ln_z, chi2) = project(problem, &sigmas);
    Ok(Evaluation {
        paths,
        residuals,
        ln_z,
        chi2,
    })
}

fn project<Q: Problem>(problem: &Q, sigmas: &[f64]) -> (Vec<f64>, f64, f64) {
    let hbar = problem.hbar();
    let raw: Vec<f64> = problem.ln_g().iter().zip(sigmas).map(|(g, s)| g + s / hbar).collect();
    let ln_z = weighted_mean(problem.sqrt_w(), &raw);
    let residuals: Vec<f64> = raw
        .iter()
        .zip(problem.sqrt_w())
        .map(|(r, sw)| sw * (r - ln_z))
        .collect();
    let chi2 = residuals.iter().map(|r| r * r).sum();
    (residuals, ln_z, chi2)
}

fn weighted_mean(sqrt_w: &[f64], x: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (sw, v) in sqrt_w.iter().zip(x) {
        let w = sw * sw;
        num += w * v;
        den += w;
    }
    num / den
}

/// `∂(Σ̃_p/ħ)/∂θ_j` by central differences, warm-started from `paths`.
pub(crate) fn sigma_jacobian<Q: Problem>(
    problem: &Q,
    theta: &[f64],
    paths: &[Q::Path],
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let n = paths.len();
    let k = theta.len();
    let hbar = problem.hbar();
    let steps: Vec<f64> = theta.iter().map(|t| rel_step * t.abs().max(1.0)).collect();
    let rows = (0..n)
        .into_par_iter()
        .map(|p| {
            (0..k)
                .map(|j| {
                    let mut tp = theta.to_vec();
                    let mut tm = theta.to_vec();
                    tp[j] += steps[j];
                    tm[j] -= steps[j];
                    let sp = problem.sigma(&tp, p, Some(&paths[p]))?.0;
                    let sm = problem.sigma(&tm, p, Some(&paths[p]))?.0;
                    Ok((sp - sm) / (2.0 * steps[j] * hbar))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, k, |p, j| rows[p][j]))
}

/// Weighted and `ln Z̃`-projected Jacobian of the residuals.
pub(crate) fn projected(sqrt_w: &[f64], d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = d.clone();
    for j in 0..d.ncols() {
        let col: Vec<f64> = d.column(j).iter().copied().collect();
        let mean = weighted_mean(sqrt_w, &col);
        for p in 0..d.nrows() {
            out[(p, j)] = sqrt_w[p] * (d[(p, j)] - mean);
        }
    }
    out
}

/// Smallest singular-value ratio accepted by [`rank_check`]; well above the
/// relative noise of the finite-difference Jacobian.
pub(crate) const RANK_TOL: f64 = 1e-8;

/// Singular-value check of the projected Jacobian `j`, with columns scaled by
/// the norms of the weighted but unprojected derivatives `d` (a column that
/// only shifts `ln Z̃` then shows up as numerically zero). On rank deficiency
/// returns the null direction in parameter units (unit norm).
pub(crate) fn rank_check(j: &DMatrix<f64>, d: &DMatrix<f64>, sqrt_w: &[f64], names: &[String]) -> Result<()> {
    let norms: Vec<f64> = d
        .column_iter()
        .map(|c| c.iter().zip(sqrt_w).map(|(x, w)| (x * w).powi(2)).sum::<f64>().sqrt())
        .collect();
    if let Some(idx) = norms.iter().position(|n| *n == 0.0 || !n.is_finite()) {
        return Err(Error::DegenerateFit {
            condition: f64::INFINITY,
            null_direction: names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), if i == idx { 1.0 } else { 0.0 }))
                .collect(),
        });
    }
    let scaled = DMatrix::from_fn(j.nrows(), j.ncols(), |p, c| j[(p, c)] / norms[c]);
    let svd = scaled.svd(false, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let (imin, smin) = s.argmin();
    let ratio = smin / smax;
    if ratio < RANK_TOL {
        let vt = svd.v_t.expect("requested V");
        let mut dir: Vec<f64> = (0..j.ncols()).map(|c| vt[(imin, c)] / norms[c]).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|x| *x /= len);
        // Sign convention: largest component positive.
        let big = dir
            .iter()
            .copied()
            .fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if big < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        return Err(Error::DegenerateFit {
            condition: 1.0 / ratio,
            null_direction: names.iter().cloned().zip(dir).collect(),
        });
    }
    Ok(())
}

/// Round-off level of a single log-amplitude residual.
const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmSettings {
    pub max_iter: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub fd_step: f64,
}

pub(crate) struct LmOutcome {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Gauss–Newton predicted decrease `gᵀA⁻¹g`, i.e. the part of `χ²` that a
/// full step would remove.
fn predicted_decrease(a: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] *= 1.0 + 1e-12;
    }
    match m.cholesky() {
        Some(c) => g.dot(&c.solve(g)),
        None => f64::INFINITY,
    }
}

pub(crate) fn levenberg_marquardt<Q: Problem>(
    problem: &Q,
    theta0: &[f64],
    names: &[String],
    settings: &LmSettings,
) -> Result<LmOutcome> {
    let sqrt_w = problem.sqrt_w();
    let mut theta = theta0.to_vec();
    let mut current = evaluate(problem, &theta, None)?;
    let d = sigma_jacobian(problem, &theta, &current.paths, settings.fd_step)?;
    let mut jac = projected(sqrt_w, &d);
    rank_check(&jac, &d, sqrt_w, names)?;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        let r = DVector::from_vec(current.residuals.clone());
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        // Converged once a Gauss–Newton step could only remove a negligible
        // fraction of χ², or less than round-off in the log amplitudes.
        let pred = predicted_decrease(&a, &g);
        let noise = r.len() as f64 * ROUNDOFF * ROUNDOFF;
        if pred <= settings.gradient_tol * current.chi2 || pred <= noise {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..30 {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            small_step = delta
                .iter()
                .zip(&theta)
                .all(|(d, t)| d.abs() <= settings.step_tol * (t.abs() + settings.step_tol));
            if !problem.admissible(&trial) {
                lambda *= 4.0;
                continue;
            }
            match evaluate(problem, &trial, Some(&current.paths)) {
                Ok(next) if next.chi2 < current.chi2 => {
                    theta = trial;
                    current = next;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => {
                    if small_step {
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        if small_step {
            converged = true;
            if !accepted {
                break;
            }
        }
        if !accepted {
            break;
        }
        jac = projected(
            sqrt_w,
            &sigma_jacobian(problem, &theta, &current.paths, settings.fd_step)?,
        );
        if small_step {
            break;
        }
    }
    Ok(LmOutcome {
        theta,
        converged,
        iterations,
    })
}
