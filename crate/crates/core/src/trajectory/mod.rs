//! Classical boundary-value trajectories of a Euclidean action and real-time
//! Hamiltonian flow.
//!
//! Sign convention: the Euclidean equation of motion is `m ẍ = +V′(x)`, i.e.
//! motion in the inverted potential. The discrete action of a path sampled
//! at `n_t + 1` uniform times is
//! `S = Σ m (x_{k+1} − x_k)² / (2h) + h · trapezoid(V)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::LocalAction1D;

mod flow;
mod two_d;

pub use flow::{hamiltonian, integrate_realtime, write_flow_csv, FlowSample, Leapfrog, MAX_ENERGY_DRIFT};
pub use two_d::{
    action_value_2d, refine_path_2d, solve_euclidean_bvp_2d, BoundaryPair2D, LocalAction2D, TrajectorySolution2D,
};

pub const MIN_SLICES: usize = 64;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair {
    pub x_i: f64,
    pub x_f: f64,
    pub t: f64,
}

impl BoundaryPair {
    pub fn new(x_i: f64, x_f: f64, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("transition time must be > 0, got {t}")));
        }
        if !x_i.is_finite() || !x_f.is_finite() {
            return Err(Error::invalid("boundary points must be finite"));
        }
        Ok(BoundaryPair { x_i, x_f, t })
    }

    pub fn reversed(&self) -> Self {
        BoundaryPair {
            x_i: self.x_f,
            x_f: self.x_i,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    pub times: Vec<f64>,
    pub path: Vec<f64>,
    /// Mean of the per-node energy estimate `Ṽ(x) − (m̃/2)ẋ²` (with an
    /// `O(h²)` correction for the discretisation).
    pub epsilon: f64,
    /// Standard deviation of the per-node energy over `max(|ε|, ⟨|Ṽ| + T_kin⟩)`.
    pub epsilon_spread: f64,
    pub sigma: f64,
    /// Largest violation of the discrete equation of motion.
    pub residual: f64,
    pub iterations: usize,
    /// Whether the Hessian of the discrete action is positive definite at
    /// the solution (a local minimum rather than a saddle).
    pub is_minimum: bool,
    /// Number of distinct local minima of the discrete action among the
    /// converged starts (1 for a single-start solve).
    pub distinct_minima: usize,
}

impl TrajectorySolution {
    pub fn n_t(&self) -> usize {
        self.path.len() - 1
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x")?;
        for (t, x) in self.times.iter().zip(&self.path) {
            writeln!(w, "{t},{x}")?;
        }
        Ok(())
    }
}

fn discrete_action<A: LocalAction1D + ?Sized>(a: &A, path: &[f64], h: f64) -> f64 {
    let m = a.mass();
    let n = path.len() - 1;
    let kin: f64 = path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() * m / (2.0 * h);
    let mut pot = 0.5 * (a.v(path[0]) + a.v(path[n]));
    for x in &path[1..n] {
        pot += a.v(*x);
    }
    kin + h * pot
}

/// Gradient of the discrete action at the interior nodes.
fn gradient<A: LocalAction1D + ?Sized>(a: &A, path: &[f64], h: f64, g: &mut [f64]) {
    let m = a.mass();
    for k in 1..path.len() - 1 {
        g[k - 1] = m * (2.0 * path[k] - path[k - 1] - path[k + 1]) / h + h * a.dv(path[k]);
    }
}

/// Trapezoidal Euclidean action of a path; identical to the quantity the
/// solver minimises.
pub fn action_value<A: LocalAction1D + ?Sized>(trajectory: &TrajectorySolution, action: &A) -> f64 {
    let h = trajectory.times[1] - trajectory.times[0];
    discrete_action(action, &trajectory.path, h)
}

/// Per-interior-node Euclidean energy, corrected to `O(h⁴)` along exact
/// solutions of the discrete equation of motion.
pub fn energy_profile<A: LocalAction1D + ?Sized>(a: &A, path: &[f64], h: f64) -> Vec<f64> {
    let m = a.mass();
    (1..path.len() - 1)
        .map(|k| {
            let x = path[k];
            let p = m * (path[k + 1] - path[k - 1]) / (2.0 * h);
            let dv = a.dv(x);
            a.v(x) - p * p / (2.0 * m) + h * h * (dv * dv / (24.0 * m) + a.d2v(x) * p * p / (12.0 * m * m))
        })
        .collect()
}

/// Solves `H d = −g` for the tridiagonal Hessian `diag = 2m/h + hV″ + μ`,
/// `off = −m/h`. Returns `None` if some pivot is not positive.
fn newton_step(diag: &[f64], off: f64, g: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    for k in 0..n {
        let prev = if k > 0 { off * off / d[k - 1] } else { 0.0 };
        d[k] = diag[k] - prev;
        if !(d[k] > 0.0) {
            return None;
        }
        y[k] = -g[k] - if k > 0 { off / d[k - 1] * y[k - 1] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let next = if k + 1 < n { off * x[k + 1] } else { 0.0 };
        x[k] = (y[k] - next) / d[k];
    }
    Some(x)
}

/// Damped Newton descent on the discrete action starting from `initial`
/// (whose end points are the boundary values and whose length fixes `n_t`).
pub fn refine_path<A: LocalAction1D + ?Sized>(
    action: &A,
    boundary: &BoundaryPair,
    initial: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<TrajectorySolution> {
    let n_t = initial.len().saturating_sub(1);
    if n_t < MIN_SLICES {
        return Err(Error::invalid(format!("need n_t ≥ {MIN_SLICES}, got {n_t}")));
    }
    if !(action.mass() > 0.0) {
        return Err(Error::invalid("mass must be > 0"));
    }
    let h = boundary.t / n_t as f64;
    let m = action.mass();
    let mut path = initial.to_vec();
    path[0] = boundary.x_i;
    path[n_t] = boundary.x_f;
    let ni = n_t - 1;
    let mut g = vec![0.0; ni];
    let mut trial = path.clone();
    let mut trial_g = vec![0.0; ni];
    gradient(action, &path, h, &mut g);
    let mut s = discrete_action(action, &path, h);
    let residual_of = |g: &[f64]| g.iter().fold(0.0_f64, |a, x| a.max(x.abs())) / h;
    let mut residual = residual_of(&g);
    let tol = tol.max(roundoff_floor(m, h, &path));
    let mut best = residual;
    let mut iterations = 0;
    let mut stalled = 0;
    while residual >= tol && iterations < max_iter {
        iterations += 1;
        let base: Vec<f64> = (1..n_t).map(|k| 2.0 * m / h + h * action.d2v(path[k])).collect();
        let off = -m / h;
        let mut shift = 0.0;
        let step = loop {
            let diag: Vec<f64> = base.iter().map(|d| d + shift).collect();
            if let Some(step) = newton_step(&diag, off, &g) {
                break step;
            }
            shift = if shift == 0.0 { 1e-3 * m / h } else { shift * 4.0 };
            if !shift.is_finite() {
                return Err(Error::SolverNoConvergence {
                    iterations,
                    residual: best,
                });
            }
        };
        let slope: f64 = step.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for k in 1..n_t {
                trial[k] = path[k] + alpha * step[k - 1];
            }
            let s_new = discrete_action(action, &trial, h);
            if s_new.is_finite() && s_new <= s + 1e-4 * alpha * slope + 1e-13 * s.abs().max(1.0) {
                gradient(action, &trial, h, &mut trial_g);
                let r_new = residual_of(&trial_g);
                // Near the minimum the action is flat to round-off; only
                // accept such steps if they also reduce the residual.
                if s_new < s + 1e-4 * alpha * slope || r_new < residual {
                    std::mem::swap(&mut path, &mut trial);
                    std::mem::swap(&mut g, &mut trial_g);
                    s = s_new;
                    residual = r_new;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if !accepted || stalled > 10 {
            break;
        }
    }
    if !(residual < tol) {
        return Err(Error::SolverNoConvergence {
            iterations,
            residual: best.min(residual),
        });
    }
    let times = (0..=n_t)
        .map(|k| if k == n_t { boundary.t } else { k as f64 * h })
        .collect();
    let hess: Vec<f64> = (1..n_t).map(|k| 2.0 * m / h + h * action.d2v(path[k])).collect();
    let is_minimum = newton_step(&hess, -m / h, &g).is_some();
    let eps = energy_profile(action, &path, h);
    let (epsilon, epsilon_spread) = spread(action, &path, h, &eps);
    Ok(TrajectorySolution {
        times,
        sigma: s,
        path,
        epsilon,
        epsilon_spread,
        residual,
        iterations,
        is_minimum,
        distinct_minima: usize::from(is_minimum),
    })
}

/// Smallest residual resolvable in double precision: the discrete
/// acceleration `m(x_{k+1} − 2x_k + x_{k−1})/h²` carries a rounding error of
/// a few ulps of `m·max|x|/h²`.
pub fn roundoff_floor(m: f64, h: f64, path: &[f64]) -> f64 {
    let scale = path.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    64.0 * f64::EPSILON * m * scale / (h * h)
}

fn spread<A: LocalAction1D + ?Sized>(a: &A, path: &[f64], h: f64, eps: &[f64]) -> (f64, f64) {
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let m = a.mass();
    let scale = (1..path.len() - 1)
        .map(|k| {
            let v = (path[k + 1] - path[k - 1]) / (2.0 * h);
            a.v(path[k]).abs() + 0.5 * m * v * v
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt() / mean.abs().max(scale).max(f64::MIN_POSITIVE))
}

/// Local minima of `V` within `[lo, hi]`, located by bisection on `V′`.
fn local_minima<A: LocalAction1D + ?Sized>(a: &A, lo: f64, hi: f64) -> Vec<f64> {
    let samples = 400;
    let xs: Vec<f64> = (0..=samples)
        .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
        .collect();
    let mut out = Vec::new();
    for w in xs.windows(2) {
        let (mut l, mut r) = (w[0], w[1]);
        if !(a.dv(l) < 0.0 && a.dv(r) >= 0.0) {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (l + r);
            if a.dv(mid) < 0.0 {
                l = mid;
            } else {
                r = mid;
            }
        }
        out.push(0.5 * (l + r));
    }
    out
}

/// Path visiting `waypoints` in order: linear ramps over the first and last
/// quarter of the time window, equal dwell time at each waypoint and
/// linear hops in between.
fn waypoint_path(x_i: f64, x_f: f64, waypoints: &[f64], n_t: usize) -> Vec<f64> {
    let mut knots = vec![(0.0, x_i)];
    let inner = waypoints.len();
    for (j, w) in waypoints.iter().enumerate() {
        let a = 0.25 + 0.5 * j as f64 / inner as f64;
        let b = 0.25 + 0.5 * (j as f64 + 0.5) / inner as f64;
        knots.push((a, *w));
        knots.push((b.min(0.75), *w));
    }
    knots.push((0.75, *waypoints.last().unwrap_or(&x_f)));
    knots.push((1.0, x_f));
    (0..=n_t)
        .map(|k| {
            let s = k as f64 / n_t as f64;
            let j = knots.windows(2).position(|w| s <= w[1].0).unwrap_or(knots.len() - 2);
            let ((s0, x0), (s1, x1)) = (knots[j], knots[j + 1]);
            if s1 > s0 {
                x0 + (x1 - x0) * (s - s0) / (s1 - s0)
            } else {
                x1
            }
        })
        .collect()
}

/// Initial guesses for the multi-start: the straight line, plus paths that
/// dwell in each local minimum of `V` and in each ordered pair of minima.
pub fn initial_guesses<A: LocalAction1D + ?Sized>(action: &A, boundary: &BoundaryPair, n_t: usize) -> Vec<Vec<f64>> {
    let (x_i, x_f) = (boundary.x_i, boundary.x_f);
    let reach = x_i.abs().max(x_f.abs()).max(1.0);
    let minima = local_minima(action, x_i.min(x_f) - 2.0 * reach, x_i.max(x_f) + 2.0 * reach);
    let mut out = vec![waypoint_path(x_i, x_f, &[], n_t)];
    for m in &minima {
        out.push(waypoint_path(x_i, x_f, &[*m], n_t));
    }
    for a in &minima {
        for b in &minima {
            if a != b {
                out.push(waypoint_path(x_i, x_f, &[*a, *b], n_t));
            }
        }
    }
    out
}

/// Minimal-action solution over all multi-start guesses. Starts that fail
/// to converge are skipped; an error is returned only if all fail. Saddle
/// points are returned only when no start reached a local minimum.
pub fn solve_euclidean_bvp<A: LocalAction1D + ?Sized>(
    action: &A,
    boundary: &BoundaryPair,
    n_t: usize,
    tol: f64,
) -> Result<TrajectorySolution> {
    if n_t < MIN_SLICES {
        return Err(Error::invalid(format!("need n_t ≥ {MIN_SLICES}, got {n_t}")));
    }
    let mut found: Vec<TrajectorySolution> = Vec::new();
    let mut last_err = None;
    for guess in initial_guesses(action, boundary, n_t) {
        match refine_path(action, boundary, &guess, tol, DEFAULT_MAX_ITER) {
            Ok(sol) => {
                let scale = 1.0 + sol.path.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                let duplicate = found
                    .iter()
                    .any(|f| f.path.iter().zip(&sol.path).all(|(a, b)| (a - b).abs() <= 1e-6 * scale));
                if !duplicate {
                    found.push(sol);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let count = found.iter().filter(|f| f.is_minimum).count();
    let best = found.into_iter().reduce(|a, b| match (a.is_minimum, b.is_minimum) {
        (true, false) => a,
        (false, true) => b,
        _ if b.sigma < a.sigma => b,
        _ => a,
    });
    match best {
        Some(mut sol) => {
            sol.distinct_minima = count;
            Ok(sol)
        }
        None => Err(last_err.unwrap_or(Error::SolverNoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QuantumActionParams1D, TransitionTime};

    fn params(m: f64, v: &[f64]) -> QuantumActionParams1D {
        QuantumActionParams1D::new(m, v, TransitionTime::Finite(1.0)).unwrap()
    }

    #[test]
    fn harmonic_action_matches_mehler_exponent() {
        let p = params(1.0, &[0.0, 0.0, 0.5]);
        let b = BoundaryPair::new(0.0, 1.0, 1.0).unwrap();
        let sol = solve_euclidean_bvp(&p, &b, 512, 1e-9).unwrap();
        let t = 1.0_f64;
        let exact = 0.5 * t.cosh() / t.sinh();
        assert!((sol.sigma - exact).abs() < 1e-5, "{} vs {exact}", sol.sigma);
        assert_eq!(sol.path[0], 0.0);
        assert_eq!(sol.path[512], 1.0);
    }

    #[test]
    fn stationary_path_is_constant() {
        let p = params(1.3, &[0.7, 0.0, -1.0, 0.0, 0.5]);
        let b = BoundaryPair::new(0.0, 0.0, 2.0).unwrap();
        let sol = refine_path(&p, &b, &vec![0.0; 65], 1e-10, 50).unwrap();
        assert!(sol.path.iter().all(|x| *x == 0.0));
        assert!((sol.sigma - 0.7 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn free_action_is_straight_line() {
        let p = params(2.0, &[0.3]);
        let b = BoundaryPair::new(-1.0, 2.0, 1.5).unwrap();
        let sol = solve_euclidean_bvp(&p, &b, 64, 1e-10).unwrap();
        let want = 0.3 * 1.5 + 2.0 * 9.0 / (2.0 * 1.5);
        assert!((sol.sigma - want).abs() < 1e-12);
        assert!((sol.epsilon - (0.3 - 0.5 * 2.0 * 4.0)).abs() < 1e-10);
    }

    #[test]
    fn short_partition_rejected() {
        let p = params(1.0, &[0.0, 0.0, 0.5]);
        let b = BoundaryPair::new(0.0, 1.0, 1.0).unwrap();
        assert!(solve_euclidean_bvp(&p, &b, 10, 1e-9).is_err());
        assert!(BoundaryPair::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn double_well_finds_several_extremals_at_large_t() {
        let p = params(1.0, &[0.5, 0.0, -1.0, 0.0, 0.5]);
        let b = BoundaryPair::new(0.0, 0.0, 12.0).unwrap();
        let sol = solve_euclidean_bvp(&p, &b, 256, 1e-9).unwrap();
        // The path on top of the barrier is a saddle; the minima dip into
        // either well.
        assert!(sol.is_minimum);
        assert_eq!(sol.distinct_minima, 2);
        assert!(sol.sigma < 0.5 * 12.0);
        let mid = sol.path[128];
        assert!((mid.abs() - 1.0).abs() < 1e-3, "{mid}");
    }

    #[test]
    fn energy_is_constant_along_harmonic_path() {
        let p = params(1.0, &[0.0, 0.0, 0.5]);
        let b = BoundaryPair::new(0.0, 1.0, 1.0).unwrap();
        let sol = solve_euclidean_bvp(&p, &b, 64, 1e-10).unwrap();
        assert!(sol.epsilon_spread < 1e-6, "{}", sol.epsilon_spread);
    }
}
