//! Two-dimensional Euclidean boundary-value problem, used to fit the 2-D
//! ansatz. The kinetic term may carry an `ẋẏ` coupling:
//! `L = (m/2)(ẋ² + ẏ²) + c ẋẏ + V(x, y)`.

use crate::error::{Error, Result};
use crate::model::QuantumActionParams2D;

use super::{DEFAULT_MAX_ITER, MIN_SLICES};

pub trait LocalAction2D {
    /// `(m, c)`: the kinetic matrix is `[[m, c], [c, m]]`.
    fn kinetic(&self) -> (f64, f64);
    fn v(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> (f64, f64);
    /// `(∂xx, ∂yy, ∂xy)`.
    fn hess(&self, x: f64, y: f64) -> (f64, f64, f64);
}

/// The canonical potential plus, when present, the diagnostic cross terms.
impl LocalAction2D for QuantumActionParams2D {
    fn kinetic(&self) -> (f64, f64) {
        (self.m_tilde, self.cross_terms.map_or(0.0, |c| c.kinetic_xy))
    }

    fn v(&self, x: f64, y: f64) -> f64 {
        let base = QuantumActionParams2D::v(self, x, y);
        match self.cross_terms {
            None => base,
            Some(c) => {
                let (x2, y2) = (x * x, y * y);
                base + c.xy * x * y
                    + c.xy3_x3y * x * y * (x2 + y2)
                    + c.x2y4_x4y2 * x2 * y2 * (x2 + y2)
                    + c.x4y4 * x2 * x2 * y2 * y2
            }
        }
    }

    fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let (gx, gy) = QuantumActionParams2D::grad(self, x, y);
        match self.cross_terms {
            None => (gx, gy),
            Some(c) => {
                let (x2, y2) = (x * x, y * y);
                let cx = c.xy * y
                    + c.xy3_x3y * (y * y2 + 3.0 * x2 * y)
                    + c.x2y4_x4y2 * (2.0 * x * y2 * y2 + 4.0 * x * x2 * y2)
                    + c.x4y4 * 4.0 * x * x2 * y2 * y2;
                let cy = c.xy * x
                    + c.xy3_x3y * (x * x2 + 3.0 * x * y2)
                    + c.x2y4_x4y2 * (2.0 * y * x2 * x2 + 4.0 * y * y2 * x2)
                    + c.x4y4 * 4.0 * y * y2 * x2 * x2;
                (gx + cx, gy + cy)
            }
        }
    }

    fn hess(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (x2, y2) = (x * x, y * y);
        let hxx = 2.0 * self.v_tilde_2 + 2.0 * self.v_tilde_22 * y2 + 12.0 * self.v_tilde_4 * x2;
        let hyy = 2.0 * self.v_tilde_2 + 2.0 * self.v_tilde_22 * x2 + 12.0 * self.v_tilde_4 * y2;
        let hxy = 4.0 * self.v_tilde_22 * x * y;
        match self.cross_terms {
            None => (hxx, hyy, hxy),
            Some(c) => (
                hxx + c.xy3_x3y * 6.0 * x * y
                    + c.x2y4_x4y2 * (2.0 * y2 * y2 + 12.0 * x2 * y2)
                    + c.x4y4 * 12.0 * x2 * y2 * y2,
                hyy + c.xy3_x3y * 6.0 * x * y
                    + c.x2y4_x4y2 * (2.0 * x2 * x2 + 12.0 * x2 * y2)
                    + c.x4y4 * 12.0 * x2 * x2 * y2,
                hxy + c.xy
                    + c.xy3_x3y * 3.0 * (x2 + y2)
                    + c.x2y4_x4y2 * 8.0 * x * y * (x2 + y2)
                    + c.x4y4 * 16.0 * x * x2 * y * y2,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair2D {
    pub q_i: (f64, f64),
    pub q_f: (f64, f64),
    pub t: f64,
}

impl BoundaryPair2D {
    pub fn new(q_i: (f64, f64), q_f: (f64, f64), t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("transition time must be > 0, got {t}")));
        }
        Ok(BoundaryPair2D { q_i, q_f, t })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution2D {
    pub times: Vec<f64>,
    pub path: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub sigma: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn discrete_action<A: LocalAction2D + ?Sized>(a: &A, path: &[(f64, f64)], h: f64) -> f64 {
    let (m, c) = a.kinetic();
    let n = path.len() - 1;
    let kin: f64 = path
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            0.5 * m * (dx * dx + dy * dy) + c * dx * dy
        })
        .sum::<f64>()
        / h;
    let mut pot = 0.5 * (a.v(path[0].0, path[0].1) + a.v(path[n].0, path[n].1));
    for q in &path[1..n] {
        pot += a.v(q.0, q.1);
    }
    kin + h * pot
}

fn gradient<A: LocalAction2D + ?Sized>(a: &A, path: &[(f64, f64)], h: f64, g: &mut [(f64, f64)]) {
    let (m, c) = a.kinetic();
    for k in 1..path.len() - 1 {
        let lx = (2.0 * path[k].0 - path[k - 1].0 - path[k + 1].0) / h;
        let ly = (2.0 * path[k].1 - path[k - 1].1 - path[k + 1].1) / h;
        let (vx, vy) = a.grad(path[k].0, path[k].1);
        g[k - 1] = (m * lx + c * ly + h * vx, c * lx + m * ly + h * vy);
    }
}

pub fn action_value_2d<A: LocalAction2D + ?Sized>(trajectory: &TrajectorySolution2D, action: &A) -> f64 {
    let h = trajectory.times[1] - trajectory.times[0];
    discrete_action(action, &trajectory.path, h)
}

type Sym2 = (f64, f64, f64); // (a, d, b) for [[a, b], [b, d]]

fn inv2(s: Sym2) -> Option<Sym2> {
    let (a, d, b) = s;
    let det = a * d - b * b;
    if !(a > 0.0 && det > 0.0) {
        return None;
    }
    Some((d / det, a / det, -b / det))
}

fn mul2(s: Sym2, v: (f64, f64)) -> (f64, f64) {
    (s.0 * v.0 + s.2 * v.1, s.2 * v.0 + s.1 * v.1)
}

/// Block LDLᵀ solve of `H d = −g` with diagonal blocks `diag[k]` and the
/// constant off-diagonal block `off`. `None` if `H` is not positive definite.
fn newton_step(diag: &[Sym2], off: Sym2, g: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    let n = diag.len();
    let mut s_inv: Vec<Sym2> = Vec::with_capacity(n);
    let mut y: Vec<(f64, f64)> = Vec::with_capacity(n);
    for k in 0..n {
        let (mut s, mut rhs) = (diag[k], (-g[k].0, -g[k].1));
        if k > 0 {
            // s -= B S⁻¹ B, rhs -= B S⁻¹ y
            let p = s_inv[k - 1];
            let b = off;
            let bp = [
                [b.0 * p.0 + b.2 * p.2, b.0 * p.2 + b.2 * p.1],
                [b.2 * p.0 + b.1 * p.2, b.2 * p.2 + b.1 * p.1],
            ];
            let bpb = (
                bp[0][0] * b.0 + bp[0][1] * b.2,
                bp[1][0] * b.2 + bp[1][1] * b.1,
                bp[0][0] * b.2 + bp[0][1] * b.1,
            );
            s = (s.0 - bpb.0, s.1 - bpb.1, s.2 - bpb.2);
            let yv = y[k - 1];
            rhs.0 -= bp[0][0] * yv.0 + bp[0][1] * yv.1;
            rhs.1 -= bp[1][0] * yv.0 + bp[1][1] * yv.1;
        }
        s_inv.push(inv2(s)?);
        y.push(rhs);
    }
    let mut x = vec![(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut r = y[k];
        if k + 1 < n {
            let bx = mul2(off, x[k + 1]);
            r = (r.0 - bx.0, r.1 - bx.1);
        }
        x[k] = mul2(s_inv[k], r);
    }
    Some(x)
}

pub fn refine_path_2d<A: LocalAction2D + ?Sized>(
    action: &A,
    boundary: &BoundaryPair2D,
    initial: &[(f64, f64)],
    tol: f64,
    max_iter: usize,
) -> Result<TrajectorySolution2D> {
    let n_t = initial.len().saturating_sub(1);
    if n_t < MIN_SLICES {
        return Err(Error::invalid(format!("need n_t ≥ {MIN_SLICES}, got {n_t}")));
    }
    let (m, c) = action.kinetic();
    if !(m > 0.0 && c.abs() < m) {
        return Err(Error::invalid("kinetic matrix is not positive definite"));
    }
    let h = boundary.t / n_t as f64;
    let mut path = initial.to_vec();
    path[0] = boundary.q_i;
    path[n_t] = boundary.q_f;
    let ni = n_t - 1;
    let mut g = vec![(0.0, 0.0); ni];
    let mut trial = path.clone();
    let mut trial_g = g.clone();
    gradient(action, &path, h, &mut g);
    let mut s = discrete_action(action, &path, h);
    let residual_of = |g: &[(f64, f64)]| g.iter().fold(0.0_f64, |a, v| a.max(v.0.abs()).max(v.1.abs())) / h;
    let mut residual = residual_of(&g);
    let flat: Vec<f64> = path.iter().flat_map(|q| [q.0, q.1]).collect();
    let tol = tol.max(super::roundoff_floor(m, h, &flat));
    let off: Sym2 = (-m / h, -m / h, -c / h);
    let mut iterations = 0;
    let mut best = residual;
    while residual >= tol && iterations < max_iter {
        iterations += 1;
        let base: Vec<Sym2> = path[1..n_t]
            .iter()
            .map(|q| {
                let (hxx, hyy, hxy) = action.hess(q.0, q.1);
                (2.0 * m / h + h * hxx, 2.0 * m / h + h * hyy, 2.0 * c / h + h * hxy)
            })
            .collect();
        let mut shift = 0.0;
        let step = loop {
            let diag: Vec<Sym2> = base.iter().map(|d| (d.0 + shift, d.1 + shift, d.2)).collect();
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
        let slope: f64 = step.iter().zip(&g).map(|(d, gi)| d.0 * gi.0 + d.1 * gi.1).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for k in 1..n_t {
                trial[k] = (path[k].0 + alpha * step[k - 1].0, path[k].1 + alpha * step[k - 1].1);
            }
            let s_new = discrete_action(action, &trial, h);
            if s_new.is_finite() && s_new <= s + 1e-4 * alpha * slope + 1e-13 * s.abs().max(1.0) {
                gradient(action, &trial, h, &mut trial_g);
                let r_new = residual_of(&trial_g);
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
        best = best.min(residual);
        if !accepted {
            break;
        }
    }
    if !(residual < tol) {
        return Err(Error::SolverNoConvergence {
            iterations,
            residual: best,
        });
    }
    let epsilon = (1..n_t)
        .map(|k| {
            let vx = (path[k + 1].0 - path[k - 1].0) / (2.0 * h);
            let vy = (path[k + 1].1 - path[k - 1].1) / (2.0 * h);
            action.v(path[k].0, path[k].1) - 0.5 * m * (vx * vx + vy * vy) - c * vx * vy
        })
        .sum::<f64>()
        / ni as f64;
    let times = (0..=n_t)
        .map(|k| if k == n_t { boundary.t } else { k as f64 * h })
        .collect();
    Ok(TrajectorySolution2D {
        times,
        path,
        epsilon,
        sigma: s,
        residual,
        iterations,
    })
}

/// Solution from the straight-line start. The 2-D ansatz is a single well,
/// for which the discrete action has one minimum.
pub fn solve_euclidean_bvp_2d<A: LocalAction2D + ?Sized>(
    action: &A,
    boundary: &BoundaryPair2D,
    n_t: usize,
    tol: f64,
) -> Result<TrajectorySolution2D> {
    if n_t < MIN_SLICES {
        return Err(Error::invalid(format!("need n_t ≥ {MIN_SLICES}, got {n_t}")));
    }
    let (a, b) = (boundary.q_i, boundary.q_f);
    let line: Vec<(f64, f64)> = (0..=n_t)
        .map(|k| {
            let s = k as f64 / n_t as f64;
            (a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s)
        })
        .collect();
    refine_path_2d(action, boundary, &line, tol, DEFAULT_MAX_ITER)
}
