//! Imaginary-time Strang split-step propagation on a periodic square box.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ClassicalAction, PhysConstants, PotentialSpec};

/// Initial and final points of a 2-D amplitude.
pub type PointPair2D = ((f64, f64), (f64, f64));

/// Square periodic box `[−half_width, half_width)²` with `n × n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub half_width: f64,
    pub n: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("half_width must be > 0, got {half_width}")));
        }
        if n < 64 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("2-D grid needs an even n ≥ 64, got {n}")));
        }
        Ok(Grid2D { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n as isize;
        let m = m as isize;
        let s = if m <= n / 2 { m } else { m - n };
        2.0 * std::f64::consts::PI * s as f64 / (2.0 * self.half_width)
    }

    /// `e^{i k_m u}` for every mode; the Nyquist mode uses `cos(k u)` so the
    /// interpolant of real data is real.
    fn phases(&self, u: f64) -> Vec<Complex64> {
        (0..self.n)
            .map(|m| {
                let k = self.wavenumber(m);
                if m == self.n / 2 {
                    Complex64::new((k * u).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, k * u)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStepOptions {
    /// Lower bound on the number of time steps; `Δt ≤ T / min_steps`.
    pub min_steps: usize,
}

impl Default for SplitStepOptions {
    fn default() -> Self {
        SplitStepOptions { min_steps: 1000 }
    }
}

/// Band-limited periodic delta `δ_N(x − s)` sampled on the grid. Each mode
/// `±k` appears once; the Nyquist mode carries its full cosine weight.
fn band_limited_delta(grid: &Grid2D, s: f64) -> Vec<f64> {
    let lb = 2.0 * grid.half_width;
    (0..grid.n)
        .map(|j| {
            let u = grid.point(j) - s;
            let mut acc = 0.0;
            for m in 0..grid.n {
                let k = grid.wavenumber(m);
                acc += (k * u).cos();
            }
            acc / lb
        })
        .collect()
}

struct Propagator {
    grid: Grid2D,
    half_v: Vec<f64>,
    kinetic: Vec<f64>,
    steps: usize,
    growth_limit: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Propagator {
    fn new(
        action: &ClassicalAction,
        grid: &Grid2D,
        t: f64,
        constants: &PhysConstants,
        options: &SplitStepOptions,
    ) -> Result<Self> {
        let n = grid.n;
        let steps = options.min_steps.max(1);
        let dt = t / steps as f64;
        let hbar = constants.hbar;
        let mut half_v = Vec::with_capacity(n * n);
        let mut v_min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let v = action.potential.value_2d(grid.point(i), grid.point(j))?;
                v_min = v_min.min(v);
                half_v.push((-0.5 * v * dt / hbar).exp());
            }
        }
        let kinetic = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| {
                let k2 = grid.wavenumber(a).powi(2) + grid.wavenumber(b).powi(2);
                (-hbar * k2 * dt / (2.0 * action.mass)).exp() / (n * n) as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Propagator {
            grid: *grid,
            half_v,
            kinetic,
            steps,
            growth_limit: (-v_min * dt / hbar).exp() * (1.0 + 1e-9),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(data);
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Propagates the delta source at `(xs, ys)` and returns the Fourier
    /// coefficients of the result.
    fn run(&self, xs: f64, ys: f64) -> Result<Vec<Complex64>> {
        let n = self.grid.n;
        let dx = band_limited_delta(&self.grid, xs);
        let dy = band_limited_delta(&self.grid, ys);
        let mut psi: Vec<Complex64> = (0..n * n)
            .map(|idx| Complex64::new(dx[idx / n] * dy[idx % n], 0.0))
            .collect();
        let norm = |p: &[Complex64]| p.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
        let mut prev = norm(&psi);
        for step in 0..self.steps {
            for (p, w) in psi.iter_mut().zip(&self.half_v) {
                *p *= *w;
            }
            self.fft2(&mut psi, false);
            for (p, w) in psi.iter_mut().zip(&self.kinetic) {
                *p *= *w;
            }
            self.fft2(&mut psi, true);
            for (p, w) in psi.iter_mut().zip(&self.half_v) {
                *p = Complex64::new(p.re * w, 0.0);
            }
            let now = norm(&psi);
            if !now.is_finite() || now > prev * self.growth_limit {
                return Err(Error::Integration(format!(
                    "norm grew from {prev:e} to {now:e} at step {}",
                    step + 1
                )));
            }
            prev = now;
        }
        self.fft2(&mut psi, false);
        let scale = 1.0 / (n * n) as f64;
        psi.iter_mut().for_each(|c| *c *= scale);
        Ok(psi)
    }

    fn evaluate(&self, coeffs: &[Complex64], x: f64, y: f64) -> f64 {
        let n = self.grid.n;
        let ex = self.grid.phases(x + self.grid.half_width);
        let ey = self.grid.phases(y + self.grid.half_width);
        let mut acc = Complex64::default();
        for a in 0..n {
            let row: Complex64 = (0..n).map(|b| coeffs[a * n + b] * ey[b]).sum();
            acc += row * ex[a];
        }
        acc.re
    }
}

/// `G_E((x_f, y_f), T; (x_i, y_i))` for every `(initial, final)` pair.
/// Each distinct initial point is propagated once, in parallel; results are
/// returned in input order.
pub fn euclidean_amplitude_2d(
    action: &ClassicalAction,
    grid: &Grid2D,
    points: &[PointPair2D],
    t: f64,
    constants: &PhysConstants,
    options: &SplitStepOptions,
) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("transition time must be > 0, got {t}")));
    }
    if !matches!(action.potential, PotentialSpec::Quartic2D { .. }) {
        return Err(Error::invalid("2-D amplitudes need a Quartic2D potential"));
    }
    constants.validate()?;
    let inside = |v: f64| v >= -grid.half_width && v <= grid.half_width;
    for ((a, b), (c, d)) in points {
        if ![*a, *b, *c, *d].into_iter().all(inside) {
            return Err(Error::invalid(format!(
                "boundary pair ({a}, {b}) → ({c}, {d}) outside the box"
            )));
        }
    }
    let prop = Propagator::new(action, grid, t, constants, options)?;

    let mut sources: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (idx, ((xi, yi), _)) in points.iter().enumerate() {
        sources.entry((xi.to_bits(), yi.to_bits())).or_default().push(idx);
    }
    let groups: Vec<((u64, u64), Vec<usize>)> = sources.into_iter().collect();
    let evaluated = groups
        .par_iter()
        .map(|((xb, yb), idxs)| {
            let coeffs = prop.run(f64::from_bits(*xb), f64::from_bits(*yb))?;
            Ok(idxs
                .iter()
                .map(|&i| {
                    let (xf, yf) = points[i].1;
                    (i, prop.evaluate(&coeffs, xf, yf))
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; points.len()];
    for (i, g) in evaluated.into_iter().flatten() {
        out[i] = g;
    }
    Ok(out)
}

/// 2-D amplitudes over all unordered pairs `i ≤ j` of `boundary_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTable2D {
    pub transition_time: f64,
    pub pairs: Vec<PointPair2D>,
    pub values: Vec<f64>,
    pub floor: f64,
}

impl AmplitudeTable2D {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn amplitude_table_2d(
    action: &ClassicalAction,
    grid: &Grid2D,
    boundary_points: &[(f64, f64)],
    t: f64,
    floor: f64,
    constants: &PhysConstants,
    options: &SplitStepOptions,
) -> Result<AmplitudeTable2D> {
    if !(floor >= 0.0) {
        return Err(Error::invalid(format!("floor must be ≥ 0, got {floor}")));
    }
    let mut pairs = Vec::new();
    for i in 0..boundary_points.len() {
        for j in i..boundary_points.len() {
            pairs.push((boundary_points[i], boundary_points[j]));
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateTable { floor });
    }
    let values = euclidean_amplitude_2d(action, grid, &pairs, t, constants, options)?;
    let max = values.iter().fold(0.0_f64, |a, g| a.max(*g));
    let (pairs, values): (Vec<_>, Vec<_>) = pairs
        .into_iter()
        .zip(values)
        .filter(|(_, g)| *g > 0.0 && *g / max > floor)
        .unzip();
    if values.is_empty() {
        return Err(Error::DegenerateTable { floor });
    }
    Ok(AmplitudeTable2D {
        transition_time: t,
        pairs,
        values,
        floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_is_reproduced_by_interpolation() {
        // The Fourier interpolant of the band-limited delta integrates to 1.
        let g = Grid2D::new(3.0, 64).unwrap();
        let d = band_limited_delta(&g, 0.37);
        let total: f64 = d.iter().sum::<f64>() * g.spacing();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid2D::new(5.0, 63).is_err());
        let a = ClassicalAction::new(1.0, PotentialSpec::quartic_2d(0.0, 0.5, 0.0, 0.0)).unwrap();
        let g = Grid2D::new(7.0, 64).unwrap();
        let c = PhysConstants::default();
        let o = SplitStepOptions::default();
        assert!(euclidean_amplitude_2d(&a, &g, &[((0.0, 0.0), (0.0, 0.0))], 0.0, &c, &o).is_err());
        assert!(euclidean_amplitude_2d(&a, &g, &[((0.0, 0.0), (9.0, 0.0))], 1.0, &c, &o).is_err());
    }

    #[test]
    fn harmonic_factor_matches_mehler() {
        let a = ClassicalAction::new(1.0, PotentialSpec::quartic_2d(0.0, 0.5, 0.0, 0.0)).unwrap();
        let g = Grid2D::new(7.0, 64).unwrap();
        let t = 1.0;
        let pts = [((0.0, 0.0), (0.0, 0.0)), ((0.3, -0.5), (1.1, 0.7))];
        let got =
            euclidean_amplitude_2d(&a, &g, &pts, t, &PhysConstants::default(), &SplitStepOptions::default()).unwrap();
        let mehler = |xi: f64, xf: f64| {
            let s = f64::sinh(t);
            (1.0 / (2.0 * std::f64::consts::PI * s)).sqrt()
                * (-((xi * xi + xf * xf) * t.cosh() - 2.0 * xi * xf) / (2.0 * s)).exp()
        };
        for (((xi, yi), (xf, yf)), g) in pts.iter().zip(&got) {
            let want = mehler(*xi, *xf) * mehler(*yi, *yf);
            assert!((g / want - 1.0).abs() < 1e-5, "{g} vs {want}");
        }
    }
}
