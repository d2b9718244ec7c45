//! Euclidean transition amplitudes `G_E(x_f, T; x_i) = ⟨x_f| e^{−HT/ħ} |x_i⟩`.
//!
//! In 1-D the Hamiltonian is discretised with the fourth-order 5-point
//! Laplacian inside a hard-wall box and the amplitude is summed over its eigenpairs. The 2-D
//! kernel is obtained by imaginary-time split-step propagation (see
//! [`split_step`]).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{ClassicalAction, PhysConstants, PotentialSpec};

pub(crate) mod banded;
pub mod split_step;

pub use split_step::{
    amplitude_table_2d, euclidean_amplitude_2d, AmplitudeTable2D, Grid2D, PointPair2D, SplitStepOptions,
};

use banded::{project_out, SymBanded};

/// Terms with relative weight `e^{−(E_n−E_0)T/ħ}` below this are dropped.
pub const TRUNCATION_WEIGHT: f64 = 1e-16;
/// Allowed ground-state probability in the layer next to a box wall.
pub const WALL_WEIGHT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        let g = GridSpec1D { x_min, x_max, n_points };
        g.validate()?;
        Ok(g)
    }

    /// Radial grid `r_k = k·Δr`, `k = 1..=n`; the Dirichlet wall sits at `r = 0`.
    pub fn radial(r_max: f64, n_points: usize) -> Result<Self> {
        Self::new(r_max / n_points as f64, r_max, n_points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::invalid(format!(
                "grid needs x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n_points < 64 {
            return Err(Error::invalid(format!(
                "grid needs at least 64 points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.point(k)).collect()
    }

    /// Index of the node nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.spacing()).round();
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Four-point Lagrange weights for sampling a grid function at `x`.
    /// Exact (a single unit weight) when `x` is a node.
    pub(crate) fn interpolation(&self, x: f64) -> Result<(usize, [f64; 4])> {
        let h = self.spacing();
        let tol = 1e-9 * h;
        if x < self.x_min - tol || x > self.x_max + tol {
            return Err(Error::invalid(format!(
                "point {x} outside grid [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let s = (x - self.x_min) / h;
        let k = s.round();
        if (s - k).abs() < 1e-9 {
            let k = (k as usize).min(self.n_points - 1);
            return Ok((k, [1.0, 0.0, 0.0, 0.0]));
        }
        let base = (s.floor() as isize - 1).clamp(0, self.n_points as isize - 4) as usize;
        let t = s - base as f64;
        let mut w = [0.0; 4];
        for (j, wj) in w.iter_mut().enumerate() {
            let mut p = 1.0;
            for m in 0..4 {
                if m != j {
                    p *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            *wj = p;
        }
        Ok((base, w))
    }

    #[cfg(test)]
    pub(crate) fn sample(&self, f: &[f64], x: f64) -> Result<f64> {
        let (base, w) = self.interpolation(x)?;
        Ok(w.iter()
            .enumerate()
            .filter(|(_, wj)| **wj != 0.0)
            .map(|(j, wj)| wj * f[base + j])
            .sum())
    }
}

/// Lowest eigenpairs of the grid Hamiltonian `−(ħ²/2m) d²/dx² + V`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub energies: Vec<f64>,
    /// Orthonormal under `Σ_k φ_m(x_k) φ_n(x_k) Δx = δ_mn`.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub grid: GridSpec1D,
    pub action: ClassicalAction,
    pub hbar: f64,
}

fn hamiltonian(action: &ClassicalAction, grid: &GridSpec1D, constants: &PhysConstants) -> Result<SymBanded> {
    grid.validate()?;
    constants.validate()?;
    if action.potential.is_two_dimensional() {
        return Err(Error::invalid("spectral decomposition is 1-D only"));
    }
    let n = grid.n_points;
    let h = grid.spacing();
    let c = constants.hbar * constants.hbar / (2.0 * action.mass * h * h);
    let mut diag = grid
        .points()
        .into_iter()
        .map(|x| action.potential.value(x).map(|v| v + 2.5 * c))
        .collect::<Result<Vec<_>>>()?;
    // The walls sit one cell outside the end nodes; the far stencil point
    // beyond a wall is the odd reflection of the end node.
    diag[0] -= c / 12.0;
    diag[n - 1] -= c / 12.0;
    Ok(SymBanded::new(vec![
        diag,
        vec![-4.0 / 3.0 * c; n - 1],
        vec![c / 12.0; n - 2],
    ]))
}

impl SpectralDecomposition {
    fn build(op: &SymBanded, action: &ClassicalAction, grid: &GridSpec1D, hbar: f64, n_states: usize) -> Result<Self> {
        let (lo, hi) = op.bounds();
        let mut energies: Vec<f64> = Vec::with_capacity(n_states);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n_states);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let mut lower = lo;
        for k in 0..n_states {
            let e = op.eigenvalue(k, lower, hi);
            lower = e - 1e-12 * scale;
            let cluster: Vec<&[f64]> = energies
                .iter()
                .zip(&vectors)
                .filter(|(ej, _)| (e - **ej).abs() < 1e-6 * scale)
                .map(|(_, v)| v.as_slice())
                .collect();
            let mut v = op.eigenvector(e, &cluster, k);
            for u in &vectors {
                project_out(&mut v, u);
            }
            banded::normalize(&mut v);
            energies.push(e);
            vectors.push(v);
        }
        let norm = 1.0 / grid.spacing().sqrt();
        for v in vectors.iter_mut() {
            fix_sign(v);
            v.iter_mut().for_each(|x| *x *= norm);
        }
        let decomp = SpectralDecomposition {
            energies,
            eigenfunctions: vectors,
            grid: *grid,
            action: action.clone(),
            hbar,
        };
        decomp.check_walls()?;
        Ok(decomp)
    }

    /// Ground-state probability within 2.5% of the box next to each hard
    /// wall. The `r = 0` wall of a radial problem is physical and skipped;
    /// for a constant potential the box itself is the system.
    fn check_walls(&self) -> Result<()> {
        let Some(psi) = self.eigenfunctions.first() else {
            return Ok(());
        };
        if let PotentialSpec::Polynomial1D { coeffs } = &self.action.potential {
            if coeffs.iter().skip(1).all(|c| *c == 0.0) {
                return Ok(());
            }
        }
        let n = psi.len();
        let layer = (n / 40).max(1);
        let h = self.grid.spacing();
        let mass = |r: std::ops::Range<usize>| psi[r].iter().map(|p| p * p * h).sum::<f64>();
        let right = mass(n - layer..n);
        let left = match self.action.potential {
            PotentialSpec::Radial { .. } => 0.0,
            _ => mass(0..layer),
        };
        let weight = left.max(right);
        if weight > WALL_WEIGHT_LIMIT {
            return Err(Error::BoxTooSmall {
                weight,
                limit: WALL_WEIGHT_LIMIT,
            });
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// Full set of states needed for amplitudes at every `T ≥ t_min`: all
    /// eigenvalues up to `E_0 + 16 ln(10) ħ/t_min`, plus the first one above.
    pub fn for_min_time(
        action: &ClassicalAction,
        grid: &GridSpec1D,
        t_min: f64,
        constants: &PhysConstants,
    ) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(Error::invalid(format!("transition time must be > 0, got {t_min}")));
        }
        let op = hamiltonian(action, grid, constants)?;
        let (lo, hi) = op.bounds();
        let e0 = op.eigenvalue(0, lo, hi);
        let cutoff = e0 - TRUNCATION_WEIGHT.ln() * constants.hbar / t_min;
        let n_states = (op.count_below(cutoff) + 1).min(grid.n_points);
        Self::build(&op, action, grid, constants.hbar, n_states)
    }

    /// `e^{−(E_n−E_0)T/ħ}` for every stored state; errors if the spectrum
    /// stops before the weights fall below [`TRUNCATION_WEIGHT`].
    fn weights(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("transition time must be > 0, got {t}")));
        }
        let e0 = self.energies[0];
        let w: Vec<f64> = self
            .energies
            .iter()
            .map(|e| (-(e - e0) * t / self.hbar).exp())
            .collect();
        let complete = self.n_states() == self.grid.n_points;
        if !complete && *w.last().unwrap() >= TRUNCATION_WEIGHT {
            return Err(Error::TruncatedSpectrum {
                needed: e0 - TRUNCATION_WEIGHT.ln() * self.hbar / t,
                available: *self.energies.last().unwrap(),
            });
        }
        Ok(w)
    }

    fn sample_all(&self, x: f64) -> Result<Vec<f64>> {
        let (base, w) = self.grid.interpolation(x)?;
        Ok(self
            .eigenfunctions
            .iter()
            .map(|phi| {
                w.iter()
                    .enumerate()
                    .filter(|(_, wj)| **wj != 0.0)
                    .map(|(j, wj)| wj * phi[base + j])
                    .sum()
            })
            .collect())
    }
}

/// Leftmost significant lobe positive; for a nodeless ground state this
/// makes the whole vector positive.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub fn spectral_decompose(
    action: &ClassicalAction,
    grid: &GridSpec1D,
    n_states: usize,
    constants: &PhysConstants,
) -> Result<SpectralDecomposition> {
    if n_states == 0 || n_states > grid.n_points {
        return Err(Error::invalid(format!(
            "n_states must be in 1..={}, got {n_states}",
            grid.n_points
        )));
    }
    let op = hamiltonian(action, grid, constants)?;
    SpectralDecomposition::build(&op, action, grid, constants.hbar, n_states)
}

/// `Σ_n φ_n(x_f) e^{−E_n T/ħ} φ_n(x_i)`, truncated at relative weight 1e-16.
pub fn euclidean_amplitude(decomp: &SpectralDecomposition, x_i: f64, x_f: f64, t: f64) -> Result<f64> {
    let w = decomp.weights(t)?;
    let a = decomp.sample_all(x_i)?;
    let b = decomp.sample_all(x_f)?;
    let e0 = decomp.energies[0];
    let s: f64 = (0..w.len()).map(|n| (a[n] * b[n]) * w[n]).sum();
    Ok(s * (-e0 * t / decomp.hbar).exp())
}

/// Amplitudes over all unordered pairs `(x_i ≤ x_f)` of a boundary grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTable {
    pub transition_time: f64,
    pub pairs: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// Pairs with `G/max G ≤ floor` were dropped.
    pub floor: f64,
}

impl AmplitudeTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every amplitude by `factor` (e.g. a normalisation shift).
    pub fn scaled(&self, factor: f64) -> AmplitudeTable {
        AmplitudeTable {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x_i,x_f,T,G")?;
        for ((xi, xf), g) in self.pairs.iter().zip(&self.values) {
            writeln!(w, "{},{},{},{}", xi, xf, self.transition_time, g)?;
        }
        Ok(())
    }

    /// Parses the `x_i,x_f,T,G` CSV layout; `#` lines are comments. All rows
    /// must share one `T` and have positive, finite amplitudes.
    pub fn read_csv<R: BufRead>(r: R) -> Result<AmplitudeTable> {
        let mut header_seen = false;
        let mut t: Option<f64> = None;
        let mut pairs = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
                if cols != ["x_i", "x_f", "T", "G"] {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected header x_i,x_f,T,G, got {trimmed:?}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 4 columns, got {}", fields.len()),
                });
            }
            let mut nums = [0.0; 4];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                *slot = f.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("{f:?}: {e}"),
                })?;
                if !slot.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("non-finite value {f:?}"),
                    });
                }
            }
            let [xi, xf, tt, g] = nums;
            if !(tt > 0.0) || !(g > 0.0) {
                return Err(Error::Parse {
                    line: lineno,
                    message: "T and G must be positive".into(),
                });
            }
            match t {
                None => t = Some(tt),
                Some(t0) if t0 != tt => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("mixed transition times {t0} and {tt}"),
                    })
                }
                _ => {}
            }
            pairs.push((xi, xf));
            values.push(g);
        }
        let Some(transition_time) = t else {
            return Err(Error::Parse {
                line: 0,
                message: "no data rows".into(),
            });
        };
        Ok(AmplitudeTable {
            transition_time,
            pairs,
            values,
            floor: 0.0,
        })
    }
}

pub fn amplitude_table(
    decomp: &SpectralDecomposition,
    boundary_grid: &[f64],
    t: f64,
    floor: f64,
) -> Result<AmplitudeTable> {
    if !(floor >= 0.0) {
        return Err(Error::invalid(format!("floor must be ≥ 0, got {floor}")));
    }
    if boundary_grid.is_empty() {
        return Err(Error::DegenerateTable { floor });
    }
    let w = decomp.weights(t)?;
    let samples = boundary_grid
        .iter()
        .map(|&x| decomp.sample_all(x))
        .collect::<Result<Vec<_>>>()?;
    let scale = (-decomp.energies[0] * t / decomp.hbar).exp();
    let mut raw = Vec::new();
    for i in 0..boundary_grid.len() {
        for j in i..boundary_grid.len() {
            let s: f64 = (0..w.len()).map(|n| (samples[i][n] * samples[j][n]) * w[n]).sum();
            raw.push(((boundary_grid[i], boundary_grid[j]), s * scale));
        }
    }
    let max = raw.iter().fold(0.0_f64, |a, (_, g)| a.max(*g));
    let (pairs, values): (Vec<_>, Vec<_>) = raw.into_iter().filter(|(_, g)| *g > 0.0 && *g / max > floor).unzip();
    if values.is_empty() {
        return Err(Error::DegenerateTable { floor });
    }
    Ok(AmplitudeTable {
        transition_time: t,
        pairs,
        values,
        floor,
    })
}

/// Normalised, positive ground state on a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub grid: GridSpec1D,
    pub e_gr: f64,
    pub psi: Vec<f64>,
}

impl GroundState {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,psi")?;
        for (x, p) in self.grid.points().iter().zip(&self.psi) {
            writeln!(w, "{x},{p}")?;
        }
        Ok(())
    }

    /// For a radial problem the grid eigenfunction is `u(r) = r R(r)`; this
    /// returns `R(r) = u(r)/r`, renormalised so that `Σ R² Δr = 1`.
    pub fn divided_by_radius(&self) -> GroundState {
        let mut psi: Vec<f64> = self.grid.points().iter().zip(&self.psi).map(|(r, u)| u / r).collect();
        normalize_on_grid(&mut psi, self.grid.spacing());
        GroundState {
            grid: self.grid,
            e_gr: self.e_gr,
            psi,
        }
    }

    pub fn argmax(&self) -> usize {
        self.psi
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, v)| {
                    if *v > bv {
                        (i, *v)
                    } else {
                        (bi, bv)
                    }
                },
            )
            .0
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|p| p * p).sum::<f64>() * self.grid.spacing()
    }
}

pub(crate) fn normalize_on_grid(psi: &mut [f64], h: f64) {
    let n = (psi.iter().map(|p| p * p).sum::<f64>() * h).sqrt();
    if n > 0.0 {
        psi.iter_mut().for_each(|p| *p /= n);
    }
}

pub fn ground_state(decomp: &SpectralDecomposition) -> GroundState {
    let mut psi: Vec<f64> = decomp.eigenfunctions[0].iter().map(|p| p.abs()).collect();
    normalize_on_grid(&mut psi, decomp.grid.spacing());
    GroundState {
        grid: decomp.grid,
        e_gr: decomp.energies[0],
        psi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> ClassicalAction {
        ClassicalAction::new(1.0, PotentialSpec::harmonic(1.0, 1.0)).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec1D::new(1.0, -1.0, 100).is_err());
        assert!(GridSpec1D::new(-1.0, 1.0, 63).is_err());
        let g = GridSpec1D::new(-1.0, 1.0, 201).unwrap();
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert_eq!(g.point(200), 1.0);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_cubics() {
        let g = GridSpec1D::new(-2.0, 2.0, 81).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        for x in [-2.0, -1.95, -0.333, 0.0, 0.71, 1.999, 2.0] {
            let want = x * x * x - 2.0 * x + 1.0;
            assert!((g.sample(&f, x).unwrap() - want).abs() < 1e-12, "x={x}");
        }
        assert!(g.sample(&f, 2.1).is_err());
    }

    #[test]
    fn harmonic_ladder() {
        let grid = GridSpec1D::new(-10.0, 10.0, 1024).unwrap();
        let d = spectral_decompose(&harmonic(), &grid, 11, &PhysConstants::default()).unwrap();
        assert!((d.energies[0] - 0.5).abs() < 1e-5, "{}", d.energies[0]);
        for (n, e) in d.energies.iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-4, "n={n} E={e}");
        }
        // orthonormality
        let h = grid.spacing();
        for a in 0..d.n_states() {
            for b in 0..d.n_states() {
                let dot: f64 = d.eigenfunctions[a]
                    .iter()
                    .zip(&d.eigenfunctions[b])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    * h;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
        assert!(d.eigenfunctions[0].iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn box_too_small_is_reported() {
        let grid = GridSpec1D::new(-1.5, 1.5, 200).unwrap();
        let r = spectral_decompose(&harmonic(), &grid, 1, &PhysConstants::default());
        assert!(matches!(r, Err(Error::BoxTooSmall { .. })));
    }

    #[test]
    fn non_positive_time_rejected() {
        let grid = GridSpec1D::new(-8.0, 8.0, 400).unwrap();
        let d = spectral_decompose(&harmonic(), &grid, 20, &PhysConstants::default()).unwrap();
        assert!(euclidean_amplitude(&d, 0.0, 0.0, 0.0).is_err());
        assert!(euclidean_amplitude(&d, 0.0, 0.0, -1.0).is_err());
        // 20 states are far from enough at T = 0.01
        assert!(matches!(
            euclidean_amplitude(&d, 0.0, 0.0, 0.01),
            Err(Error::TruncatedSpectrum { .. })
        ));
    }

    #[test]
    fn floor_one_empties_table() {
        let grid = GridSpec1D::new(-8.0, 8.0, 400).unwrap();
        let d = SpectralDecomposition::for_min_time(&harmonic(), &grid, 1.0, &PhysConstants::default()).unwrap();
        let b: Vec<f64> = (0..5).map(|i| -1.0 + 0.5 * i as f64).collect();
        assert!(matches!(
            amplitude_table(&d, &b, 1.0, 1.0),
            Err(Error::DegenerateTable { .. })
        ));
        let t = amplitude_table(&d, &b, 1.0, 1e-10).unwrap();
        assert_eq!(t.len(), 15);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(AmplitudeTable::read_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(AmplitudeTable::read_csv("x_i,x_f,T,G\n0,0,1,-1\n".as_bytes()).is_err());
        assert!(AmplitudeTable::read_csv("x_i,x_f,T,G\n0,0,1,1\n0,1,2,1\n".as_bytes()).is_err());
        assert!(AmplitudeTable::read_csv("x_i,x_f,T,G\n".as_bytes()).is_err());
        let t = AmplitudeTable::read_csv("# c\nx_i,x_f,T,G\n0,0.5,1,0.25\n".as_bytes()).unwrap();
        assert_eq!(t.pairs, vec![(0.0, 0.5)]);
    }
}
