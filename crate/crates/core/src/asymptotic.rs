//! Large-`T` analytics: the quantum potential read off the ground state,
//! the transformation law tying it to the classical potential, the WKB
//! reconstruction and the closed-form hydrogen sector.
//!
//! Only `U = 2m̃(Ṽ − Ṽ_min) = ħ²(ψ′/ψ)²` and `Ṽ_min = E_gr` are observable
//! from a ground state; `m̃` and `Ṽ` are never split here.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassicalAction, PhysConstants, PotentialSpec};
use crate::propagator::{GridSpec1D, GroundState};

/// Samples below this fraction of `max ψ` are trimmed from the window.
pub const PSI_FLOOR: f64 = 1e-8;
/// Cells around `x_star` excluded from the transformation-law residual.
pub const SINGULARITY_GUARD: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPotentialProfile {
    /// Window of the source grid on which `ψ` is above the floor.
    pub grid: GridSpec1D,
    /// Index of the window's first node in the source grid.
    pub offset: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `Ṽ_min`, equal to `E_gr`.
    pub v_min: f64,
    /// Zero of `ψ′/ψ`, i.e. the minimum of `U` and maximum of `ψ`.
    pub x_star: f64,
}

impl QuantumPotentialProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,U,Vmin")?;
        for (x, u) in self.x.iter().zip(&self.u) {
            writeln!(w, "{x},{u},{}", self.v_min)?;
        }
        Ok(())
    }

    /// Index of the window node nearest to `x_star`.
    pub fn star_index(&self) -> usize {
        self.grid.nearest(self.x_star)
    }
}

fn d5(f: &[f64], i: usize, h: f64) -> f64 {
    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `U(x) = ħ²(ψ′/ψ)²` from a five-point log-derivative, on the contiguous
/// window around the maximum where `ψ > 1e-8·max ψ`.
pub fn extract_quantum_potential(gs: &GroundState, constants: &PhysConstants) -> Result<QuantumPotentialProfile> {
    constants.validate()?;
    let psi = &gs.psi;
    let n = psi.len();
    if n != gs.grid.n_points || n < 5 {
        return Err(Error::invalid("ground state does not match its grid"));
    }
    let peak = gs.argmax();
    let max = psi[peak];
    if !(max > 0.0) {
        return Err(Error::invalid("ground state has no positive maximum"));
    }
    let floor = PSI_FLOOR * max;
    let mut lo = peak;
    while lo > 2 && psi[lo - 1] > floor {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 3 < n && psi[hi + 1] > floor {
        hi += 1;
    }
    if hi < lo + 8 || peak < 2 || peak + 2 >= n {
        return Err(Error::invalid("ground state window too small"));
    }
    let maxima = (lo.max(1)..=hi.min(n - 2))
        .filter(|&i| psi[i] > psi[i - 1] && psi[i] >= psi[i + 1])
        .count();
    if maxima > 1 {
        return Err(Error::NotSingleWell { maxima });
    }
    let h = gs.grid.spacing();
    let dlog: Vec<f64> = (lo..=hi).map(|i| d5(psi, i, h) / psi[i]).collect();
    let hbar = constants.hbar;
    let u: Vec<f64> = dlog.iter().map(|d| hbar * hbar * d * d).collect();
    let x: Vec<f64> = (lo..=hi).map(|i| gs.grid.point(i)).collect();
    // ψ′/ψ falls through zero at the maximum.
    let mut x_star = gs.grid.point(peak);
    for k in 0..dlog.len() - 1 {
        if dlog[k] >= 0.0 && dlog[k + 1] < 0.0 && (lo + k).abs_diff(peak) <= 1 {
            x_star = x[k] + (x[k + 1] - x[k]) * dlog[k] / (dlog[k] - dlog[k + 1]);
            break;
        }
    }
    Ok(QuantumPotentialProfile {
        grid: GridSpec1D {
            x_min: x[0],
            x_max: x[x.len() - 1],
            n_points: x.len(),
        },
        offset: lo,
        x,
        u,
        v_min: gs.e_gr,
        x_star,
    })
}

/// Pointwise residual of the transformation law over the profile window.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationResidual {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
    pub x_at_max: f64,
}

impl TransformationResidual {
    /// Largest `|r|` restricted to `lo ≤ x ≤ hi`.
    pub fn max_abs_within(&self, lo: f64, hi: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.residual)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .fold(0.0, |a, (_, r)| a.max(r.abs()))
    }
}

/// `r = 2m(V − E_gr) − [U − (ħ/2) U′/√U · sgn(x − x*)]`. For radial
/// potentials the three-dimensional Laplacian adds `−(2ħ/r)·sgn(r − r*)·√U`
/// to the bracket. Nodes within [`SINGULARITY_GUARD`] cells of `x*` and the
/// two outermost nodes on each side are skipped.
pub fn verify_transformation_law(
    profile: &QuantumPotentialProfile,
    classical: &ClassicalAction,
    e_gr: f64,
    constants: &PhysConstants,
) -> Result<TransformationResidual> {
    if classical.potential.is_two_dimensional() {
        return Err(Error::invalid("transformation law is one-dimensional"));
    }
    let radial = matches!(classical.potential, PotentialSpec::Radial { .. });
    let hbar = constants.hbar;
    let m = classical.mass;
    let h = profile.grid.spacing();
    let guard = SINGULARITY_GUARD as f64 * h;
    let n = profile.u.len();
    let mut xs = Vec::new();
    let mut rs = Vec::new();
    for i in 2..n.saturating_sub(2) {
        let x = profile.x[i];
        let u = profile.u[i];
        if (x - profile.x_star).abs() < guard || !(u > 0.0) {
            continue;
        }
        let s = sign(x - profile.x_star);
        let root = u.sqrt();
        let mut rhs = u - 0.5 * hbar * d5(&profile.u, i, h) / root * s;
        if radial {
            rhs -= 2.0 * hbar * s * root / x;
        }
        let lhs = 2.0 * m * (classical.potential.value(x)? - e_gr);
        xs.push(x);
        rs.push(lhs - rhs);
    }
    let (mut max_abs, mut x_at_max) = (0.0, f64::NAN);
    for (x, r) in xs.iter().zip(&rs) {
        if r.abs() > max_abs {
            max_abs = r.abs();
            x_at_max = *x;
        }
    }
    Ok(TransformationResidual {
        x: xs,
        residual: rs,
        max_abs,
        x_at_max,
    })
}

/// `ψ(x) ∝ exp[−∫_{x*}^{x} sgn(x′−x*) √U(x′) dx′/ħ]` on the profile window,
/// normalised there.
pub fn wkb_ground_state(profile: &QuantumPotentialProfile, constants: &PhysConstants) -> Result<GroundState> {
    constants.validate()?;
    let n = profile.u.len();
    let h = profile.grid.spacing();
    let f: Vec<f64> = profile
        .x
        .iter()
        .zip(&profile.u)
        .map(|(x, u)| sign(x - profile.x_star) * u.max(0.0).sqrt() / constants.hbar)
        .collect();
    // Cumulative integral from node 0: four-point rule inside, trapezoid at
    // the ends.
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let step = if k >= 1 && k + 2 < n {
            h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2])
        } else {
            0.5 * h * (f[k] + f[k + 1])
        };
        w[k + 1] = w[k] + step;
    }
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let mut psi: Vec<f64> = w.iter().map(|v| (-(v - wmin)).exp()).collect();
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * h).sqrt();
    psi.iter_mut().for_each(|p| *p /= norm);
    Ok(GroundState {
        grid: profile.grid,
        e_gr: profile.v_min,
        psi,
    })
}

/// The ground state restricted to the profile window and renormalised there.
pub fn restrict_to_window(gs: &GroundState, profile: &QuantumPotentialProfile) -> GroundState {
    let mut psi = gs.psi[profile.offset..profile.offset + profile.u.len()].to_vec();
    let h = profile.grid.spacing();
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * h).sqrt();
    psi.iter_mut().for_each(|p| *p /= norm);
    GroundState {
        grid: profile.grid,
        e_gr: gs.e_gr,
        psi,
    }
}

/// `(Σ (a−b)² Δx)^{1/2}` for two states on the same grid.
pub fn l2_distance(a: &GroundState, b: &GroundState) -> Result<f64> {
    if a.psi.len() != b.psi.len() {
        return Err(Error::invalid("states live on different grids"));
    }
    let h = a.grid.spacing();
    Ok((a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h).sqrt())
}

/// Closed-form quantum action of the hydrogen sector with angular momentum
/// `l ≥ 1`: `Ṽ_l(r) = μ/r² − ν/r` with `m̃ = m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydrogenSectorResult {
    pub l: u32,
    pub mu: f64,
    pub nu: f64,
    /// `−E_I/(l+1)²`.
    pub e_l: f64,
    /// `min Ṽ_l = −ν²/(4μ)`, equal to `e_l`.
    pub v_min: f64,
    /// `2μ/ν = a₀ l(l+1)`.
    pub r_star: f64,
    pub bohr_radius: f64,
    /// Normalisation of `φ_l` under `∫ φ² r² dr = 1`.
    pub norm: f64,
}

impl HydrogenSectorResult {
    pub fn v_tilde(&self, r: f64) -> f64 {
        self.mu / (r * r) - self.nu / r
    }

    /// `φ_l(r) = (r/a₀)^l e^{−r/((l+1)a₀)} / N_l`.
    pub fn phi(&self, r: f64) -> f64 {
        let s = r / self.bohr_radius;
        s.powi(self.l as i32) * (-s / (self.l as f64 + 1.0)).exp() / self.norm
    }
}

pub fn hydrogen_sector(l: u32, constants: &PhysConstants) -> Result<HydrogenSectorResult> {
    constants.validate()?;
    if l == 0 {
        return Err(Error::Unsupported(
            "l = 0 has no centrifugal term for the ansatz to tune".into(),
        ));
    }
    let (hbar, m, e2) = (constants.hbar, constants.mass_default, constants.charge_sq);
    let lf = l as f64;
    let n = lf + 1.0;
    let mu = hbar * hbar * lf * lf / (2.0 * m);
    let nu = e2 * lf / n;
    let a0 = constants.bohr_radius();
    // ∫ s^{2l+2} e^{−2s/n} ds = (2l+2)! (n/2)^{2l+3}, in log form.
    let ln_fact: f64 = (1..=(2 * l + 2)).map(|k| (k as f64).ln()).sum();
    let ln_int = ln_fact + (2.0 * lf + 3.0) * (n / 2.0).ln() + 3.0 * a0.ln();
    Ok(HydrogenSectorResult {
        l,
        mu,
        nu,
        e_l: -constants.ionisation_energy() / (n * n),
        v_min: -nu * nu / (4.0 * mu),
        r_star: 2.0 * mu / nu,
        bohr_radius: a0,
        norm: (0.5 * ln_int).exp(),
    })
}

/// Structured text report (TOML) of several sectors.
pub fn hydrogen_report(results: &[HydrogenSectorResult]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        sector: &'a [HydrogenSectorResult],
    }
    toml::to_string(&Doc { sector: results })
        .map_err(|e| Error::invalid(format!("cannot serialise hydrogen report: {e}")))
}
