//! Geometry and instantons of fitted double-well quantum actions.
//!
//! An even quartic `Ṽ = ṽ0 + ṽ2 x² + ṽ4 x⁴` with `ṽ2 < 0 < ṽ4` is written as
//! `Ã²(x² − ã²)² − offset`, whose Euclidean instanton is `ã·tanh(κt)` with
//! `κ = √(2/m̃)·Ã·ã`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fitter::{FamilyPoint, FitResult};
use crate::model::QuantumActionParams1D;

/// Samples in an [`InstantonProfile`].
pub const PROFILE_SAMPLES: usize = 1001;
/// Half-width of the profile window in units of `1/κ`.
pub const PROFILE_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellShape {
    pub a_tilde: f64,
    pub big_a_tilde: f64,
    /// Barrier height `ṽ2²/(4ṽ4)`.
    pub b_tilde: f64,
    /// `Ṽ + offset = Ã²(x² − ã²)²` for the even part.
    pub offset: f64,
    /// `|Ṽ(ã) − Ṽ(−ã)|`.
    pub vacuum_asymmetry: f64,
    pub v2: f64,
    pub v4: f64,
}

impl DoubleWellShape {
    /// `Ṽ′` of the even part.
    pub fn dv(&self, x: f64) -> f64 {
        2.0 * self.v2 * x + 4.0 * self.v4 * x * x * x
    }
}

/// Closed-form double-well geometry. `tol` bounds the odd coefficients
/// `ṽ1`, `ṽ3`.
pub fn analyze_double_well(params: &QuantumActionParams1D, tol: f64) -> Result<DoubleWellShape> {
    let v = &params.v_tilde;
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be ≥ 0, got {tol}")));
    }
    if !(v[4] > 0.0) {
        return Err(Error::NotDoubleWell(format!("ṽ4 = {} is not positive", v[4])));
    }
    if !(v[2] < 0.0) {
        return Err(Error::NotDoubleWell(format!("ṽ2 = {} is not negative", v[2])));
    }
    if v[1].abs() > tol || v[3].abs() > tol {
        return Err(Error::NotDoubleWell(format!(
            "odd coefficients ṽ1 = {}, ṽ3 = {} exceed {tol}",
            v[1], v[3]
        )));
    }
    let a = (-v[2] / (2.0 * v[4])).sqrt();
    let b = v[2] * v[2] / (4.0 * v[4]);
    Ok(DoubleWellShape {
        a_tilde: a,
        big_a_tilde: v[4].sqrt(),
        b_tilde: b,
        offset: b - v[0],
        vacuum_asymmetry: 2.0 * (v[1] * a + v[3] * a * a * a).abs(),
        v2: v[2],
        v4: v[4],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantonProfile {
    pub a_tilde: f64,
    pub kappa: f64,
    pub m_tilde: f64,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
}

impl InstantonProfile {
    pub fn at(&self, t: f64) -> f64 {
        self.a_tilde * (self.kappa * t).tanh()
    }

    /// `max |m̃ ẍ − Ṽ′(x)|` over the samples, with `ẍ` in closed form.
    pub fn eom_residual(&self, shape: &DoubleWellShape) -> f64 {
        self.times
            .iter()
            .zip(&self.x)
            .map(|(t, x)| {
                let th = (self.kappa * t).tanh();
                let acc = -2.0 * self.a_tilde * self.kappa * self.kappa * th * (1.0 - th * th);
                (self.m_tilde * acc - shape.dv(*x)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x")?;
        for (t, x) in self.times.iter().zip(&self.x) {
            writeln!(w, "{t},{x}")?;
        }
        Ok(())
    }
}

pub fn instanton_profile(shape: &DoubleWellShape, m_tilde: f64) -> Result<InstantonProfile> {
    if !(m_tilde > 0.0 && m_tilde.is_finite()) {
        return Err(Error::invalid(format!("m_tilde must be > 0, got {m_tilde}")));
    }
    let kappa = (2.0 / m_tilde).sqrt() * shape.big_a_tilde * shape.a_tilde;
    let half = PROFILE_HALF_WIDTH / kappa;
    let n = PROFILE_SAMPLES;
    let step = half / ((n - 1) / 2) as f64;
    // Symmetric index arithmetic keeps x(−t) = −x(t) exact.
    let times: Vec<f64> = (0..n).map(|k| (k as f64 - ((n - 1) / 2) as f64) * step).collect();
    let x = times.iter().map(|t| shape.a_tilde * (kappa * t).tanh()).collect();
    Ok(InstantonProfile {
        a_tilde: shape.a_tilde,
        kappa,
        m_tilde,
        times,
        x,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRow {
    pub transition_time: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub kappa: f64,
    pub m_tilde: f64,
}

/// Outcome of one family member: the row, or why it is absent.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyEntry {
    Present(FamilyRow),
    Absent { transition_time: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantonFamily {
    pub entries: Vec<FamilyEntry>,
    /// `ã` non-increasing in `T` over the present entries.
    pub a_nonincreasing: bool,
    /// `B̃` non-increasing in `T` over the present entries.
    pub b_nonincreasing: bool,
    /// First `T` at which `ṽ2 ≥ 0`, if any.
    pub v2_crossing: Option<f64>,
}

impl InstantonFamily {
    pub fn rows(&self) -> impl Iterator<Item = &FamilyRow> {
        self.entries.iter().filter_map(|e| match e {
            FamilyEntry::Present(r) => Some(r),
            FamilyEntry::Absent { .. } => None,
        })
    }

    /// `T,a_tilde,B_tilde,kappa,m_tilde`; absent entries become `#` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,a_tilde,B_tilde,kappa,m_tilde")?;
        for e in &self.entries {
            match e {
                FamilyEntry::Present(r) => writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.transition_time, r.a_tilde, r.b_tilde, r.kappa, r.m_tilde
                )?,
                FamilyEntry::Absent {
                    transition_time,
                    reason,
                } => writeln!(w, "# T={transition_time}: {reason}")?,
            }
        }
        Ok(())
    }
}

/// Shape of fitted parameters, with the odd coefficients allowed five
/// standard deviations (floored for fits whose uncertainties vanish).
pub fn fitted_shape(params: &QuantumActionParams1D, uncertainties: &BTreeMap<String, f64>) -> Result<DoubleWellShape> {
    let s = |n: &str| uncertainties.get(n).copied().unwrap_or(0.0);
    analyze_double_well(params, (5.0 * s("v1").max(s("v3"))).max(1e-6))
}

fn row(t: f64, fit: &FitResult) -> Result<FamilyRow> {
    let p = fit
        .one_d()
        .ok_or_else(|| Error::invalid("instanton analysis needs a 1-D fit"))?;
    let shape = fitted_shape(p, &fit.uncertainties)?;
    let profile = instanton_profile(&shape, p.m_tilde)?;
    Ok(FamilyRow {
        transition_time: t,
        a_tilde: shape.a_tilde,
        b_tilde: shape.b_tilde,
        kappa: profile.kappa,
        m_tilde: p.m_tilde,
    })
}

/// Instanton parameters along a fitted family (ascending `T`).
pub fn instanton_family(family: &[FamilyPoint]) -> InstantonFamily {
    let mut entries = Vec::with_capacity(family.len());
    let mut v2_crossing = None;
    for point in family {
        let t = point.transition_time;
        let entry = match &point.outcome {
            Ok(fit) => {
                if v2_crossing.is_none() && fit.one_d().is_some_and(|p| p.v_tilde[2] >= 0.0) {
                    v2_crossing = Some(t);
                }
                match row(t, fit) {
                    Ok(r) => FamilyEntry::Present(r),
                    Err(e) => FamilyEntry::Absent {
                        transition_time: t,
                        reason: e.to_string(),
                    },
                }
            }
            Err(e) => FamilyEntry::Absent {
                transition_time: t,
                reason: format!("fit failed: {e}"),
            },
        };
        entries.push(entry);
    }
    let rows: Vec<&FamilyRow> = entries
        .iter()
        .filter_map(|e| match e {
            FamilyEntry::Present(r) => Some(r),
            FamilyEntry::Absent { .. } => None,
        })
        .collect();
    let a_nonincreasing = rows.windows(2).all(|w| w[1].a_tilde <= w[0].a_tilde);
    let b_nonincreasing = rows.windows(2).all(|w| w[1].b_tilde <= w[0].b_tilde);
    InstantonFamily {
        entries,
        a_nonincreasing,
        b_nonincreasing,
        v2_crossing,
    }
}
