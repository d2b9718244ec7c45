//! Potentials, classical actions and quantum-action parameter sets.
//!
//! Sign convention used throughout the crate: the Euclidean action is
//! `S_E = ∫ (m/2) ẋ² + V(x) dt`, so its extremals obey `m ẍ = +V'(x)`
//! (motion in the inverted potential).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree accepted by the 1-D potential and ansatz.
pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConstants {
    pub hbar: f64,
    pub mass_default: f64,
    /// Coulomb coupling `e²`, only used by the hydrogen sector.
    #[serde(default = "one")]
    pub charge_sq: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PhysConstants {
    fn default() -> Self {
        PhysConstants {
            hbar: 1.0,
            mass_default: 1.0,
            charge_sq: 1.0,
        }
    }
}

impl PhysConstants {
    pub fn new(hbar: f64, mass_default: f64) -> Result<Self> {
        let c = PhysConstants {
            hbar,
            mass_default,
            charge_sq: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    /// Atomic units: ħ = m = e² = 1, so E_I = 1/2 and a₀ = 1.
    pub fn atomic() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::invalid(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if !(self.mass_default > 0.0 && self.mass_default.is_finite()) {
            return Err(Error::invalid(format!(
                "mass_default must be > 0, got {}",
                self.mass_default
            )));
        }
        if !(self.charge_sq > 0.0 && self.charge_sq.is_finite()) {
            return Err(Error::invalid(format!("charge_sq must be > 0, got {}", self.charge_sq)));
        }
        Ok(())
    }

    /// Ionisation energy `m e⁴ / (2ħ²)`.
    pub fn ionisation_energy(&self) -> f64 {
        self.mass_default * self.charge_sq * self.charge_sq / (2.0 * self.hbar * self.hbar)
    }

    /// Bohr radius `ħ² / (m e²)`.
    pub fn bohr_radius(&self) -> f64 {
        self.hbar * self.hbar / (self.mass_default * self.charge_sq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `Σ c_k x^k`, k ≤ 4.
    Polynomial1D { coeffs: Vec<f64> },
    /// `ħ² l(l+1) / (2 m r²) − e²/r` on `r > 0`.
    Radial {
        l: u32,
        electron_mass: f64,
        charge_sq: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
    /// `v0 + v2 (x²+y²) + v22 x²y² + v4 (x⁴+y⁴)`.
    Quartic2D { v0: f64, v2: f64, v22: f64, v4: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Line(f64),
    Plane(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gradient {
    Line(f64),
    Plane(f64, f64),
}

impl PotentialSpec {
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        let p = PotentialSpec::Polynomial1D {
            coeffs: coeffs.to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Hydrogen-like radial potential in units with ħ = 1.
    pub fn radial(l: u32, electron_mass: f64, charge_sq: f64) -> Result<Self> {
        let p = PotentialSpec::Radial {
            l,
            electron_mass,
            charge_sq,
            hbar: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn quartic_2d(v0: f64, v2: f64, v22: f64, v4: f64) -> Self {
        PotentialSpec::Quartic2D { v0, v2, v22, v4 }
    }

    /// The double well `1/2 − x² + x⁴/2` with minima at ±1 and barrier 1/2.
    pub fn double_well() -> Self {
        PotentialSpec::Polynomial1D {
            coeffs: vec![0.5, 0.0, -1.0, 0.0, 0.5],
        }
    }

    pub fn harmonic(mass: f64, omega: f64) -> Self {
        PotentialSpec::Polynomial1D {
            coeffs: vec![0.0, 0.0, 0.5 * mass * omega * omega],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Polynomial1D { coeffs } => {
                if coeffs.is_empty() || coeffs.len() > MAX_DEGREE + 1 {
                    return Err(Error::invalid(format!(
                        "polynomial potential needs 1..={} coefficients, got {}",
                        MAX_DEGREE + 1,
                        coeffs.len()
                    )));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("non-finite polynomial coefficient"));
                }
            }
            PotentialSpec::Radial {
                electron_mass,
                charge_sq,
                hbar,
                ..
            } => {
                if !(*electron_mass > 0.0) || !(*hbar > 0.0) || !charge_sq.is_finite() {
                    return Err(Error::invalid("radial potential needs mass > 0, hbar > 0"));
                }
            }
            PotentialSpec::Quartic2D { v0, v2, v22, v4 } => {
                if [v0, v2, v22, v4].iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("non-finite 2-D coefficient"));
                }
            }
        }
        Ok(())
    }

    pub fn is_two_dimensional(&self) -> bool {
        matches!(self, PotentialSpec::Quartic2D { .. })
    }

    /// Whether the potential grows without bound in every direction (or is
    /// a pure harmonic well). Radial potentials count as confining for
    /// spectral purposes: they bind the lowest state of each `l`.
    pub fn is_confining(&self) -> bool {
        match self {
            PotentialSpec::Polynomial1D { coeffs } => match coeffs.iter().rposition(|c| *c != 0.0) {
                Some(k) => k >= 2 && k % 2 == 0 && coeffs[k] > 0.0,
                None => false,
            },
            PotentialSpec::Radial { l, .. } => *l >= 1,
            PotentialSpec::Quartic2D { v2, v22, v4, .. } => *v4 > 0.0 || (*v4 == 0.0 && *v2 > 0.0 && *v22 >= 0.0),
        }
    }

    /// 1-D value. Errors for 2-D potentials and for `r ≤ 0` in the radial case.
    pub fn value(&self, x: f64) -> Result<f64> {
        match self {
            PotentialSpec::Polynomial1D { coeffs } => Ok(horner(coeffs, x)),
            PotentialSpec::Radial {
                l,
                electron_mass,
                charge_sq,
                hbar,
            } => {
                check_radial(x)?;
                let ll = f64::from(*l) * f64::from(*l + 1);
                Ok(hbar * hbar * ll / (2.0 * electron_mass * x * x) - charge_sq / x)
            }
            PotentialSpec::Quartic2D { .. } => Err(Error::Domain("2-D potential evaluated at a 1-D point".into())),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            PotentialSpec::Polynomial1D { coeffs } => {
                let mut d = 0.0;
                for k in (1..coeffs.len()).rev() {
                    d = d * x + k as f64 * coeffs[k];
                }
                Ok(d)
            }
            PotentialSpec::Radial {
                l,
                electron_mass,
                charge_sq,
                hbar,
            } => {
                check_radial(x)?;
                let ll = f64::from(*l) * f64::from(*l + 1);
                Ok(-hbar * hbar * ll / (electron_mass * x * x * x) + charge_sq / (x * x))
            }
            PotentialSpec::Quartic2D { .. } => Err(Error::Domain("2-D potential evaluated at a 1-D point".into())),
        }
    }

    pub fn value_2d(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            PotentialSpec::Quartic2D { v0, v2, v22, v4 } => {
                let (x2, y2) = (x * x, y * y);
                Ok(v0 + v2 * (x2 + y2) + v22 * (x2 * y2) + v4 * (x2 * x2 + y2 * y2))
            }
            _ => Err(Error::Domain("1-D potential evaluated at a 2-D point".into())),
        }
    }

    pub fn gradient_2d(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        match self {
            PotentialSpec::Quartic2D { v2, v22, v4, .. } => {
                let gx = 2.0 * v2 * x + 2.0 * v22 * x * (y * y) + 4.0 * v4 * x * x * x;
                let gy = 2.0 * v2 * y + 2.0 * v22 * y * (x * x) + 4.0 * v4 * y * y * y;
                Ok((gx, gy))
            }
            _ => Err(Error::Domain("1-D potential evaluated at a 2-D point".into())),
        }
    }
}

fn check_radial(r: f64) -> Result<()> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("radial potential requires r > 0, got {r}")))
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn eval_potential(potential: &PotentialSpec, point: Position) -> Result<f64> {
    match point {
        Position::Line(x) => potential.value(x),
        Position::Plane(x, y) => potential.value_2d(x, y),
    }
}

pub fn eval_gradient(potential: &PotentialSpec, point: Position) -> Result<Gradient> {
    match point {
        Position::Line(x) => potential.derivative(x).map(Gradient::Line),
        Position::Plane(x, y) => potential.gradient_2d(x, y).map(|(gx, gy)| Gradient::Plane(gx, gy)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalAction {
    pub mass: f64,
    pub potential: PotentialSpec,
}

impl ClassicalAction {
    pub fn new(mass: f64, potential: PotentialSpec) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be > 0, got {mass}")));
        }
        potential.validate()?;
        Ok(ClassicalAction { mass, potential })
    }
}

/// Transition time of a fitted action; `Asymptotic` tags the T → ∞ limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionTime {
    Finite(f64),
    Asymptotic(AsymptoticTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsymptoticTag {
    Asymptotic,
}

impl TransitionTime {
    pub fn asymptotic() -> Self {
        TransitionTime::Asymptotic(AsymptoticTag::Asymptotic)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            TransitionTime::Finite(t) => Some(*t),
            TransitionTime::Asymptotic(_) => None,
        }
    }
}

impl fmt::Display for TransitionTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionTime::Finite(t) => write!(f, "{t}"),
            TransitionTime::Asymptotic(_) => f.write_str("asymptotic"),
        }
    }
}

/// A 1-D Euclidean action `∫ (m/2) ẋ² + V(x) dt`, as seen by the trajectory solver.
pub trait LocalAction1D {
    fn mass(&self) -> f64;
    fn v(&self, x: f64) -> f64;
    fn dv(&self, x: f64) -> f64;
    fn d2v(&self, x: f64) -> f64;
}

/// Quantum action with the degree-4 polynomial ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumActionParams1D {
    pub m_tilde: f64,
    pub v_tilde: [f64; MAX_DEGREE + 1],
    pub transition_time: TransitionTime,
    pub ln_z: f64,
}

impl QuantumActionParams1D {
    pub fn new(m_tilde: f64, v_tilde: &[f64], transition_time: TransitionTime) -> Result<Self> {
        if v_tilde.len() > MAX_DEGREE + 1 {
            return Err(Error::invalid(format!(
                "quantum ansatz is limited to degree {MAX_DEGREE}, got {} coefficients",
                v_tilde.len()
            )));
        }
        if !(m_tilde > 0.0 && m_tilde.is_finite()) {
            return Err(Error::invalid(format!("m_tilde must be > 0, got {m_tilde}")));
        }
        let mut v = [0.0; MAX_DEGREE + 1];
        v[..v_tilde.len()].copy_from_slice(v_tilde);
        Ok(QuantumActionParams1D {
            m_tilde,
            v_tilde: v,
            transition_time,
            ln_z: 0.0,
        })
    }

    /// Quantum action equal to a classical polynomial action.
    pub fn from_classical(action: &ClassicalAction, transition_time: TransitionTime) -> Result<Self> {
        match &action.potential {
            PotentialSpec::Polynomial1D { coeffs } => Self::new(action.mass, coeffs, transition_time),
            _ => Err(Error::invalid(
                "only polynomial classical actions map onto the 1-D ansatz",
            )),
        }
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::Polynomial1D {
            coeffs: self.v_tilde.to_vec(),
        }
    }

    pub fn names() -> [&'static str; 6] {
        ["m_tilde", "v0", "v1", "v2", "v3", "v4"]
    }
}

impl LocalAction1D for QuantumActionParams1D {
    fn mass(&self) -> f64 {
        self.m_tilde
    }
    fn v(&self, x: f64) -> f64 {
        horner(&self.v_tilde, x)
    }
    fn dv(&self, x: f64) -> f64 {
        let v = &self.v_tilde;
        v[1] + x * (2.0 * v[2] + x * (3.0 * v[3] + x * 4.0 * v[4]))
    }
    fn d2v(&self, x: f64) -> f64 {
        let v = &self.v_tilde;
        2.0 * v[2] + x * (6.0 * v[3] + x * 12.0 * v[4])
    }
}

/// Terms excluded from the canonical 2-D ansatz, carried only to show that
/// they fit to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossTerms {
    /// Coefficient of `ẋẏ` in the kinetic term.
    pub kinetic_xy: f64,
    pub xy: f64,
    /// Coefficient of `xy³ + x³y`.
    pub xy3_x3y: f64,
    /// Coefficient of `x²y⁴ + x⁴y²`.
    pub x2y4_x4y2: f64,
    pub x4y4: f64,
}

impl CrossTerms {
    pub const NAMES: [&'static str; 5] = ["c_kin_xy", "c_xy", "c_xy3_x3y", "c_x2y4_x4y2", "c_x4y4"];

    pub fn to_array(&self) -> [f64; 5] {
        [self.kinetic_xy, self.xy, self.xy3_x3y, self.x2y4_x4y2, self.x4y4]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        CrossTerms {
            kinetic_xy: a[0],
            xy: a[1],
            xy3_x3y: a[2],
            x2y4_x4y2: a[3],
            x4y4: a[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumActionParams2D {
    pub m_tilde: f64,
    pub v_tilde_0: f64,
    pub v_tilde_2: f64,
    pub v_tilde_22: f64,
    pub v_tilde_4: f64,
    pub cross_terms: Option<CrossTerms>,
    pub transition_time: TransitionTime,
    pub ln_z: f64,
}

impl QuantumActionParams2D {
    pub fn from_classical(action: &ClassicalAction, transition_time: TransitionTime) -> Result<Self> {
        match action.potential {
            PotentialSpec::Quartic2D { v0, v2, v22, v4 } => {
                let p = QuantumActionParams2D {
                    m_tilde: action.mass,
                    v_tilde_0: v0,
                    v_tilde_2: v2,
                    v_tilde_22: v22,
                    v_tilde_4: v4,
                    cross_terms: None,
                    transition_time,
                    ln_z: 0.0,
                };
                p.validate()?;
                Ok(p)
            }
            _ => Err(Error::invalid("2-D ansatz requires a Quartic2D classical action")),
        }
    }

    /// `m̃ > 0` and the canonical potential bounded below: either `ṽ4 > 0`,
    /// or the harmonic part dominates (`ṽ2 > 0`) with a quartic correction
    /// that is negligible at the energies of interest.
    pub fn validate(&self) -> Result<()> {
        if !(self.m_tilde > 0.0 && self.m_tilde.is_finite()) {
            return Err(Error::invalid(format!("m_tilde must be > 0, got {}", self.m_tilde)));
        }
        if !(self.v_tilde_4 > 0.0 || self.v_tilde_2 > 0.0) {
            return Err(Error::invalid("2-D quantum potential is not confining"));
        }
        Ok(())
    }

    /// Canonical potential (cross terms dropped).
    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::Quartic2D {
            v0: self.v_tilde_0,
            v2: self.v_tilde_2,
            v22: self.v_tilde_22,
            v4: self.v_tilde_4,
        }
    }

    pub fn v(&self, x: f64, y: f64) -> f64 {
        let (x2, y2) = (x * x, y * y);
        self.v_tilde_0 + self.v_tilde_2 * (x2 + y2) + self.v_tilde_22 * (x2 * y2) + self.v_tilde_4 * (x2 * x2 + y2 * y2)
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let gx = 2.0 * self.v_tilde_2 * x + 2.0 * self.v_tilde_22 * x * (y * y) + 4.0 * self.v_tilde_4 * x * x * x;
        let gy = 2.0 * self.v_tilde_2 * y + 2.0 * self.v_tilde_22 * y * (x * x) + 4.0 * self.v_tilde_4 * y * y * y;
        (gx, gy)
    }

    pub fn names() -> [&'static str; 5] {
        ["m_tilde", "v0", "v2", "v22", "v4"]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionParams {
    OneD(QuantumActionParams1D),
    TwoD(QuantumActionParams2D),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryCheck {
    pub name: String,
    pub value: f64,
    pub uncertainty: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub checks: Vec<SymmetryCheck>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &SymmetryCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks the coefficients the ansatz symmetries force to zero: the odd
/// terms `ṽ1, ṽ3` in 1-D, the cross terms in 2-D. A coefficient passes when
/// `|c| ≤ max(tolerance, σ_c)`; missing uncertainties count as zero.
pub fn validate_symmetries(
    params: &ActionParams,
    uncertainties: Option<&BTreeMap<String, f64>>,
    tolerance: f64,
) -> SymmetryReport {
    let sigma = |name: &str| uncertainties.and_then(|u| u.get(name)).copied().unwrap_or(0.0);
    let mut coeffs: Vec<(String, f64)> = Vec::new();
    match params {
        ActionParams::OneD(p) => {
            coeffs.push(("v1".into(), p.v_tilde[1]));
            coeffs.push(("v3".into(), p.v_tilde[3]));
        }
        ActionParams::TwoD(p) => {
            if let Some(c) = p.cross_terms {
                for (name, value) in CrossTerms::NAMES.iter().zip(c.to_array()) {
                    coeffs.push(((*name).into(), value));
                }
            }
        }
    }
    let checks = coeffs
        .into_iter()
        .map(|(name, value)| {
            let uncertainty = sigma(&name);
            let threshold = tolerance.max(uncertainty);
            SymmetryCheck {
                passed: value.abs() <= threshold,
                name,
                value,
                uncertainty,
                threshold,
            }
        })
        .collect();
    SymmetryReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_vanishes_at_minimum() {
        let dw = PotentialSpec::double_well();
        assert_eq!(eval_potential(&dw, Position::Line(1.0)).unwrap(), 0.0);
        assert_eq!(eval_potential(&dw, Position::Line(-1.0)).unwrap(), 0.0);
        assert_eq!(dw.value(0.0).unwrap(), 0.5);
    }

    #[test]
    fn double_well_stationary_points() {
        let dw = PotentialSpec::double_well();
        for x in [-1.0, 0.0, 1.0] {
            assert_eq!(eval_gradient(&dw, Position::Line(x)).unwrap(), Gradient::Line(0.0));
        }
    }

    #[test]
    fn quartic_2d_origin_and_gradient() {
        let v = PotentialSpec::quartic_2d(0.0, 0.5, 0.05, 0.0);
        assert_eq!(eval_potential(&v, Position::Plane(0.0, 0.0)).unwrap(), 0.0);
        match eval_gradient(&v, Position::Plane(1.0, 1.0)).unwrap() {
            Gradient::Plane(gx, gy) => {
                assert!((gx - 1.1).abs() < 1e-15);
                assert!((gy - 1.1).abs() < 1e-15);
            }
            g => panic!("unexpected gradient {g:?}"),
        }
    }

    #[test]
    fn radial_value_and_domain() {
        let v = PotentialSpec::radial(1, 1.0, 1.0).unwrap();
        assert!((v.value(2.0).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(v.value(0.0), Err(Error::Domain(_))));
        assert!(matches!(v.derivative(-1.0), Err(Error::Domain(_))));
        assert!(v.value(1e-6).unwrap() > 1e9);
        let far = v.value(1e8).unwrap();
        assert!(far < 0.0 && far > -1e-7);
    }

    #[test]
    fn dimension_mismatch_is_domain_error() {
        let v = PotentialSpec::double_well();
        assert!(matches!(v.value_2d(0.0, 0.0), Err(Error::Domain(_))));
        let q = PotentialSpec::quartic_2d(0.0, 0.5, 0.05, 0.0);
        assert!(matches!(q.value(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ansatz_rejects_higher_degree() {
        let r = QuantumActionParams1D::new(1.0, &[0.0; 6], TransitionTime::Finite(1.0));
        assert!(r.is_err());
        assert!(PotentialSpec::polynomial(&[0.0; 6]).is_err());
        assert!(QuantumActionParams1D::new(0.0, &[0.0], TransitionTime::Finite(1.0)).is_err());
    }

    #[test]
    fn confinement() {
        assert!(PotentialSpec::double_well().is_confining());
        assert!(PotentialSpec::harmonic(1.0, 1.0).is_confining());
        assert!(!PotentialSpec::polynomial(&[0.0, 1.0]).unwrap().is_confining());
        assert!(!PotentialSpec::polynomial(&[0.0, 0.0, 0.0, 1.0]).unwrap().is_confining());
        assert!(!PotentialSpec::polynomial(&[0.0, 0.0, 0.0, 0.0, -1.0])
            .unwrap()
            .is_confining());
    }

    #[test]
    fn symmetry_report_on_a_reference_fit_passes() {
        let p = QuantumActionParams1D::new(0.9961, &[1.5710, 0.0, -0.745, 0.0, 0.493], TransitionTime::Finite(0.5))
            .unwrap();
        let sig: BTreeMap<String, f64> = [("v1".to_string(), 0.002), ("v3".to_string(), 0.002)].into();
        let r = validate_symmetries(&ActionParams::OneD(p), Some(&sig), 0.01);
        assert!(r.passed());
    }

    #[test]
    fn symmetry_report_flags_forced_violation() {
        let p = QuantumActionParams1D::new(1.0, &[0.0, 0.5, 0.5], TransitionTime::Finite(1.0)).unwrap();
        let sig: BTreeMap<String, f64> = [("v1".to_string(), 0.001)].into();
        let r = validate_symmetries(&ActionParams::OneD(p), Some(&sig), 0.01);
        assert!(!r.passed());
        let bad: Vec<_> = r.violations().map(|c| c.name.as_str()).collect();
        assert_eq!(bad, ["v1"]);
    }

    #[test]
    fn symmetry_report_small_cross_terms_pass() {
        let action = ClassicalAction::new(1.0, PotentialSpec::quartic_2d(0.0, 0.5, 0.05, 0.0)).unwrap();
        let mut p = QuantumActionParams2D::from_classical(&action, TransitionTime::Finite(4.5)).unwrap();
        p.cross_terms = Some(CrossTerms::from_array([1e-12, -3e-12, 5e-13, 8e-5, -2e-5]));
        assert!(validate_symmetries(&ActionParams::TwoD(p.clone()), None, 1e-3).passed());
        p.cross_terms = Some(CrossTerms::from_array([0.0, 0.1, 0.0, 0.0, 0.0]));
        assert!(!validate_symmetries(&ActionParams::TwoD(p), None, 1e-3).passed());
    }

    #[test]
    fn transition_time_serde_roundtrip() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W {
            t: TransitionTime,
        }
        for t in [TransitionTime::Finite(0.5), TransitionTime::asymptotic()] {
            let s = toml::to_string(&W { t }).unwrap();
            let back: W = toml::from_str(&s).unwrap();
            assert_eq!(back.t, t);
        }
    }
}
