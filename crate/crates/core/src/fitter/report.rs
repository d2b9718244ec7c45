//! Text form of a [`FitResult`]: a TOML document with the parameter values,
//! their uncertainties and the fit diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{names_1d, names_2d, FitResult, Normalization};
use crate::error::{Error, Result};
use crate::model::{ActionParams, CrossTerms, QuantumActionParams1D, QuantumActionParams2D, TransitionTime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub dimension: u8,
    pub transition_time: f64,
    pub chi2: f64,
    pub n_pairs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub normalization: Normalization,
    /// Values by name, including `ln_z`.
    pub parameters: BTreeMap<String, f64>,
    pub uncertainties: BTreeMap<String, f64>,
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: message.into(),
    }
}

impl FitReport {
    pub fn from_result(fit: &FitResult) -> Result<Self> {
        let transition_time = fit
            .transition_time()
            .finite()
            .ok_or_else(|| Error::invalid("fit results carry a finite transition time"))?;
        let dimension = match fit.params {
            ActionParams::OneD(_) => 1,
            ActionParams::TwoD(_) => 2,
        };
        Ok(FitReport {
            dimension,
            transition_time,
            chi2: fit.chi2,
            n_pairs: fit.n_pairs,
            converged: fit.converged,
            iterations: fit.iterations,
            normalization: fit.normalization,
            parameters: fit.values(),
            uncertainties: fit.uncertainties.clone(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("cannot serialise report: {e}")))
    }

    /// Parses and validates a report.
    pub fn parse(text: &str) -> Result<Self> {
        let report: FitReport = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        report.validate()?;
        Ok(report)
    }

    fn expected_names(&self) -> Result<Vec<String>> {
        let mut names = match self.dimension {
            1 => names_1d(),
            2 => names_2d(self.parameters.contains_key(CrossTerms::NAMES[0])),
            d => return Err(parse_err(format!("dimension must be 1 or 2, got {d}"))),
        };
        names.push("ln_z".into());
        names.sort();
        Ok(names)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.expected_names()?;
        let have: Vec<String> = self.parameters.keys().cloned().collect();
        if have != names {
            return Err(parse_err(format!("parameters must be exactly {names:?}, got {have:?}")));
        }
        let have_u: Vec<String> = self.uncertainties.keys().cloned().collect();
        if have_u != names {
            return Err(parse_err(format!(
                "uncertainties must be exactly {names:?}, got {have_u:?}"
            )));
        }
        if !(self.transition_time > 0.0 && self.transition_time.is_finite()) {
            return Err(parse_err("transition_time must be positive and finite"));
        }
        if !(self.chi2 >= 0.0) {
            return Err(parse_err("chi2 must be ≥ 0"));
        }
        if self.parameters.values().any(|v| !v.is_finite()) {
            return Err(parse_err("parameter values must be finite"));
        }
        if self.uncertainties.values().any(|u| !(*u >= 0.0)) {
            return Err(parse_err("uncertainties must be ≥ 0"));
        }
        if !(self.parameters["m_tilde"] > 0.0) {
            return Err(parse_err("m_tilde must be > 0"));
        }
        Ok(())
    }

    /// The action parameters the report describes.
    pub fn params(&self) -> Result<ActionParams> {
        self.validate()?;
        let p = &self.parameters;
        let t = TransitionTime::Finite(self.transition_time);
        Ok(match self.dimension {
            1 => ActionParams::OneD(QuantumActionParams1D {
                m_tilde: p["m_tilde"],
                v_tilde: [p["v0"], p["v1"], p["v2"], p["v3"], p["v4"]],
                transition_time: t,
                ln_z: p["ln_z"],
            }),
            _ => ActionParams::TwoD(QuantumActionParams2D {
                m_tilde: p["m_tilde"],
                v_tilde_0: p["v0"],
                v_tilde_2: p["v2"],
                v_tilde_22: p["v22"],
                v_tilde_4: p["v4"],
                cross_terms: p
                    .contains_key(CrossTerms::NAMES[0])
                    .then(|| CrossTerms::from_array(CrossTerms::NAMES.map(|n| p[n]))),
                transition_time: t,
                ln_z: p["ln_z"],
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FitReport {
        let mut parameters = BTreeMap::new();
        let mut uncertainties = BTreeMap::new();
        for (n, v) in ["m_tilde", "v0", "v1", "v2", "v3", "v4", "ln_z"]
            .iter()
            .zip([0.9961, 1.571, 0.0, -0.745, 0.0, 0.493, 0.0])
        {
            parameters.insert(n.to_string(), v);
            uncertainties.insert(n.to_string(), 1e-4);
        }
        FitReport {
            dimension: 1,
            transition_time: 0.5,
            chi2: 1.5e-6,
            n_pairs: 231,
            converged: true,
            iterations: 9,
            normalization: Normalization::Unit,
            parameters,
            uncertainties,
        }
    }

    #[test]
    fn round_trip() {
        let r = sample();
        let text = r.to_toml().unwrap();
        assert_eq!(FitReport::parse(&text).unwrap(), r);
        let ActionParams::OneD(p) = r.params().unwrap() else {
            panic!("expected 1-D")
        };
        assert_eq!(p.v_tilde[2], -0.745);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(FitReport::parse("").is_err());
        assert!(FitReport::parse("dimension = 3").is_err());
        let mut r = sample();
        r.parameters.remove("v3");
        let text = r.to_toml().unwrap();
        assert!(matches!(FitReport::parse(&text), Err(Error::Parse { .. })));
        let mut r = sample();
        r.uncertainties.insert("v1".into(), -1.0);
        assert!(FitReport::parse(&r.to_toml().unwrap()).is_err());
        let text = sample().to_toml().unwrap() + "extra = 1\n";
        assert!(FitReport::parse(&text).is_err());
    }
}
