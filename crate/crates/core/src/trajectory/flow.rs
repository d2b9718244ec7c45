//! Real-time flow under `H̃ = (p_x² + p_y²)/(2m̃) + Ṽ(x, y)` with the
//! kick-drift-kick leapfrog scheme. Only the canonical ansatz potential is
//! used; diagnostic cross terms are ignored.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::QuantumActionParams2D;

/// Relative energy drift at which integration is abandoned.
pub const MAX_ENERGY_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub q: (f64, f64),
    pub p: (f64, f64),
    pub energy: f64,
}

impl FlowSample {
    /// State at `q, p` with its energy evaluated under `params`.
    pub fn new(params: &QuantumActionParams2D, t: f64, q: (f64, f64), p: (f64, f64)) -> Self {
        FlowSample {
            t,
            q,
            p,
            energy: hamiltonian(params, q, p),
        }
    }
}

pub fn hamiltonian(params: &QuantumActionParams2D, q: (f64, f64), p: (f64, f64)) -> f64 {
    (p.0 * p.0 + p.1 * p.1) / (2.0 * params.m_tilde) + params.v(q.0, q.1)
}

/// Streaming leapfrog integrator; `dt` may be negative to run backwards.
#[derive(Debug, Clone)]
pub struct Leapfrog<'a> {
    params: &'a QuantumActionParams2D,
    dt: f64,
    steps: u64,
    t0: f64,
    h0: f64,
    pub state: FlowSample,
    force: (f64, f64),
}

impl<'a> Leapfrog<'a> {
    pub fn new(params: &'a QuantumActionParams2D, initial: FlowSample, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!(
                "time step must be finite and non-zero, got {dt}"
            )));
        }
        let state = FlowSample::new(params, initial.t, initial.q, initial.p);
        let g = params.grad(state.q.0, state.q.1);
        Ok(Leapfrog {
            params,
            dt,
            steps: 0,
            t0: initial.t,
            h0: state.energy,
            state,
            force: (-g.0, -g.1),
        })
    }

    pub fn initial_energy(&self) -> f64 {
        self.h0
    }

    pub fn step(&mut self) -> Result<()> {
        let (dt, m) = (self.dt, self.params.m_tilde);
        let s = &mut self.state;
        let px = s.p.0 + 0.5 * dt * self.force.0;
        let py = s.p.1 + 0.5 * dt * self.force.1;
        let x = s.q.0 + dt * px / m;
        let y = s.q.1 + dt * py / m;
        let g = self.params.grad(x, y);
        self.force = (-g.0, -g.1);
        s.p = (px + 0.5 * dt * self.force.0, py + 0.5 * dt * self.force.1);
        s.q = (x, y);
        self.steps += 1;
        s.t = self.t0 + self.steps as f64 * dt;
        s.energy = hamiltonian(self.params, s.q, s.p);
        let drift = (s.energy - self.h0).abs() / self.h0.abs().max(f64::MIN_POSITIVE);
        if !(drift <= MAX_ENERGY_DRIFT) {
            return Err(Error::IntegratorInstability { drift, time: s.t });
        }
        Ok(())
    }

    /// Force `−∇Ṽ` at the current position.
    pub fn force(&self) -> (f64, f64) {
        self.force
    }
}

/// Every step of the flow from `initial` over `|t_max|` (sign taken from `dt`).
pub fn integrate_realtime(
    params: &QuantumActionParams2D,
    initial: FlowSample,
    t_max: f64,
    dt: f64,
) -> Result<Vec<FlowSample>> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!("t_max must be ≥ 0, got {t_max}")));
    }
    let mut lf = Leapfrog::new(params, initial, dt)?;
    let n = (t_max / dt.abs()).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(lf.state);
    for _ in 0..n {
        lf.step()?;
        out.push(lf.state);
    }
    Ok(out)
}

pub fn write_flow_csv<W: Write>(samples: &[FlowSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,x,y,px,py,H")?;
    for s in samples {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.q.0, s.q.1, s.p.0, s.p.1, s.energy)?;
    }
    Ok(())
}
