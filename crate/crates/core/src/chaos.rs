//! Poincaré sections of the real-time flow of a 2-D action on the plane
//! `y = 0`, crossed with `ẏ > 0`, recorded as `(x, p_x)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QuantumActionParams2D;
use crate::trajectory::{hamiltonian, FlowSample, Leapfrog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    pub params: QuantumActionParams2D,
    pub energy: f64,
    pub n_seeds: usize,
    pub seed: u64,
    pub t_max: f64,
    pub dt: f64,
}

impl SectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_seeds == 0 {
            return Err(Error::invalid("n_seeds must be ≥ 1"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if !(self.dt != 0.0 && self.dt.is_finite() && self.dt.abs() <= self.t_max) {
            return Err(Error::invalid(format!(
                "dt must be non-zero and ≤ t_max, got {}",
                self.dt
            )));
        }
        if !self.energy.is_finite() {
            return Err(Error::invalid("energy must be finite"));
        }
        if allowed_half_width(&self.params, self.energy).is_none() {
            return Err(Error::EnergyTooLow { energy: self.energy });
        }
        Ok(())
    }
}

/// Largest `|x|` on the line `y = 0` with `Ṽ(x, 0) ≤ E`, or `None` if no
/// node of a fine scan is allowed.
fn allowed_half_width(params: &QuantumActionParams2D, e: f64) -> Option<f64> {
    let v = |x: f64| params.v(x, 0.0);
    // Outer bound: the potential is confining along the axis.
    let mut outer = 1.0;
    while v(outer) <= e || v(-outer) <= e {
        outer *= 2.0;
        if outer > 1e12 {
            return None;
        }
    }
    let samples = 4096;
    let mut inner = None;
    for k in (0..=samples).rev() {
        let x = outer * k as f64 / samples as f64;
        if v(x) <= e || v(-x) <= e {
            inner = Some(x);
            break;
        }
    }
    let mut lo = inner?;
    let mut hi = outer;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v(mid) <= e || v(-mid) <= e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Initial states on `y = 0` with `p_y > 0` and `H = E`: `x` uniform over the
/// allowed interval (by rejection), `p_x` uniform over its allowed range.
pub fn seed_energy_shell(params: &QuantumActionParams2D, energy: f64, n: usize, seed: u64) -> Result<Vec<FlowSample>> {
    params.validate()?;
    let m = params.m_tilde;
    let width = allowed_half_width(params, energy).ok_or(Error::EnergyTooLow { energy })?;
    if !(width > 0.0) && !(params.v(0.0, 0.0) < energy) {
        return Err(Error::EnergyTooLow { energy });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n.max(1) {
            return Err(Error::EnergyTooLow { energy });
        }
        let x = if width > 0.0 {
            rng.random_range(-width..=width)
        } else {
            0.0
        };
        let kin = 2.0 * m * (energy - params.v(x, 0.0));
        if !(kin > 0.0) {
            continue;
        }
        let pmax = kin.sqrt();
        let px = rng.random_range(-pmax..=pmax);
        let py = (kin - px * px).max(0.0).sqrt();
        if !(py > 0.0) {
            continue;
        }
        out.push(FlowSample::new(params, 0.0, (x, 0.0), (px, py)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareSection {
    pub config: SectionConfig,
    /// Per trajectory: `(x, p_x)` at each crossing.
    pub points: Vec<Vec<(f64, f64)>>,
    /// Per trajectory: `H` at each crossing.
    pub energies: Vec<Vec<f64>>,
    /// Per trajectory: why integration stopped early, if it did.
    pub aborted: Vec<Option<String>>,
}

impl PoincareSection {
    /// `max |H − E|/|E|` over all crossings.
    pub fn max_energy_error(&self) -> f64 {
        let e = self.config.energy;
        self.energies
            .iter()
            .flatten()
            .map(|h| (h - e).abs() / e.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn n_crossings(&self) -> usize {
        self.points.iter().map(Vec::len).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "trajectory_id,crossing_index,x,px,H")?;
        for (id, (pts, hs)) in self.points.iter().zip(&self.energies).enumerate() {
            if let Some(reason) = &self.aborted[id] {
                writeln!(w, "# trajectory {id} aborted: {reason}")?;
            }
            for (k, ((x, px), h)) in pts.iter().zip(hs).enumerate() {
                writeln!(w, "{id},{k},{x},{px},{h}")?;
            }
        }
        Ok(())
    }
}

/// Cubic Hermite interpolant on `[0, 1]` from values and derivatives (the
/// derivatives already scaled by the interval length).
fn hermite(f0: f64, d0: f64, f1: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1
}

fn hermite_slope(f0: f64, d0: f64, f1: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * f0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * f1 + (3.0 * s2 - 2.0 * s) * d1
}

#[derive(Clone, Copy)]
struct Node {
    q: (f64, f64),
    p: (f64, f64),
    f: (f64, f64),
}

/// Crossing of `y = 0` between two steps, located on the Hermite cubic of
/// `(y, ẏ)`; returns the interpolated `(x, p_x, p_y)` if `y` rises through
/// zero along the direction of integration.
fn crossing(a: &Node, b: &Node, m: f64, dt: f64) -> Option<(f64, f64, f64)> {
    if !(a.q.1 < 0.0 && b.q.1 >= 0.0) {
        return None;
    }
    let (y0, y1) = (a.q.1, b.q.1);
    let (dy0, dy1) = (a.p.1 / m * dt, b.p.1 / m * dt);
    // Bisection keeps the root bracketed even if the cubic is not monotone.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hermite(y0, dy0, y1, dy1, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    if !(hermite_slope(y0, dy0, y1, dy1, s) > 0.0) {
        return None;
    }
    let x = hermite(a.q.0, a.p.0 / m * dt, b.q.0, b.p.0 / m * dt, s);
    let px = hermite(a.p.0, a.f.0 * dt, b.p.0, b.f.0 * dt, s);
    let py = hermite(a.p.1, a.f.1 * dt, b.p.1, b.f.1 * dt, s);
    Some((x, px, py))
}

struct Trace {
    points: Vec<(f64, f64)>,
    energies: Vec<f64>,
    aborted: Option<String>,
}

fn trace(params: &QuantumActionParams2D, initial: FlowSample, t_max: f64, dt: f64) -> Trace {
    let mut out = Trace {
        points: Vec::new(),
        energies: Vec::new(),
        aborted: None,
    };
    let mut lf = match Leapfrog::new(params, initial, dt) {
        Ok(lf) => lf,
        Err(e) => {
            out.aborted = Some(e.to_string());
            return out;
        }
    };
    let m = params.m_tilde;
    let n = (t_max / dt.abs()).round() as u64;
    let node = |lf: &Leapfrog| Node {
        q: lf.state.q,
        p: lf.state.p,
        f: lf.force(),
    };
    let mut prev = node(&lf);
    for _ in 0..n {
        if let Err(e) = lf.step() {
            out.aborted = Some(e.to_string());
            break;
        }
        let cur = node(&lf);
        if let Some((x, px, py)) = crossing(&prev, &cur, m, dt) {
            out.points.push((x, px));
            out.energies.push(hamiltonian(params, (x, 0.0), (px, py)));
        }
        prev = cur;
    }
    out
}

/// Section of every seed on the configured energy shell; trajectories run in
/// parallel and are reported in seed order.
pub fn poincare_section(config: &SectionConfig) -> Result<PoincareSection> {
    config.validate()?;
    let seeds = seed_energy_shell(&config.params, config.energy, config.n_seeds, config.seed)?;
    poincare_section_from(config, &seeds)
}

/// Section from explicit initial states (e.g. reflected or time-reversed
/// seeds).
pub fn poincare_section_from(config: &SectionConfig, seeds: &[FlowSample]) -> Result<PoincareSection> {
    config.validate()?;
    let traces: Vec<Trace> = seeds
        .par_iter()
        .map(|s| trace(&config.params, *s, config.t_max, config.dt))
        .collect();
    let mut points = Vec::with_capacity(traces.len());
    let mut energies = Vec::with_capacity(traces.len());
    let mut aborted = Vec::with_capacity(traces.len());
    for t in traces {
        points.push(t.points);
        energies.push(t.energies);
        aborted.push(t.aborted);
    }
    Ok(PoincareSection {
        config: config.clone(),
        points,
        energies,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassicalAction, PotentialSpec, TransitionTime};

    fn params(v22: f64) -> QuantumActionParams2D {
        let a = ClassicalAction::new(1.0, PotentialSpec::quartic_2d(0.0, 0.5, v22, 0.0)).unwrap();
        QuantumActionParams2D::from_classical(&a, TransitionTime::Finite(4.5)).unwrap()
    }

    fn config(v22: f64, t_max: f64, dt: f64) -> SectionConfig {
        SectionConfig {
            params: params(v22),
            energy: 10.0,
            n_seeds: 4,
            seed: 7,
            t_max,
            dt,
        }
    }

    #[test]
    fn seeds_lie_on_the_shell() {
        let p = params(0.05);
        let a = seed_energy_shell(&p, 10.0, 50, 3).unwrap();
        let b = seed_energy_shell(&p, 10.0, 50, 3).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!((s.energy - 10.0).abs() < 1e-12);
            assert_eq!(s.q.1, 0.0);
            assert!(s.p.1 > 0.0);
        }
        assert_ne!(a, seed_energy_shell(&p, 10.0, 50, 4).unwrap());
        assert!(matches!(
            seed_energy_shell(&p, -1.0, 5, 3),
            Err(Error::EnergyTooLow { .. })
        ));
    }

    #[test]
    fn crossings_conserve_energy() {
        let s = poincare_section(&config(0.05, 200.0, 1e-3)).unwrap();
        assert!(s.n_crossings() > 100);
        assert!(s.aborted.iter().all(Option::is_none));
        let err = s.max_energy_error();
        assert!(err < 1e-6, "{err}");
        // Leapfrog energy error is second order in dt.
        let half = poincare_section(&config(0.05, 200.0, 5e-4)).unwrap();
        assert!(
            half.max_energy_error() * 4.0 <= err * 1.05,
            "{} vs {err}",
            half.max_energy_error()
        );
        let p = &s.config.params;
        for ((x, px), _) in s.points.iter().flatten().zip(s.energies.iter().flatten()) {
            assert!(px * px <= 2.0 * p.m_tilde * (10.0 - p.v(*x, 0.0)) + 1e-6);
        }
    }

    #[test]
    fn integrable_case_gives_invariant_curves() {
        let s = poincare_section(&config(0.0, 300.0, 1e-3)).unwrap();
        for pts in &s.points {
            assert!(pts.len() > 10);
            let ex: Vec<f64> = pts.iter().map(|(x, px)| 0.5 * px * px + 0.5 * x * x).collect();
            let mean = ex.iter().sum::<f64>() / ex.len() as f64;
            let var = ex.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / ex.len() as f64;
            assert!(var < 1e-10 * 100.0, "{var}");
        }
    }

    #[test]
    fn parity_and_time_reversal() {
        let c = config(0.05, 50.0, 1e-3);
        let seeds = seed_energy_shell(&c.params, c.energy, c.n_seeds, c.seed).unwrap();
        let base = poincare_section_from(&c, &seeds).unwrap();
        let mirrored: Vec<FlowSample> = seeds
            .iter()
            .map(|s| FlowSample::new(&c.params, 0.0, (-s.q.0, s.q.1), (-s.p.0, s.p.1)))
            .collect();
        let m = poincare_section_from(&c, &mirrored).unwrap();
        for (a, b) in base.points.iter().flatten().zip(m.points.iter().flatten()) {
            assert!((a.0 + b.0).abs() < 1e-9 && (a.1 + b.1).abs() < 1e-9);
        }
        // Flipping momenta and stepping backwards retraces the same orbit
        // with p → −p.
        let reversed: Vec<FlowSample> = seeds
            .iter()
            .map(|s| FlowSample::new(&c.params, 0.0, s.q, (-s.p.0, -s.p.1)))
            .collect();
        let back = SectionConfig { dt: -c.dt, ..c.clone() };
        let r = poincare_section_from(&back, &reversed).unwrap();
        assert_eq!(r.n_crossings(), base.n_crossings());
        for (a, b) in base.points.iter().flatten().zip(r.points.iter().flatten()) {
            assert!((a.0 - b.0).abs() < 1e-8 && (a.1 + b.1).abs() < 1e-8, "{a:?} {b:?}");
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = config(0.05, 20.0, 1e-3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| poincare_section(&c)).unwrap();
        let b = four.install(|| poincare_section(&c)).unwrap();
        assert_eq!(a, b);
    }
}
