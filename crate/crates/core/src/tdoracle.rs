//! Fixed-step transient integration of the flux-node network.
//!
//! The network equation `C·Φ̈ + G·Φ̇ + K·Φ + i_J(Φ) = i_s(t)` is integrated
//! with the average-acceleration Newmark scheme (the trapezoidal rule for a
//! second-order system) and a Newton solve per step. Sources start from a
//! zero state and ramp in smoothly, so the tail of a long run is the
//! periodic steady state that [`spectrum`] decomposes into harmonics.
//!
//! Dielectric loss `jω|ω|·C·tanδ` has no exact time-domain form; it is
//! modelled as the conductance `ω_ref·C·tanδ` at one reference frequency.
//!
//! Cost grows with circuit size times step count, so runs are limited to a
//! few cells unless the guard is overridden.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{across, Circuit};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::netlist::Netlist;
use crate::{FLUX_QUANTUM, REDUCED_FLUX_QUANTUM};

/// Largest cell count accepted without [`TransientConfig::override_guard`].
pub const MAX_CELLS: usize = 20;
/// Junctions per SNAIL cell used to estimate the cell count of a netlist.
const JUNCTIONS_PER_CELL: usize = 4;
/// Minimum time steps per period of the highest source frequency.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;
/// Minimum run length in periods of the lowest source frequency.
pub const MIN_PERIODS: f64 = 200.0;

const NEWTON_MAX_ITERATIONS: usize = 30;
const NEWTON_STEP_TOLERANCE: f64 = 1e-12;
const MAX_SUBDIVISIONS: u32 = 6;

/// Sinusoidal Norton current `A·cos(2πft + phase)` into port `port`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSource {
    pub port: u32,
    /// Peak current (A).
    pub amplitude: f64,
    /// Frequency (Hz).
    pub frequency: f64,
    /// Phase (rad).
    pub phase: f64,
}

impl ToneSource {
    pub fn new(port: u32, amplitude: f64, frequency: f64) -> Self {
        Self {
            port,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientConfig {
    /// End time (s).
    pub t_stop: f64,
    /// Step (s).
    pub dt: f64,
    pub sources: Vec<ToneSource>,
    /// DC current into `flux_port` (A), ramped in with the tones.
    pub dc_flux_current: f64,
    pub flux_port: u32,
    /// Node names whose flux is recorded.
    pub record_nodes: Vec<String>,
    /// Ramp length in periods of the lowest source frequency.
    pub ramp_periods: f64,
    /// Frequency at which dielectric loss is evaluated; defaults to the
    /// lowest source frequency.
    pub loss_reference_hz: Option<f64>,
    /// Run circuits above [`MAX_CELLS`].
    pub override_guard: bool,
}

impl TransientConfig {
    pub fn new(t_stop: f64, dt: f64) -> Self {
        Self {
            t_stop,
            dt,
            sources: Vec::new(),
            dc_flux_current: 0.0,
            flux_port: 3,
            record_nodes: Vec::new(),
            ramp_periods: 20.0,
            loss_reference_hz: None,
            override_guard: false,
        }
    }

    fn frequency_range(&self) -> Option<(f64, f64)> {
        let mut it = self.sources.iter().map(|s| s.frequency);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), f| (lo.min(f), hi.max(f))))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t_stop.is_finite() && self.t_stop > self.dt) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt < t_stop, got dt={} t_stop={}",
                self.dt, self.t_stop
            )));
        }
        for s in &self.sources {
            if !(s.frequency.is_finite() && s.frequency > 0.0 && s.amplitude.is_finite() && s.phase.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad source {s:?}")));
            }
        }
        if !self.dc_flux_current.is_finite() || !(self.ramp_periods.is_finite() && self.ramp_periods >= 0.0) {
            return Err(Error::InvalidParameter("dc current and ramp must be finite".into()));
        }
        if let Some((lo, hi)) = self.frequency_range() {
            if self.dt * MIN_STEPS_PER_PERIOD * hi >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "dt={} must be below 1/({MIN_STEPS_PER_PERIOD}·{hi})",
                    self.dt
                )));
            }
            if self.t_stop * lo < MIN_PERIODS {
                return Err(Error::InvalidParameter(format!(
                    "t_stop covers {:.1} periods of {lo} Hz, need {MIN_PERIODS}",
                    self.t_stop * lo
                )));
            }
        }
        Ok(())
    }
}

/// Work and energy totals over a run, all in joules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    /// Work done by all sources.
    pub source: f64,
    /// Capacitive, inductive and junction energy at `t_stop`.
    pub stored: f64,
    /// Heat in port resistors and dielectric loss.
    pub dissipated: f64,
}

impl EnergyBalance {
    /// `|source − stored − dissipated| / source`.
    pub fn relative_error(&self) -> f64 {
        (self.source - self.stored - self.dissipated).abs() / self.source.abs()
    }
}

/// Recorded node fluxes sampled at `t = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transient {
    pub dt: f64,
    pub nodes: Vec<String>,
    /// `flux[i][k]` (Wb) for `nodes[i]`.
    pub flux: Vec<Vec<f64>>,
    pub energy: EnergyBalance,
    /// Flux of the DC anchor of each recorded node's floating group.
    gauge: Vec<Option<Vec<f64>>>,
}

impl Transient {
    pub fn series(&self, node: &str) -> Option<&[f64]> {
        let i = self.nodes.iter().position(|n| n == node)?;
        Some(&self.flux[i])
    }

    /// Harmonics of a recorded node in the gauge of the harmonic-balance
    /// solver: the DC flux of a group with no inductive path to ground is
    /// taken relative to that group's anchor node.
    pub fn spectrum(&self, node: &str, f_base: f64, harmonics: usize) -> Result<Vec<Complex64>> {
        let i = self
            .nodes
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| Error::InvalidParameter(format!("node {node} was not recorded")))?;
        let mut x = spectrum(&self.flux[i], self.dt, f_base, harmonics)?;
        if let Some(g) = &self.gauge[i] {
            x[0] -= spectrum(g, self.dt, f_base, 0)?[0];
        }
        Ok(x)
    }

    /// `t,<node>...` rows, one per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.nodes {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        let len = self.flux.first().map_or(0, Vec::len);
        for k in 0..len {
            out.push_str(&format!("{:?}", k as f64 * self.dt));
            for s in &self.flux {
                out.push_str(&format!(",{:?}", s[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Amplitudes `X_h`, `h = 0..=harmonics`, with `x(t) ≈ Re Σ X_h·e^{jh2πf_base·t}`,
/// from a plain DFT over the largest whole number of base periods in the
/// second half of `samples` (sampled at `t = k·dt`).
pub fn spectrum(samples: &[f64], dt: f64, f_base: f64, harmonics: usize) -> Result<Vec<Complex64>> {
    if !(dt > 0.0 && f_base > 0.0) {
        return Err(Error::InvalidParameter("dt and f_base must be positive".into()));
    }
    let exact = 1.0 / (f_base * dt);
    let period = exact.round();
    if period < 1.0 || (exact - period).abs() > 1e-6 * exact {
        return Err(Error::InvalidParameter(format!(
            "base period is {exact} steps; it must be a whole number"
        )));
    }
    let period = period as usize;
    let tail = samples.len() - samples.len() / 2;
    let periods = tail / period;
    if periods == 0 {
        return Err(Error::InsufficientLength(format!(
            "{} samples hold no full base period of {period} samples after discarding the first half",
            samples.len()
        )));
    }
    let count = periods * period;
    let start = samples.len() - count;
    let w = std::f64::consts::TAU * f_base * dt;
    Ok((0..=harmonics)
        .map(|h| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &x) in samples[start..].iter().enumerate() {
                // phase reduced modulo the period keeps the argument small
                let idx = ((start + k) * h) % period;
                acc += x * Complex64::from_polar(1.0, -w * idx as f64);
            }
            let scale = if h == 0 { 1.0 } else { 2.0 };
            acc * (scale / count as f64)
        })
        .collect())
}

struct Injection {
    a: Option<usize>,
    b: Option<usize>,
    tone: Option<ToneSource>,
    dc: f64,
}

struct Integrator<'a> {
    circuit: &'a Circuit,
    injections: Vec<Injection>,
    ramp: f64,
    /// `(row, col, c, g, k)` with dielectric loss folded into `g`.
    entries: Vec<(usize, usize, f64, f64, f64)>,
    bandwidth: usize,
}

#[derive(Clone)]
struct StepState {
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

impl Integrator<'_> {
    fn envelope(&self, t: f64) -> f64 {
        if t >= self.ramp {
            1.0
        } else {
            let s = (0.5 * std::f64::consts::PI * t / self.ramp).sin();
            s * s
        }
    }

    fn source(&self, t: f64) -> Vec<f64> {
        let mut i = vec![0.0; self.circuit.n];
        let env = self.envelope(t);
        for inj in &self.injections {
            let mut value = inj.dc;
            if let Some(s) = inj.tone {
                value += s.amplitude * (std::f64::consts::TAU * s.frequency * t + s.phase).cos();
            }
            value *= env;
            if let Some(a) = inj.a {
                i[a] += value;
            }
            if let Some(b) = inj.b {
                i[b] -= value;
            }
        }
        i
    }

    /// Linear force `G·v + K·x` and acceleration term `C·a`.
    fn linear(&self, x: &[f64], v: &[f64], a: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.circuit.n];
        for &(r, c, cc, g, k) in &self.entries {
            f[r] += cc * a[c] + g * v[c] + k * x[c];
        }
        f
    }

    fn junction_currents(&self, x: &[f64], f: &mut [f64]) {
        for j in &self.circuit.junctions {
            let i = j.i_c * (across(x, j.a, j.b) / REDUCED_FLUX_QUANTUM).sin();
            if let Some(a) = j.a {
                f[a] += i;
            }
            if let Some(b) = j.b {
                f[b] -= i;
            }
        }
    }

    fn stored_energy(&self, s: &StepState) -> f64 {
        let mut e = 0.0;
        for &(r, c, cc, _, k) in &self.entries {
            e += 0.5 * (cc * s.v[r] * s.v[c] + k * s.x[r] * s.x[c]);
        }
        for j in &self.circuit.junctions {
            e += j.i_c * REDUCED_FLUX_QUANTUM * (1.0 - (across(&s.x, j.a, j.b) / REDUCED_FLUX_QUANTUM).cos());
        }
        e
    }

    fn power_terms(&self, s: &StepState, t: f64) -> (f64, f64) {
        let src = self.source(t);
        let input: f64 = src.iter().zip(&s.v).map(|(i, v)| i * v).sum();
        let mut heat = 0.0;
        for &(r, c, _, g, _) in &self.entries {
            heat += g * s.v[r] * s.v[c];
        }
        (input, heat)
    }

    /// One average-acceleration step of length `h` ending at `t`.
    fn step(&self, prev: &StepState, h: f64, t: f64) -> Option<StepState> {
        let n = self.circuit.n;
        let src = self.source(t);
        let (ca, cv) = (4.0 / (h * h), 2.0 / h);
        let mut x = prev.x.clone();
        let kinematics = |x: &[f64]| {
            let v: Vec<f64> = (0..n).map(|i| cv * (x[i] - prev.x[i]) - prev.v[i]).collect();
            let a: Vec<f64> = (0..n)
                .map(|i| ca * (x[i] - prev.x[i] - h * prev.v[i]) - prev.a[i])
                .collect();
            (v, a)
        };
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (v, a) = kinematics(&x);
            let mut f = self.linear(&x, &v, &a);
            self.junction_currents(&x, &mut f);
            for (fi, si) in f.iter_mut().zip(&src) {
                *fi = si - *fi;
            }
            let mut m = BandMatrix::<f64>::new(n, self.bandwidth, self.bandwidth);
            for &(r, c, cc, g, k) in &self.entries {
                m.add(r, c, ca * cc + cv * g + k);
            }
            for j in &self.circuit.junctions {
                let y = j.i_c / REDUCED_FLUX_QUANTUM * (across(&x, j.a, j.b) / REDUCED_FLUX_QUANTUM).cos();
                for (r, sr) in [(j.a, 1.0), (j.b, -1.0)] {
                    for (c, sc) in [(j.a, 1.0), (j.b, -1.0)] {
                        if let (Some(r), Some(c)) = (r, c) {
                            m.add(r, c, sr * sc * y);
                        }
                    }
                }
            }
            let lu = m.factor().ok()?;
            lu.solve_in_place(&mut f);
            let mut dmax = 0.0f64;
            let mut xmax = 0.0f64;
            for (xi, di) in x.iter_mut().zip(&f) {
                *xi += di;
                dmax = dmax.max(di.abs());
                xmax = xmax.max(xi.abs());
            }
            if !dmax.is_finite() {
                return None;
            }
            if dmax <= NEWTON_STEP_TOLERANCE * xmax.max(FLUX_QUANTUM * 1e-12) {
                let (v, a) = kinematics(&x);
                return Some(StepState { x, v, a });
            }
        }
        None
    }

    /// Advances from `t0` by `h`, splitting the step when Newton fails.
    fn advance(&self, s: &StepState, t0: f64, h: f64, depth: u32) -> Result<(StepState, f64, f64)> {
        if let Some(next) = self.step(s, h, t0 + h) {
            let (p0, q0) = self.power_terms(s, t0);
            let (p1, q1) = self.power_terms(&next, t0 + h);
            return Ok((next, 0.5 * h * (p0 + p1), 0.5 * h * (q0 + q1)));
        }
        if depth >= MAX_SUBDIVISIONS {
            return Err(Error::NoConvergence(format!(
                "transient step at t={t0:e} s rejected after {MAX_SUBDIVISIONS} subdivisions"
            )));
        }
        let (mid, w0, q0) = self.advance(s, t0, 0.5 * h, depth + 1)?;
        let (end, w1, q1) = self.advance(&mid, t0 + 0.5 * h, 0.5 * h, depth + 1)?;
        Ok((end, w0 + w1, q0 + q1))
    }
}

/// Integrates `netlist` from rest and records the fluxes of
/// `config.record_nodes` at every step.
pub fn transient(netlist: &Netlist, config: &TransientConfig) -> Result<Transient> {
    config.validate()?;
    let circuit = Circuit::compile(netlist)?;
    let cells = circuit.junctions.len().div_ceil(JUNCTIONS_PER_CELL);
    if cells > MAX_CELLS && !config.override_guard {
        return Err(Error::GuardExceeded { cells, limit: MAX_CELLS });
    }

    let resolve = |name: &str| -> Result<usize> {
        netlist
            .node(name)
            .map(|i| circuit.position[i])
            .ok_or_else(|| Error::InvalidParameter(format!("unknown node {name}")))
    };
    let recorded = config
        .record_nodes
        .iter()
        .map(|n| resolve(n))
        .collect::<Result<Vec<_>>>()?;
    let anchor_of = circuit.dc_anchor_of();
    let gauge_nodes: Vec<Option<usize>> = recorded.iter().map(|&v| anchor_of[v]).collect();

    let port = |number: u32, what: &str| {
        circuit
            .port(number)
            .ok_or_else(|| Error::InvalidParameter(format!("no port {number} for the {what}")))
    };
    let mut injections = Vec::new();
    for s in &config.sources {
        let p = port(s.port, "source")?;
        injections.push(Injection {
            a: p.a,
            b: p.b,
            tone: Some(*s),
            dc: 0.0,
        });
    }
    if config.dc_flux_current != 0.0 {
        let p = port(config.flux_port, "flux bias")?;
        injections.push(Injection {
            a: p.a,
            b: p.b,
            tone: None,
            dc: config.dc_flux_current,
        });
    }

    let range = config.frequency_range();
    let f_loss = config.loss_reference_hz.or(range.map(|r| r.0)).unwrap_or(0.0);
    let w_loss = std::f64::consts::TAU * f_loss;
    let entries = circuit
        .stamps
        .iter()
        .map(|s| (s.row, s.col, s.c, s.g + w_loss * s.c_loss, s.k))
        .collect();
    let integ = Integrator {
        circuit: &circuit,
        injections,
        ramp: range.map_or(0.0, |r| config.ramp_periods / r.0),
        entries,
        bandwidth: circuit.node_bandwidth,
    };

    let steps = (config.t_stop / config.dt).round() as usize;
    let n = circuit.n;
    let mut state = StepState {
        x: vec![0.0; n],
        v: vec![0.0; n],
        a: vec![0.0; n],
    };
    let mut flux: Vec<Vec<f64>> = recorded.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    let mut gauge: Vec<Option<Vec<f64>>> = gauge_nodes
        .iter()
        .map(|g| g.map(|_| Vec::with_capacity(steps + 1)))
        .collect();
    let record = |s: &StepState, flux: &mut Vec<Vec<f64>>, gauge: &mut Vec<Option<Vec<f64>>>| {
        for (series, &v) in flux.iter_mut().zip(&recorded) {
            series.push(s.x[v]);
        }
        for (series, g) in gauge.iter_mut().zip(&gauge_nodes) {
            if let (Some(series), Some(g)) = (series.as_mut(), g) {
                series.push(s.x[*g]);
            }
        }
    };
    record(&state, &mut flux, &mut gauge);
    let (mut work, mut heat) = (0.0, 0.0);
    for k in 0..steps {
        let t0 = k as f64 * config.dt;
        let (next, w, q) = integ.advance(&state, t0, config.dt, 0)?;
        work += w;
        heat += q;
        state = next;
        record(&state, &mut flux, &mut gauge);
    }

    Ok(Transient {
        dt: config.dt,
        nodes: config.record_nodes.clone(),
        flux,
        energy: EnergyBalance {
            source: work,
            stored: integ.stored_energy(&state),
            dissipated: heat,
        },
        gauge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hb::linear_ac;
    use crate::netlist::{build_twpa, nodes, parse_netlist, TwpaDesign};

    #[test]
    fn zero_sources_stay_at_rest() {
        let n = build_twpa(&TwpaDesign::table1().with_cells(2)).unwrap();
        let mut cfg = TransientConfig::new(1e-9, 1e-12);
        cfg.record_nodes = vec![nodes::chain(0), nodes::chain(2), nodes::flux(1)];
        let r = transient(&n, &cfg).unwrap();
        assert!(r.flux.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(r.flux[0].len(), 1001);
    }

    #[test]
    fn spectrum_recovers_tones() {
        let (f, dt) = (1e9, 1e-11);
        let x: Vec<f64> = (0..4000)
            .map(|k| {
                let t = k as f64 * dt;
                0.3 + 2.0 * (std::f64::consts::TAU * f * t).sin() + 0.5 * (3.0 * std::f64::consts::TAU * f * t + 0.2).cos()
            })
            .collect();
        let s = spectrum(&x, dt, f, 4).unwrap();
        assert!((s[0].re - 0.3).abs() < 1e-10);
        assert!((s[1] - Complex64::new(0.0, -2.0)).norm() < 1e-10);
        assert!(s[2].norm() < 1e-10);
        assert!((s[3] - Complex64::from_polar(0.5, 0.2)).norm() < 1e-10);
        assert!(s[4].norm() < 1e-10);
    }

    #[test]
    fn spectrum_rejects_short_or_misaligned_input() {
        assert!(matches!(spectrum(&[0.0; 150], 1e-11, 1e9, 2), Err(Error::InsufficientLength(_))));
        assert!(spectrum(&[0.0; 1000], 1e-11, 0.97e9, 2).is_err());
    }

    #[test]
    fn config_invariants() {
        let mut c = TransientConfig::new(200e-9, 1e-11);
        c.sources.push(ToneSource::new(1, 1e-6, 1e9));
        assert!(c.validate().is_ok());
        c.dt = 3e-11;
        assert!(c.validate().is_err());
        c.dt = 1e-11;
        c.t_stop = 100e-9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn guard_blocks_large_devices() {
        let n = build_twpa(&TwpaDesign::table1().with_cells(21)).unwrap();
        let cfg = TransientConfig::new(1e-10, 1e-12);
        assert!(matches!(transient(&n, &cfg), Err(Error::GuardExceeded { cells: 21, limit: 20 })));
    }

    fn driven_rlc(dt: f64) -> (Netlist, TransientConfig) {
        let n = parse_netlist("P1 1 0 R=50 port=1\nL1 1 2 3n\nC1 2 0 1p\nP2 2 0 R=50 port=2\n").unwrap();
        let f = 2e9;
        let mut cfg = TransientConfig::new(200.0 / f, dt);
        cfg.sources.push(ToneSource::new(1, 1e-3, f));
        cfg.record_nodes = vec!["2".into()];
        (n, cfg)
    }

    #[test]
    fn rlc_matches_linear_ac() {
        let (n, cfg) = driven_rlc(1.0 / (2e9 * 400.0));
        let r = transient(&n, &cfg).unwrap();
        let x = r.spectrum("2", 2e9, 1).unwrap()[1];
        let v = Complex64::new(0.0, std::f64::consts::TAU * 2e9) * x;
        // Norton source I with R1: incident wave a1 = I·sqrt(R)/2, so V2 = S21·I·R/2
        let s21 = linear_ac(&n, &[2e9]).unwrap().get(0, 2, 1).unwrap();
        let expect = s21 * 1e-3 * 50.0 / 2.0;
        assert!((v - expect).norm() < 1e-3 * expect.norm(), "{v} vs {expect}");
    }

    #[test]
    fn lossless_energy_balance() {
        let n = build_twpa(&TwpaDesign::table1().with_cells(2).lossless()).unwrap();
        let f = 4e9;
        let mut cfg = TransientConfig::new(MIN_PERIODS / f, 1.0 / (f * 100.0));
        cfg.sources.push(ToneSource::new(1, 1.0e-6, f));
        let r = transient(&n, &cfg).unwrap();
        assert!(r.energy.relative_error() < 5e-3, "{:?}", r.energy);
    }
}
