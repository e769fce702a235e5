use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Drive, HBSolution, HarmonicGrid, SolverConfig};
use crate::circuit::{Circuit, Node};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::netlist::Netlist;
use crate::FLUX_QUANTUM;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MIN_HOMOTOPY_STEP: f64 = 1.0 / 1024.0;

/// Active harmonics of one Newton solve. Per node the real unknowns are
/// `[DC, Re X_h1, Im X_h1, Re X_h2, ...]`.
struct Layout {
    harmonics: Vec<usize>,
    block: usize,
}

impl Layout {
    fn new(harmonics: Vec<usize>) -> Self {
        let block = 1 + 2 * harmonics.len();
        Self { harmonics, block }
    }

    fn pack(&self, state: &State, k1: usize, n: usize) -> Packed {
        let one = |full: &[Complex64]| {
            let mut x = vec![0.0; n * self.block];
            for p in 0..n {
                x[p * self.block] = full[p * k1].re;
                for (q, &h) in self.harmonics.iter().enumerate() {
                    let z = full[p * k1 + h];
                    x[p * self.block + 1 + 2 * q] = z.re;
                    x[p * self.block + 2 + 2 * q] = z.im;
                }
            }
            x
        };
        Packed {
            hi: one(&state.hi),
            lo: one(&state.lo),
        }
    }

    fn unpack(&self, x: &Packed, k1: usize, n: usize) -> State {
        let one = |x: &[f64]| {
            let mut full = vec![ZERO; n * k1];
            for p in 0..n {
                full[p * k1] = Complex64::new(x[p * self.block], 0.0);
                for (q, &h) in self.harmonics.iter().enumerate() {
                    full[p * k1 + h] = Complex64::new(x[p * self.block + 1 + 2 * q], x[p * self.block + 2 + 2 * q]);
                }
            }
            full
        };
        State {
            hi: one(&x.hi),
            lo: one(&x.lo),
        }
    }
}

/// Real unknowns stored as unevaluated sums `hi + lo`, so that flux
/// differences across stiff inductors keep full relative precision.
#[derive(Debug, Clone)]
struct Packed {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl Packed {
    /// `self − alpha·d` in compensated arithmetic.
    fn step(&self, alpha: f64, d: &[f64]) -> Packed {
        let mut out = self.clone();
        for ((h, l), di) in out.hi.iter_mut().zip(out.lo.iter_mut()).zip(d) {
            let (s, e) = two_sum(*h, -alpha * di);
            let (s2, e2) = two_sum(s, *l + e);
            *h = s2;
            *l = e2;
        }
        out
    }
}

/// Full-harmonic state `hi + lo`, `n·(K+1)` phasors by node position.
#[derive(Debug, Clone)]
struct State {
    hi: Vec<Complex64>,
    lo: Vec<Complex64>,
}

impl State {
    fn zeros(len: usize) -> Self {
        Self {
            hi: vec![ZERO; len],
            lo: vec![ZERO; len],
        }
    }

    fn value(&self, i: usize) -> Complex64 {
        self.hi[i] + self.lo[i]
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

struct View<'a> {
    x: &'a Packed,
    block: usize,
}

impl View<'_> {
    /// Entry `k` of `X_a − X_b`.
    #[inline]
    fn diff(&self, a: Node, b: Node, k: usize) -> f64 {
        let bl = self.block;
        let (hi, lo) = (&self.x.hi, &self.x.lo);
        match (a, b) {
            (Some(a), Some(b)) => (hi[a * bl + k] - hi[b * bl + k]) + (lo[a * bl + k] - lo[b * bl + k]),
            (Some(a), None) => hi[a * bl + k] + lo[a * bl + k],
            (None, Some(b)) => -(hi[b * bl + k] + lo[b * bl + k]),
            (None, None) => 0.0,
        }
    }

    #[inline]
    fn dc(&self, a: Node, b: Node) -> f64 {
        self.diff(a, b, 0)
    }

    #[inline]
    fn ac(&self, a: Node, b: Node, q: usize) -> Complex64 {
        Complex64::new(self.diff(a, b, 1 + 2 * q), self.diff(a, b, 2 + 2 * q))
    }
}

/// Adds a complex branch current phasor `i` leaving `a` and entering `b`.
#[inline]
fn inject(f: &mut [f64], block: usize, q: usize, a: Node, b: Node, i: Complex64) {
    if let Some(a) = a {
        f[a * block + 1 + 2 * q] += i.re;
        f[a * block + 2 + 2 * q] += i.im;
    }
    if let Some(b) = b {
        f[b * block + 1 + 2 * q] -= i.re;
        f[b * block + 2 + 2 * q] -= i.im;
    }
}

#[inline]
fn inject_dc(f: &mut [f64], block: usize, a: Node, b: Node, i: f64) {
    if let Some(a) = a {
        f[a * block] += i;
    }
    if let Some(b) = b {
        f[b * block] -= i;
    }
}

/// Harmonic-balance solver bound to one circuit and harmonic grid.
pub struct PumpSolver {
    circuit: Circuit,
    netlist_nodes: usize,
    grid: HarmonicGrid,
    config: SolverConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

struct NewtonOutcome {
    iterations: usize,
    residual: f64,
}

impl PumpSolver {
    pub fn new(netlist: &Netlist, grid: HarmonicGrid, config: SolverConfig) -> Result<Self> {
        grid.validate()?;
        let circuit = Circuit::compile(netlist)?;
        let mut planner = FftPlanner::new();
        let m = grid.time_samples();
        Ok(Self {
            netlist_nodes: netlist.node_count(),
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            circuit,
            grid,
            config,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn grid(&self) -> &HarmonicGrid {
        &self.grid
    }

    fn k1(&self) -> usize {
        self.grid.n_harmonics + 1
    }

    /// Steady state reached by continuation from the unpumped, unbiased
    /// circuit.
    pub fn solve(&self, drive: &Drive) -> Result<HBSolution> {
        self.solve_from(None, drive)
    }

    /// Steady state reached by continuation from `start` (or from rest).
    pub fn solve_from(&self, start: Option<&HBSolution>, drive: &Drive) -> Result<HBSolution> {
        drive.validate()?;
        let (x0, d0) = match start {
            Some(s) => (self.state_of(s)?, s.drive),
            None => (State::zeros(self.circuit.n * self.k1()), Drive { pump_amplitude: 0.0, dc_flux_current: 0.0, ..*drive }),
        };
        if d0.pump_port != drive.pump_port || d0.flux_port != drive.flux_port {
            return Err(Error::InvalidParameter("warm start uses different source ports".into()));
        }
        self.continuation(x0, d0, drive)
    }

    fn state_of(&self, s: &HBSolution) -> Result<State> {
        if s.grid.n_harmonics != self.grid.n_harmonics || s.node_amplitudes.len() != self.netlist_nodes {
            return Err(Error::InvalidParameter("warm start from an incompatible solution".into()));
        }
        let k1 = self.k1();
        let mut x = State::zeros(self.circuit.n * k1);
        for (i, amps) in s.node_amplitudes.iter().enumerate() {
            let p = self.circuit.position[i];
            x.hi[p * k1..(p + 1) * k1].copy_from_slice(amps);
        }
        Ok(x)
    }

    fn continuation(&self, mut x: State, from: Drive, to: &Drive) -> Result<HBSolution> {
        let mut t: f64 = 0.0;
        let mut step: f64 = 1.0;
        let mut previous: Option<(f64, State)> = None;
        let mut attempts = 0;
        let mut accepted = 0;
        let mut iterations = 0;
        let mut last_error = None;
        let mut result = None;
        if from == *to {
            // still verify the start
            let (state, half, out) = self.solve_at(&x, &from)?;
            return Ok(self.solution(state, *to, out, 0, half));
        }
        while t < 1.0 {
            if attempts >= self.config.max_homotopy_steps {
                break;
            }
            attempts += 1;
            let s = (t + step).min(1.0);
            let guess = match &previous {
                Some((tp, xp)) if t > *tp => {
                    let w = (s - t) / (t - tp);
                    State {
                        hi: (0..x.hi.len()).map(|i| x.value(i) + (x.value(i) - xp.value(i)) * w).collect(),
                        lo: vec![ZERO; x.lo.len()],
                    }
                }
                _ => x.clone(),
            };
            let drive = from.lerp(to, s);
            match self.solve_at(&guess, &drive) {
                Ok((state, half, out)) => {
                    iterations += out.iterations;
                    accepted += 1;
                    previous = Some((t, std::mem::replace(&mut x, state)));
                    t = s;
                    step = (step * 2.0).min(1.0);
                    if t >= 1.0 {
                        result = Some((half, out));
                    }
                }
                Err(e) => {
                    last_error = Some(e);
                    step *= 0.5;
                    if step < MIN_HOMOTOPY_STEP {
                        break;
                    }
                }
            }
        }
        match result {
            Some((half, out)) => Ok(self.solution(
                x,
                *to,
                NewtonOutcome {
                    iterations,
                    residual: out.residual,
                },
                accepted,
                half,
            )),
            None => Err(last_error.unwrap_or_else(|| Error::NoConvergence("continuation made no progress".into()))),
        }
    }

    fn solution(&self, x: State, drive: Drive, out: NewtonOutcome, steps: usize, half: bool) -> HBSolution {
        let k1 = self.k1();
        let node_amplitudes = (0..self.netlist_nodes)
            .map(|i| {
                let p = self.circuit.position[i];
                (p * k1..(p + 1) * k1).map(|i| x.value(i)).collect()
            })
            .collect();
        HBSolution {
            grid: self.grid,
            drive,
            node_amplitudes,
            residual_norm: out.residual,
            newton_iterations: out.iterations,
            homotopy_steps: steps,
            half_wave: half,
        }
    }

    fn full_layout(&self) -> Layout {
        Layout::new((1..=self.grid.n_harmonics).collect())
    }

    /// Newton solve at one drive, first within the odd-harmonic subspace
    /// when the start carries no even harmonics.
    fn solve_at(&self, start: &State, drive: &Drive) -> Result<(State, bool, NewtonOutcome)> {
        let n = self.circuit.n;
        let k1 = self.k1();
        let full = self.full_layout();
        if self.config.half_wave && self.grid.n_harmonics > 1 && self.even_content(start) == 0.0 {
            let odd = Layout::new((1..=self.grid.n_harmonics).step_by(2).collect());
            let mut x = odd.pack(start, k1, n);
            let src = self.sources(&odd, drive)?;
            if let Ok(out) = self.newton(&odd, &mut x, &src) {
                let state = odd.unpack(&x, k1, n);
                let xf = full.pack(&state, k1, n);
                let src_full = self.sources(&full, drive)?;
                let r = self.relative_residual(&full, &xf, &src_full);
                if r <= self.config.tolerance {
                    return Ok((state, true, NewtonOutcome { iterations: out.iterations, residual: r }));
                }
            }
        }
        let mut x = full.pack(start, k1, n);
        let src = self.sources(&full, drive)?;
        let out = self.newton(&full, &mut x, &src)?;
        Ok((full.unpack(&x, k1, n), false, out))
    }

    fn even_content(&self, x: &State) -> f64 {
        let k1 = self.k1();
        x.hi.iter()
            .enumerate()
            .filter(|(i, _)| {
                let h = i % k1;
                h > 0 && h % 2 == 0
            })
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    fn sources(&self, layout: &Layout, drive: &Drive) -> Result<Vec<f64>> {
        let mut src = vec![0.0; self.circuit.n * layout.block];
        if drive.pump_amplitude != 0.0 {
            let port = self
                .circuit
                .port(drive.pump_port)
                .ok_or_else(|| Error::InvalidParameter(format!("no port {} for the pump", drive.pump_port)))?;
            inject(&mut src, layout.block, 0, port.a, port.b, Complex64::new(drive.pump_amplitude, 0.0));
        }
        if drive.dc_flux_current != 0.0 {
            let port = self
                .circuit
                .port(drive.flux_port)
                .ok_or_else(|| Error::InvalidParameter(format!("no port {} for the flux bias", drive.flux_port)))?;
            inject_dc(&mut src, layout.block, port.a, port.b, drive.dc_flux_current);
        }
        Ok(src)
    }

    fn relative_residual(&self, layout: &Layout, x: &Packed, src: &[f64]) -> f64 {
        let f = self.evaluate(layout, x, src, None);
        norm(&f) / source_scale(src)
    }

    fn newton(&self, layout: &Layout, x: &mut Packed, src: &[f64]) -> Result<NewtonOutcome> {
        let scale = source_scale(src);
        let bw = self.circuit.scalar_bandwidth(layout.block);
        let dim = self.circuit.n * layout.block;
        let mut history = Vec::new();
        let mut jac = BandMatrix::<f64>::new(dim, bw, bw);
        let mut f = self.evaluate(layout, x, src, Some(&mut jac));
        let mut fnorm = norm(&f);
        for it in 0..=self.config.max_iterations {
            history.push(fnorm / scale);
            if fnorm / scale <= self.config.tolerance {
                return Ok(NewtonOutcome {
                    iterations: it,
                    residual: fnorm / scale,
                });
            }
            if it == self.config.max_iterations || !fnorm.is_finite() {
                break;
            }
            let lu = std::mem::replace(&mut jac, BandMatrix::new(0, 0, 0)).factor()?;
            let mut dx = f.clone();
            lu.solve_in_place(&mut dx);
            jac = lu.into_matrix();
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..12 {
                let trial = x.step(alpha, &dx);
                let ft = self.evaluate(layout, &trial, src, None);
                let nt = norm(&ft);
                if nt.is_finite() && nt < fnorm * (1.0 - 1e-4 * alpha) {
                    accepted = Some(trial);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(trial) = accepted else { break };
            *x = trial;
            f = self.evaluate(layout, x, src, Some(&mut jac));
            fnorm = norm(&f);
        }
        Err(Error::HbNoConvergence {
            iterations: history.len() - 1,
            history,
        })
    }

    /// KCL residual `Σ element currents − sources`, and optionally its
    /// Jacobian, at the packed state `x`.
    fn evaluate(&self, layout: &Layout, x: &Packed, src: &[f64], mut jac: Option<&mut BandMatrix<f64>>) -> Vec<f64> {
        let c = &self.circuit;
        let b = layout.block;
        let omega = self.grid.omega();
        let mut f: Vec<f64> = src.iter().map(|s| -s).collect();
        let v = View { x, block: b };

        for cap in &c.capacitors {
            for (q, &h) in layout.harmonics.iter().enumerate() {
                let w = omega * h as f64;
                let y = Complex64::new(-w * w * cap.c, w * w * cap.c * cap.tan_delta);
                let dx = v.ac(cap.a, cap.b, q);
                inject(&mut f, b, q, cap.a, cap.b, y * dx);
            }
        }
        for port in &c.ports {
            for (q, &h) in layout.harmonics.iter().enumerate() {
                let y = Complex64::new(0.0, omega * h as f64 / port.r);
                let dx = v.ac(port.a, port.b, q);
                inject(&mut f, b, q, port.a, port.b, y * dx);
            }
        }
        let mut branch_dc = Vec::new();
        let mut branch_ac = Vec::new();
        for group in &c.inductors {
            branch_dc.clear();
            branch_dc.extend(group.branches.iter().map(|&(a, bn)| v.dc(a, bn)));
            for (r, &(a, bn)) in group.branches.iter().enumerate() {
                let i: f64 = group.inverse[r].iter().zip(&branch_dc).map(|(g, d)| g * d).sum();
                inject_dc(&mut f, b, a, bn, i);
            }
            for q in 0..layout.harmonics.len() {
                branch_ac.clear();
                branch_ac.extend(
                    group
                        .branches
                        .iter()
                        .map(|&(a, bn)| v.ac(a, bn, q)),
                );
                for (r, &(a, bn)) in group.branches.iter().enumerate() {
                    let i: Complex64 = group.inverse[r].iter().zip(&branch_ac).map(|(g, d)| d * *g).sum();
                    inject(&mut f, b, q, a, bn, i);
                }
            }
        }
        for &(p, g) in &c.dc_anchors {
            f[p * b] += g * v.dc(Some(p), None);
        }

        if let Some(jac) = jac.as_deref_mut() {
            for st in &c.stamps {
                let (r0, c0) = (st.row * b, st.col * b);
                jac.add(r0, c0, st.k);
                for (q, &h) in layout.harmonics.iter().enumerate() {
                    let y = st.at(omega * h as f64);
                    let (r, cc) = (r0 + 1 + 2 * q, c0 + 1 + 2 * q);
                    jac.add(r, cc, y.re);
                    jac.add(r, cc + 1, -y.im);
                    jac.add(r + 1, cc, y.im);
                    jac.add(r + 1, cc + 1, y.re);
                }
            }
            for &(p, g) in &c.dc_anchors {
                jac.add(p * b, p * b, g);
            }
        }

        self.junctions(layout, &v, &mut f, jac);
        f
    }

    /// Junction currents by the alternating frequency/time method.
    fn junctions(&self, layout: &Layout, v: &View, f: &mut [f64], mut jac: Option<&mut BandMatrix<f64>>) {
        let m = self.grid.time_samples();
        let inv_m = 1.0 / m as f64;
        let two_pi_phi0 = std::f64::consts::TAU / FLUX_QUANTUM;
        let b = layout.block;
        let mut phi = vec![ZERO; m];
        let mut cur = vec![ZERO; m];
        let mut cond = vec![ZERO; m];
        let mut scratch = vec![ZERO; self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())];
        let mut block = vec![0.0; b * b];
        for j in &self.circuit.junctions {
            phi.iter_mut().for_each(|v| *v = ZERO);
            phi[0] = Complex64::new(v.dc(j.a, j.b), 0.0);
            for (q, &h) in layout.harmonics.iter().enumerate() {
                let z = v.ac(j.a, j.b, q) * 0.5;
                phi[h] += z;
                phi[m - h] += z.conj();
            }
            self.inverse.process_with_scratch(&mut phi, &mut scratch);
            for t in 0..m {
                let arg = two_pi_phi0 * phi[t].re;
                let (s, co) = arg.sin_cos();
                cur[t] = Complex64::new(j.i_c * s, 0.0);
                cond[t] = Complex64::new(j.i_c * two_pi_phi0 * co, 0.0);
            }
            self.forward.process_with_scratch(&mut cur, &mut scratch);
            inject_dc(f, b, j.a, j.b, cur[0].re * inv_m);
            for (q, &h) in layout.harmonics.iter().enumerate() {
                inject(f, b, q, j.a, j.b, cur[h] * (2.0 * inv_m));
            }
            let Some(jac) = jac.as_deref_mut() else { continue };
            self.forward.process_with_scratch(&mut cond, &mut scratch);
            let g = |k: isize| cond[k.rem_euclid(m as isize) as usize] * inv_m;
            junction_block(layout, &g, &mut block);
            for (r, sr) in [(j.a, 1.0), (j.b, -1.0)] {
                for (cn, sc) in [(j.a, 1.0), (j.b, -1.0)] {
                    if let (Some(r), Some(cn)) = (r, cn) {
                        let s = sr * sc;
                        for i in 0..b {
                            for k in 0..b {
                                let v = block[i * b + k];
                                if v != 0.0 {
                                    jac.add(r * b + i, cn * b + k, s * v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Real Jacobian block of one nonlinear branch from the two-sided spectrum
/// `g(k)` of its small-signal conductance.
fn junction_block(layout: &Layout, g: &dyn Fn(isize) -> Complex64, block: &mut [f64]) {
    let b = layout.block;
    let hs = &layout.harmonics;
    block[0] = g(0).re;
    for (qm, &m) in hs.iter().enumerate() {
        let gm = g(-(m as isize));
        block[1 + 2 * qm] = gm.re;
        block[2 + 2 * qm] = -gm.im;
    }
    for (qk, &k) in hs.iter().enumerate() {
        let (rr, ri) = (1 + 2 * qk, 2 + 2 * qk);
        let gk = g(k as isize);
        block[rr * b] = 2.0 * gk.re;
        block[ri * b] = 2.0 * gk.im;
        for (qm, &m) in hs.iter().enumerate() {
            let a = g(k as isize - m as isize);
            let bb = g(k as isize + m as isize);
            let (cu, cv) = (1 + 2 * qm, 2 + 2 * qm);
            block[rr * b + cu] = (a + bb).re;
            block[rr * b + cv] = -(a - bb).im;
            block[ri * b + cu] = (a + bb).im;
            block[ri * b + cv] = (a - bb).re;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn source_scale(src: &[f64]) -> f64 {
    let s = norm(src);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Pump steady state of `netlist` under `drive`, reached by continuation
/// from rest.
pub fn solve_pump(netlist: &Netlist, grid: HarmonicGrid, drive: &Drive, config: SolverConfig) -> Result<HBSolution> {
    PumpSolver::new(netlist, grid, config)?.solve(drive)
}

/// Pump steady state reached by continuation from a previous solution.
pub fn solve_pump_from(
    netlist: &Netlist,
    start: &HBSolution,
    drive: &Drive,
    config: SolverConfig,
) -> Result<HBSolution> {
    PumpSolver::new(netlist, start.grid, config)?.solve_from(Some(start), drive)
}

/// Solves a sequence of drives, each warm-started from the last converged
/// one. A failed drive leaves the warm start unchanged.
pub fn homotopy_sweep(
    netlist: &Netlist,
    grid: HarmonicGrid,
    drives: &[Drive],
    config: SolverConfig,
) -> Result<Vec<Result<HBSolution>>> {
    let solver = PumpSolver::new(netlist, grid, config)?;
    let mut last: Option<HBSolution> = None;
    let mut out = Vec::with_capacity(drives.len());
    for d in drives {
        let r = solver.solve_from(last.as_ref(), d);
        if let Ok(s) = &r {
            last = Some(s.clone());
        }
        out.push(r);
    }
    Ok(out)
}
