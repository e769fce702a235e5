//! Small-signal response of a pumped circuit (conversion-matrix method).
//!
//! The pump steady state makes every junction a time-varying inductor with
//! conductance `g(t) = I_c·(2π/Φ₀)·cos(2π·ΔΦ_p(t)/Φ₀)`. A weak signal at
//! `f_s` then couples the sidebands `f_s + k·f_p`, `|k| <= n_modulation`,
//! through the harmonics `G_{k-l}` of `g(t)`. Solving the coupled linear
//! system gives scattering parameters between every (port, sideband) pair.
//!
//! Scattering parameters are photon-normalized:
//! `S_{ik,jl} = (2jω_k·Φ_ik/(I·√(R_i R_j)) − δ)·√(|ω_l|/|ω_k|)`, so a
//! lossless circuit satisfies `Σ_{j,l} sign(ω_l)·|S_{ik,jl}|² = sign(ω_k)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::hb::{assemble_sidebands, Drive, HBSolution, HarmonicGrid, JunctionSpectra, PumpSolver, Reduction, SolverConfig};
use crate::netlist::Netlist;
use crate::FLUX_QUANTUM;

/// Signals closer than this to a multiple of `f_p/2` are moved up by the
/// same amount so that no two sidebands coincide.
pub const COLLISION_GUARD_HZ: f64 = 1e3;

/// Relative size below which odd conductance harmonics count as absent.
const ODD_HARMONIC_FLOOR: f64 = 1e-12;

/// Linearization of a circuit about one pump steady state.
pub struct SmallSignal {
    circuit: Circuit,
    reduction: Reduction,
    grid: HarmonicGrid,
    spectra: JunctionSpectra,
    labels: Vec<isize>,
}

/// Scattering parameters between all (port, sideband) pairs at one signal
/// frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionMatrix {
    /// Signal frequency actually used (Hz), after the collision guard.
    pub f_signal: f64,
    /// Sideband labels `k` of `f_s + k·f_p`.
    pub sidebands: Vec<isize>,
    /// Signed sideband frequencies (Hz).
    pub frequencies: Vec<f64>,
    pub ports: Vec<u32>,
    /// `s[i·S + k][j·S + l]` for port indices `i, j` and sideband slots
    /// `k, l`.
    pub s: Vec<Vec<Complex64>>,
}

impl ConversionMatrix {
    fn index(&self, port: u32, sideband: isize) -> Option<usize> {
        let i = self.ports.iter().position(|&p| p == port)?;
        let k = self.sidebands.iter().position(|&s| s == sideband)?;
        Some(i * self.sidebands.len() + k)
    }

    /// Wave out of (`out_port`, `out_sideband`) per wave into
    /// (`in_port`, `in_sideband`).
    pub fn get(&self, out_port: u32, out_sideband: isize, in_port: u32, in_sideband: isize) -> Option<Complex64> {
        Some(self.s[self.index(out_port, out_sideband)?][self.index(in_port, in_sideband)?])
    }

    /// `Σ_{j,l} sign(ω_l)·|S_{row,jl}|²` for output (`port`, `sideband`).
    pub fn signed_row_power(&self, port: u32, sideband: isize) -> Option<f64> {
        let r = self.index(port, sideband)?;
        Some(self.signed_sum(|c| self.s[r][c]))
    }

    /// `Σ_{i,k} sign(ω_k)·|S_{ik,col}|²` for input (`port`, `sideband`).
    pub fn signed_column_power(&self, port: u32, sideband: isize) -> Option<f64> {
        let c = self.index(port, sideband)?;
        Some(self.signed_sum(|r| self.s[r][c]))
    }

    fn signed_sum(&self, entry: impl Fn(usize) -> Complex64) -> f64 {
        let s_count = self.sidebands.len();
        (0..self.s.len())
            .map(|i| self.frequencies[i % s_count].signum() * entry(i).norm_sqr())
            .sum()
    }
}

/// Moves `f` off the degenerate points `m·f_p/2`.
pub fn guard_signal_frequency(f: f64, f_pump: f64) -> f64 {
    let half = 0.5 * f_pump;
    let m = (f / half).round();
    if (f - m * half).abs() < COLLISION_GUARD_HZ {
        m * half + COLLISION_GUARD_HZ
    } else {
        f
    }
}

impl SmallSignal {
    /// Linearizes `netlist` about `pump`.
    pub fn new(netlist: &Netlist, pump: &HBSolution) -> Result<Self> {
        let circuit = Circuit::compile(netlist)?;
        if pump.node_amplitudes.len() != netlist.node_count() {
            return Err(Error::InvalidParameter("pump solution belongs to a different netlist".into()));
        }
        Self::from_compiled(circuit, pump)
    }

    fn from_compiled(circuit: Circuit, pump: &HBSolution) -> Result<Self> {
        let grid = pump.grid;
        grid.validate()?;
        let max_offset = 2 * grid.n_modulation;
        let m = (4 * (grid.n_harmonics + max_offset)).next_power_of_two().max(grid.time_samples());
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(m);
        let forward = planner.plan_fft_forward(m);
        let two_pi_phi0 = std::f64::consts::TAU / FLUX_QUANTUM;
        let mut by_position = vec![0usize; circuit.n];
        for (i, &p) in circuit.position.iter().enumerate() {
            by_position[p] = i;
        }
        let amps = |node: Option<usize>, h: usize| -> Complex64 {
            node.map(|p| pump.node_amplitudes[by_position[p]][h]).unwrap_or_default()
        };
        let mut g = Vec::with_capacity(circuit.junctions.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut odd = 0.0f64;
        let mut scale = 0.0f64;
        for j in &circuit.junctions {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            buf[0] = Complex64::new((amps(j.a, 0) - amps(j.b, 0)).re, 0.0);
            for h in 1..=grid.n_harmonics {
                let z = (amps(j.a, h) - amps(j.b, h)) * 0.5;
                buf[h] += z;
                buf[m - h] += z.conj();
            }
            inverse.process(&mut buf);
            for v in buf.iter_mut() {
                *v = Complex64::new(j.i_c * two_pi_phi0 * (two_pi_phi0 * v.re).cos(), 0.0);
            }
            forward.process(&mut buf);
            let spectrum: Vec<Complex64> = (-(max_offset as isize)..=max_offset as isize)
                .map(|k| buf[k.rem_euclid(m as isize) as usize] / m as f64)
                .collect();
            scale = scale.max(spectrum[max_offset].norm());
            for (k, v) in spectrum.iter().enumerate() {
                if (k as isize - max_offset as isize) % 2 != 0 {
                    odd = odd.max(v.norm());
                }
            }
            g.push(spectrum);
        }
        let n_mod = grid.n_modulation as isize;
        let labels: Vec<isize> = if odd <= ODD_HARMONIC_FLOOR * scale {
            // only even sidebands couple to the signal
            (-n_mod..=n_mod).filter(|k| k % 2 == 0).collect()
        } else {
            (-n_mod..=n_mod).collect()
        };
        Ok(Self {
            reduction: Reduction::new(&circuit),
            circuit,
            grid,
            spectra: JunctionSpectra { max_offset, g },
            labels,
        })
    }

    /// Sideband labels that couple to the signal.
    pub fn sidebands(&self) -> &[isize] {
        &self.labels
    }

    /// Conversion matrix at signal frequency `f_signal` (Hz).
    pub fn at(&self, f_signal: f64) -> Result<ConversionMatrix> {
        if !(f_signal.is_finite() && f_signal > 0.0) {
            return Err(Error::InvalidParameter(format!("signal frequency must be > 0, got {f_signal}")));
        }
        let f_s = guard_signal_frequency(f_signal, self.grid.f_pump);
        let frequencies: Vec<f64> = self.labels.iter().map(|&k| f_s + k as f64 * self.grid.f_pump).collect();
        let omegas: Vec<f64> = frequencies.iter().map(|f| std::f64::consts::TAU * f).collect();
        let lu = assemble_sidebands(&self.circuit, &self.reduction, &omegas, &self.labels, &self.spectra)?;
        let s_count = self.labels.len();
        let ports = &self.circuit.ports;
        let dim = ports.len() * s_count;
        let mut s = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        for (j, pj) in ports.iter().enumerate() {
            for l in 0..s_count {
                let x = lu.unit_port_response(pj, l);
                for (i, pi) in ports.iter().enumerate() {
                    for k in 0..s_count {
                        let v = Complex64::new(0.0, omegas[k]) * lu.port_flux(&x, pi, k);
                        let mut sv = 2.0 * v / (pi.r * pj.r).sqrt();
                        if i == j && k == l {
                            sv -= 1.0;
                        }
                        s[i * s_count + k][j * s_count + l] = sv * (omegas[l].abs() / omegas[k].abs()).sqrt();
                    }
                }
            }
        }
        Ok(ConversionMatrix {
            f_signal: f_s,
            sidebands: self.labels.clone(),
            frequencies,
            ports: ports.iter().map(|p| p.number).collect(),
            s,
        })
    }

    /// Forward transmission `S21` at the signal sideband.
    fn transmission(&self, f_signal: f64) -> Result<(f64, Complex64, Complex64)> {
        let cm = self.at(f_signal)?;
        let s21 = cm.get(2, 0, 1, 0).ok_or_else(|| Error::InvalidParameter("circuit needs ports 1 and 2".into()))?;
        let idler = cm.get(2, -2, 1, 0).unwrap_or_default();
        Ok((cm.f_signal, s21, idler))
    }
}

/// Signal frequencies to analyse about one pump state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionProblem {
    pub base: HBSolution,
    pub signal_frequencies: Vec<f64>,
    /// Largest `|k|` of the sidebands `f_s + k·f_p`.
    pub sideband_count: usize,
}

impl ConversionProblem {
    pub fn new(base: HBSolution, signal_frequencies: Vec<f64>) -> Self {
        let sideband_count = base.grid.n_modulation;
        Self {
            base,
            signal_frequencies,
            sideband_count,
        }
    }

    /// One conversion matrix per signal frequency; a failure at one
    /// frequency does not stop the others.
    pub fn solve(&self, netlist: &Netlist) -> Result<Vec<Result<ConversionMatrix>>> {
        let mut base = self.base.clone();
        base.grid.n_modulation = self.sideband_count;
        let ss = SmallSignal::new(netlist, &base)?;
        Ok(self.signal_frequencies.iter().map(|&f| ss.at(f)).collect())
    }
}

/// Conversion matrix of `netlist` about `base` at one signal frequency.
pub fn conversion_matrix(netlist: &Netlist, base: &HBSolution, f_signal: f64) -> Result<ConversionMatrix> {
    SmallSignal::new(netlist, base)?.at(f_signal)
}

/// One point of a gain sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    pub f_signal: f64,
    /// `20·log10|S21_on| − 20·log10|S21_off|`.
    pub gain_db: f64,
    pub s21_on: Complex64,
    pub s21_off: Complex64,
    /// Port 2 output at `f_s − 2f_p` per signal wave in at port 1.
    pub idler: Complex64,
    pub converged: bool,
}

pub const GAIN_CSV_HEADER: &str = "f_signal_hz,gain_db,s21_on_re,s21_on_im,s21_off_re,s21_off_im,idler_re,idler_im,converged";

/// CSV text with one row per point; values in shortest round-trip form.
pub fn gain_csv(results: &[GainResult]) -> String {
    let mut out = String::from(GAIN_CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
            r.f_signal,
            r.gain_db,
            r.s21_on.re,
            r.s21_on.im,
            r.s21_off.re,
            r.s21_off.im,
            r.idler.re,
            r.idler.im,
            r.converged
        ));
    }
    out
}

/// Evenly spaced frequencies from `f1` to `f2` inclusive.
pub fn linspace(f1: f64, f2: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![f1],
        _ => (0..n).map(|i| f1 + (f2 - f1) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Pumped and reference linearizations of one operating point.
pub struct GainSetup {
    pub pump: HBSolution,
    on: SmallSignal,
    off: SmallSignal,
}

impl GainSetup {
    /// Solves the pump steady state and the flux-biased, unpumped reference
    /// state for `drive`.
    pub fn new(netlist: &Netlist, grid: HarmonicGrid, drive: &Drive, config: SolverConfig) -> Result<Self> {
        let solver = PumpSolver::new(netlist, grid, config)?;
        let reference = Drive {
            pump_amplitude: 0.0,
            ..*drive
        };
        let off_state = solver.solve(&reference)?;
        let pump = solver.solve_from(Some(&off_state), drive)?;
        Self::from_states(netlist, pump, &off_state)
    }

    pub fn from_states(netlist: &Netlist, pump: HBSolution, reference: &HBSolution) -> Result<Self> {
        let on = SmallSignal::new(netlist, &pump)?;
        let off = SmallSignal::new(netlist, reference)?;
        Ok(Self { pump, on, off })
    }

    pub fn pumped(&self) -> &SmallSignal {
        &self.on
    }

    pub fn point(&self, f_signal: f64) -> GainResult {
        match (self.on.transmission(f_signal), self.off.transmission(f_signal)) {
            (Ok((f, on, idler)), Ok((_, off, _))) => GainResult {
                f_signal: f,
                gain_db: 20.0 * on.norm().log10() - 20.0 * off.norm().log10(),
                s21_on: on,
                s21_off: off,
                idler,
                converged: true,
            },
            _ => GainResult {
                f_signal: guard_signal_frequency(f_signal, self.pump.grid.f_pump),
                gain_db: f64::NAN,
                s21_on: Complex64::new(f64::NAN, f64::NAN),
                s21_off: Complex64::new(f64::NAN, f64::NAN),
                idler: Complex64::new(f64::NAN, f64::NAN),
                converged: false,
            },
        }
    }

    /// Gain at every frequency; points are independent, so the result does
    /// not depend on how the work is scheduled.
    pub fn sweep(&self, frequencies: &[f64]) -> Vec<GainResult> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            frequencies.par_iter().map(|&f| self.point(f)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            frequencies.iter().map(|&f| self.point(f)).collect()
        }
    }
}

/// Gain versus signal frequency at one pump and flux setting.
pub fn gain_sweep(
    netlist: &Netlist,
    grid: HarmonicGrid,
    drive: &Drive,
    frequencies: &[f64],
    config: SolverConfig,
) -> Result<Vec<GainResult>> {
    Ok(GainSetup::new(netlist, grid, drive, config)?.sweep(frequencies))
}

/// Gain over a grid of pump amplitudes (rows) and signal frequencies
/// (columns). Amplitudes are solved in the given order, each warm-started
/// from the last converged one; rows whose pump solve fails are `None`.
pub fn power_gain_map(
    netlist: &Netlist,
    grid: HarmonicGrid,
    dc_flux_current: f64,
    pump_amplitudes: &[f64],
    frequencies: &[f64],
    config: SolverConfig,
) -> Result<Vec<Option<Vec<GainResult>>>> {
    let solver = PumpSolver::new(netlist, grid, config)?;
    let reference = solver.solve(&Drive::new(0.0, dc_flux_current))?;
    let mut last = reference.clone();
    let mut rows = Vec::with_capacity(pump_amplitudes.len());
    for &ip in pump_amplitudes {
        match solver.solve_from(Some(&last), &Drive::new(ip, dc_flux_current)) {
            Ok(pump) => {
                last = pump.clone();
                let setup = GainSetup::from_states(netlist, pump, &reference)?;
                rows.push(Some(setup.sweep(frequencies)));
            }
            Err(_) => rows.push(None),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hb::linear_ac;
    use crate::netlist::{build_twpa, TwpaDesign};

    fn device(cells: usize) -> Netlist {
        build_twpa(&TwpaDesign::table1().with_cells(cells).lossless()).unwrap()
    }

    #[test]
    fn guard_moves_degenerate_points() {
        assert_eq!(guard_signal_frequency(2e9, 4e9), 2e9 + 1e3);
        assert_eq!(guard_signal_frequency(4e9 + 10.0, 4e9), 4e9 + 1e3);
        assert_eq!(guard_signal_frequency(3e9, 4e9), 3e9);
    }

    #[test]
    fn unpumped_conversion_matches_linear_ac() {
        let n = device(5);
        let grid = HarmonicGrid::new(4e9);
        let rest = PumpSolver::new(&n, grid, SolverConfig::default()).unwrap().solve(&Drive::pump_only(0.0)).unwrap();
        let ss = SmallSignal::new(&n, &rest).unwrap();
        assert_eq!(ss.sidebands(), &[-4, -2, 0, 2, 4]);
        let f = 5.3e9;
        let cm = ss.at(f).unwrap();
        let lin = linear_ac(&n, &[f]).unwrap();
        for a in [1, 2, 3] {
            for b in [1, 2, 3] {
                let d = cm.get(a, 0, b, 0).unwrap() - lin.get(0, a, b).unwrap();
                assert!(d.norm() < 1e-10, "S{a}{b}: {d}");
            }
        }
        assert!(cm.get(2, -2, 1, 0).unwrap().norm() < 1e-14);
    }

    #[test]
    fn pumped_lossless_device_is_symplectic() {
        let n = device(3);
        let setup = GainSetup::new(&n, HarmonicGrid::new(4e9), &Drive::pump_only(1.02e-6), SolverConfig::default()).unwrap();
        let cm = setup.pumped().at(4.4e9).unwrap();
        for &port in &cm.ports {
            for &k in &cm.sidebands {
                let sign = cm.frequencies[cm.sidebands.iter().position(|&x| x == k).unwrap()].signum();
                let r = cm.signed_row_power(port, k).unwrap();
                let c = cm.signed_column_power(port, k).unwrap();
                assert!((r - sign).abs() < 1e-9, "row ({port},{k}) {r}");
                assert!((c - sign).abs() < 1e-9, "column ({port},{k}) {c}");
            }
        }
    }

    #[test]
    fn csv_round_trips_values() {
        let r = GainResult {
            f_signal: 4.4e9,
            gain_db: 1.0 / 3.0,
            s21_on: Complex64::new(0.1, -0.2),
            s21_off: Complex64::new(0.3, 0.4),
            idler: Complex64::new(0.0, 1e-5),
            converged: true,
        };
        let text = gain_csv(&[r]);
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), GAIN_CSV_HEADER.split(',').count());
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[8], "true");
    }

    #[test]
    fn linspace_endpoints() {
        let f = linspace(2e9, 9e9, 523);
        assert_eq!(f.len(), 523);
        assert_eq!(f[0], 2e9);
        assert_eq!(f[522], 9e9);
    }
}
