use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::condense::{assemble_sidebands, Reduction};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::netlist::Netlist;

/// Two-sided spectra `G_m` of the junction small-signal conductances
/// `I_c·(2π/Φ₀)·cos(2π·ΔΦ(t)/Φ₀)`, stored for `|m| <= max_offset`.
#[derive(Debug, Clone)]
pub(crate) struct JunctionSpectra {
    pub max_offset: usize,
    /// `g[junction][m + max_offset]`.
    pub g: Vec<Vec<Complex64>>,
}

impl JunctionSpectra {
    /// Zero-phase junctions: `G_0 = 1/L_J`, no modulation.
    pub fn unpumped(circuit: &Circuit) -> Self {
        Self {
            max_offset: 0,
            g: circuit
                .junctions
                .iter()
                .map(|j| vec![Complex64::new(1.0 / j.inductance(), 0.0)])
                .collect(),
        }
    }

    #[inline]
    pub fn get(&self, junction: usize, m: isize) -> Complex64 {
        if m.unsigned_abs() > self.max_offset {
            Complex64::new(0.0, 0.0)
        } else {
            self.g[junction][(m + self.max_offset as isize) as usize]
        }
    }
}

/// Power-wave scattering parameters of the unpumped, unbiased circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMatrix {
    pub frequencies: Vec<f64>,
    /// Port numbers in matrix order.
    pub ports: Vec<u32>,
    /// `s[f][i][j]`: wave out of `ports[i]` per wave into `ports[j]`.
    pub s: Vec<Vec<Vec<Complex64>>>,
}

impl ScatteringMatrix {
    /// `S_ij` at frequency index `f`, addressed by port number.
    pub fn get(&self, f: usize, out_port: u32, in_port: u32) -> Option<Complex64> {
        let i = self.ports.iter().position(|&p| p == out_port)?;
        let j = self.ports.iter().position(|&p| p == in_port)?;
        Some(self.s[f][i][j])
    }
}

/// Scattering matrix with every junction replaced by its zero-phase
/// inductance. Frequencies are in Hz and must be positive.
pub fn linear_ac(netlist: &Netlist, frequencies: &[f64]) -> Result<ScatteringMatrix> {
    let circuit = Circuit::compile(netlist)?;
    linear_ac_compiled(&circuit, frequencies)
}

pub(crate) fn linear_ac_compiled(circuit: &Circuit, frequencies: &[f64]) -> Result<ScatteringMatrix> {
    let spectra = JunctionSpectra::unpumped(circuit);
    let reduction = Reduction::new(circuit);
    let mut s = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidParameter(format!("frequency must be > 0, got {f}")));
        }
        let w = std::f64::consts::TAU * f;
        let lu = assemble_sidebands(circuit, &reduction, &[w], &[0], &spectra)?;
        let mut rows = vec![vec![Complex64::new(0.0, 0.0); circuit.ports.len()]; circuit.ports.len()];
        for (j, pj) in circuit.ports.iter().enumerate() {
            let x = lu.unit_port_response(pj, 0);
            for (i, pi) in circuit.ports.iter().enumerate() {
                let v = Complex64::new(0.0, w) * lu.port_flux(&x, pi, 0);
                let mut sij = 2.0 * v / (pi.r * pj.r).sqrt();
                if i == j {
                    sij -= 1.0;
                }
                rows[i][j] = sij;
            }
        }
        s.push(rows);
    }
    Ok(ScatteringMatrix {
        frequencies: frequencies.to_vec(),
        ports: circuit.ports.iter().map(|p| p.number).collect(),
        s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, build_twpa, TwpaDesign};

    #[test]
    fn series_inductor_matches_closed_form() {
        // two 50 Ω ports joined by a series inductor
        let n = parse_netlist("P1 1 0 R=50 port=1\nL1 1 2 2n\nP2 2 0 R=50 port=2\n").unwrap();
        let f = 3e9;
        let s = linear_ac(&n, &[f]).unwrap();
        let z = Complex64::new(0.0, std::f64::consts::TAU * f * 2e-9);
        let s21 = 2.0 * 50.0 / (z + 100.0);
        let s11 = z / (z + 100.0);
        assert!((s.get(0, 2, 1).unwrap() - s21).norm() < 1e-12);
        assert!((s.get(0, 1, 1).unwrap() - s11).norm() < 1e-12);
    }

    #[test]
    fn lossless_line_is_unitary() {
        let d = TwpaDesign::table1().with_cells(30).lossless();
        let n = build_twpa(&d).unwrap();
        let s = linear_ac(&n, &[2e9, 5e9, 8e9]).unwrap();
        for f in 0..3 {
            for j in 0..s.ports.len() {
                let p: f64 = (0..s.ports.len()).map(|i| s.s[f][i][j].norm_sqr()).sum();
                assert!((p - 1.0).abs() < 1e-9, "column {j} power {p}");
            }
        }
    }
}
