use serde::{Deserialize, Serialize};

use super::{Component, Netlist, GROUND};
use crate::error::{Error, Result};
use crate::snail::SnailParams;
use crate::FLUX_QUANTUM;

/// Flux-line current that produces half a flux quantum in the device the
/// default preset describes.
pub const HALF_QUANTUM_CURRENT: f64 = 0.285e-3;

/// Where the junction capacitance `C_J` is placed inside each SNAIL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CjPlacement {
    /// Across the whole SNAIL, i.e. in parallel with the small junction.
    #[default]
    Snail,
    /// Across each of the big junctions of the arm.
    BigJunctions,
}

/// Where the `L_g` inductances sit on the flux line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LgPlacement {
    /// Series choke between the flux port and the line, plus a return to
    /// ground at the far end.
    #[default]
    FluxLineEnds,
    /// Only the far-end return to ground; the flux port drives the line
    /// directly.
    GroundReturn,
}

/// Parameters of an N-cell SNAIL amplifier with an auxiliary flux line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwpaDesign {
    pub n_cells: usize,
    pub snail: SnailParams,
    pub c_j: f64,
    pub c_g: f64,
    pub c_f: f64,
    pub l_add: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub coupling_k: f64,
    pub tan_delta: f64,
    pub z_port: f64,
    pub alternate_polarity: bool,
    #[serde(default)]
    pub cj_placement: CjPlacement,
    #[serde(default)]
    pub lg_placement: LgPlacement,
}

impl TwpaDesign {
    /// The 700-cell device: `I_c` = 2.19 µA, r = 0.07, `C_J` = 50 fF,
    /// `C_g` = 250 fF, `L_add` = 70 fH, `L_f` = 190 pH, `C_f` = 76 fF,
    /// `L_g` = 20 nH, tan δ = 2.1e-3, 50 Ω ports.
    ///
    /// The mutual coupling is not a measured quantity; `k` is chosen so that
    /// 0.285 mA of flux-line current threads half a flux quantum.
    pub fn table1() -> Self {
        let (l_add, l_f) = (70e-15, 190e-12);
        Self {
            n_cells: 700,
            snail: SnailParams {
                i_c: 2.19e-6,
                r: 0.07,
                n_big: 3,
            },
            c_j: 50e-15,
            c_g: 250e-15,
            c_f: 0.076e-12,
            l_add,
            l_f,
            l_g: 20e-9,
            coupling_k: 0.5 * FLUX_QUANTUM / (HALF_QUANTUM_CURRENT * (l_add * l_f).sqrt()),
            tan_delta: 2.1e-3,
            z_port: 50.0,
            alternate_polarity: true,
            cj_placement: CjPlacement::Snail,
            lg_placement: LgPlacement::FluxLineEnds,
        }
    }

    pub fn with_cells(mut self, n_cells: usize) -> Self {
        self.n_cells = n_cells;
        self
    }

    pub fn lossless(mut self) -> Self {
        self.tan_delta = 0.0;
        self
    }

    /// Mutual inductance `k·√(L_add·L_f)` of one cell.
    pub fn mutual_inductance(&self) -> f64 {
        self.coupling_k * (self.l_add * self.l_f).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if self.n_cells == 0 {
            return bad("n_cells must be at least 1".into());
        }
        self.snail
            .validate()
            .map_err(|e| Error::InvalidDesign(e.to_string()))?;
        for (name, v) in [
            ("c_j", self.c_j),
            ("c_g", self.c_g),
            ("c_f", self.c_f),
            ("l_add", self.l_add),
            ("l_f", self.l_f),
            ("l_g", self.l_g),
            ("z_port", self.z_port),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.coupling_k.is_finite() && self.coupling_k.abs() <= 1.0) {
            return bad(format!("|coupling_k| must be <= 1, got {}", self.coupling_k));
        }
        if !(self.tan_delta.is_finite() && self.tan_delta >= 0.0) {
            return bad(format!("tan_delta must be >= 0, got {}", self.tan_delta));
        }
        Ok(())
    }
}

impl Default for TwpaDesign {
    fn default() -> Self {
        Self::table1()
    }
}

/// Node names used by [`build_twpa`].
pub mod nodes {
    pub fn chain(i: usize) -> String {
        format!("s{i}")
    }
    pub fn arm(cell: usize, j: usize) -> String {
        format!("a{cell}_{j}")
    }
    pub fn flux(i: usize) -> String {
        format!("f{i}")
    }
    pub const FLUX_PORT: &str = "fp";
}

/// Generates the amplifier netlist.
///
/// Each cell `i` joins chain nodes `s{i}` and `s{i+1}` with a SNAIL made of
/// physical junctions: the small junction directly across the cell, and an
/// arm of three big junctions plus the coupling inductance `L_add`. `C_g`
/// loads `s{i+1}`. The flux line is a ladder of `L_f` segments with `C_f`
/// shunts; segment `i` is coupled to `L_add` of cell `i` with sign `(-1)^i`
/// when `alternate_polarity` is set. Ports: 1 at `s0`, 2 at `s{N}`, 3 on
/// the flux line.
pub fn build_twpa(design: &TwpaDesign) -> Result<Netlist> {
    use nodes::*;
    design.validate()?;
    let d = design;
    let n = d.n_cells;
    let mut c = Vec::with_capacity(n * 12 + 6);

    let flux_in = match d.lg_placement {
        LgPlacement::FluxLineEnds => {
            c.push(Component::inductor("Lg_in", FLUX_PORT, flux(0), d.l_g));
            FLUX_PORT.to_string()
        }
        LgPlacement::GroundReturn => flux(0),
    };

    for i in 0..n {
        let (a, b) = (chain(i), chain(i + 1));
        let arm_nodes = [arm(i, 1), arm(i, 2), arm(i, 3)];
        c.push(Component::junction(format!("B{i}s"), &a, &b, d.snail.r * d.snail.i_c));
        c.push(Component::junction(format!("B{i}a"), &a, &arm_nodes[0], d.snail.i_c));
        c.push(Component::junction(format!("B{i}b"), &arm_nodes[0], &arm_nodes[1], d.snail.i_c));
        c.push(Component::junction(format!("B{i}c"), &arm_nodes[1], &arm_nodes[2], d.snail.i_c));
        c.push(Component::inductor(format!("L{i}add"), &arm_nodes[2], &b, d.l_add));
        match d.cj_placement {
            CjPlacement::Snail => c.push(Component::capacitor(format!("C{i}j"), &a, &b, d.c_j)),
            CjPlacement::BigJunctions => {
                let ends = [a.as_str(), &arm_nodes[0], &arm_nodes[1], &arm_nodes[2]];
                for (j, w) in ends.windows(2).enumerate() {
                    c.push(Component::capacitor(format!("C{i}j{j}"), w[0], w[1], d.c_j));
                }
            }
        }
        c.push(Component::lossy_capacitor(format!("C{i}g"), &b, GROUND, d.c_g, d.tan_delta));
        c.push(Component::inductor(format!("L{i}f"), flux(i), flux(i + 1), d.l_f));
        c.push(Component::capacitor(format!("C{i}f"), flux(i + 1), GROUND, d.c_f));
        let sign = if d.alternate_polarity && i % 2 == 1 { -1.0 } else { 1.0 };
        c.push(Component::mutual(
            format!("K{i}"),
            format!("L{i}add"),
            format!("L{i}f"),
            sign * d.coupling_k,
        ));
    }
    c.push(Component::inductor("Lg_out", flux(n), GROUND, d.l_g));
    c.push(Component::port("P1", chain(0), GROUND, d.z_port, 1));
    c.push(Component::port("P2", chain(n), GROUND, d.z_port, 2));
    c.push(Component::port("P3", flux_in, GROUND, d.z_port, 3));
    Netlist::new(c)
}

/// DC flux-line current threading `flux_ratio·Φ₀` through the first cell.
pub fn flux_current_for(design: &TwpaDesign, flux_ratio: f64) -> Result<f64> {
    let m = design.mutual_inductance();
    if m == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    Ok(flux_ratio * FLUX_QUANTUM / m)
}

/// Inverse of [`flux_current_for`].
pub fn flux_ratio_for(design: &TwpaDesign, i_dc: f64) -> Result<f64> {
    let m = design.mutual_inductance();
    if m == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    Ok(i_dc * m / FLUX_QUANTUM)
}
