//! Linear AC analysis and the harmonic-balance pump steady state.

mod condense;
mod linear;
mod pump;

pub use linear::{linear_ac, ScatteringMatrix};
pub(crate) use condense::{assemble_sidebands, Reduction};
pub(crate) use linear::JunctionSpectra;
pub use pump::{homotopy_sweep, solve_pump, solve_pump_from, PumpSolver};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated harmonic set of a single-tone pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicGrid {
    /// Pump frequency (Hz).
    pub f_pump: f64,
    /// Pump harmonics retained in the steady state.
    pub n_harmonics: usize,
    /// Sidebands `f_s + k·f_p`, `|k| <= n_modulation`, in the linearization.
    pub n_modulation: usize,
    /// Time samples per retained harmonic.
    pub oversampling: usize,
}

impl HarmonicGrid {
    /// 8 pump harmonics, 4 modulation sidebands, oversampling 4.
    pub fn new(f_pump: f64) -> Self {
        Self {
            f_pump,
            n_harmonics: 8,
            n_modulation: 4,
            oversampling: 4,
        }
    }

    pub fn time_samples(&self) -> usize {
        self.oversampling * self.n_harmonics
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU * self.f_pump
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_pump.is_finite() && self.f_pump > 0.0) {
            return Err(Error::InvalidParameter(format!("f_pump must be > 0, got {}", self.f_pump)));
        }
        if self.n_harmonics == 0 || self.n_modulation == 0 {
            return Err(Error::InvalidParameter("n_harmonics and n_modulation must be >= 1".into()));
        }
        if self.time_samples() < 4 * self.n_harmonics {
            return Err(Error::InvalidParameter(format!(
                "{} time samples cannot resolve {} harmonics without aliasing (need >= {})",
                self.time_samples(),
                self.n_harmonics,
                4 * self.n_harmonics
            )));
        }
        Ok(())
    }
}

/// Sources applied to the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    /// Peak pump current of the Norton source at `pump_port` (A).
    pub pump_amplitude: f64,
    /// DC current into `flux_port` (A).
    pub dc_flux_current: f64,
    pub pump_port: u32,
    pub flux_port: u32,
}

impl Drive {
    pub fn new(pump_amplitude: f64, dc_flux_current: f64) -> Self {
        Self {
            pump_amplitude,
            dc_flux_current,
            pump_port: 1,
            flux_port: 3,
        }
    }

    pub fn pump_only(pump_amplitude: f64) -> Self {
        Self::new(pump_amplitude, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_amplitude.is_finite() && self.pump_amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!("pump amplitude must be >= 0, got {}", self.pump_amplitude)));
        }
        if !self.dc_flux_current.is_finite() {
            return Err(Error::InvalidParameter("dc flux current is not finite".into()));
        }
        Ok(())
    }

    fn lerp(&self, to: &Drive, t: f64) -> Drive {
        Drive {
            pump_amplitude: self.pump_amplitude + t * (to.pump_amplitude - self.pump_amplitude),
            dc_flux_current: self.dc_flux_current + t * (to.dc_flux_current - self.dc_flux_current),
            ..*to
        }
    }
}

/// Newton and continuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Residual tolerance relative to the source norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Upper bound on continuation steps per solve.
    pub max_homotopy_steps: usize,
    /// Try the odd-harmonic ansatz first and keep it if the full residual
    /// confirms it.
    pub half_wave: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 50,
            max_homotopy_steps: 64,
            half_wave: true,
        }
    }
}

/// Converged pump steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HBSolution {
    pub grid: HarmonicGrid,
    pub drive: Drive,
    /// `node_amplitudes[node][h]`: flux phasor (Wb) of harmonic `h` at each
    /// netlist node, `Φ(t) = Re Σ_h X_h·e^{jhωt}`. Harmonic 0 is real.
    pub node_amplitudes: Vec<Vec<Complex64>>,
    /// Final residual norm relative to the source norm.
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub homotopy_steps: usize,
    /// Whether the solution was found with only odd harmonics active.
    pub half_wave: bool,
}

impl HBSolution {
    pub fn harmonic(&self, node: usize, h: usize) -> Complex64 {
        self.node_amplitudes[node][h]
    }

}
