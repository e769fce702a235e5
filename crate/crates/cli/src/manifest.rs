//! Run manifest: a flat JSON object, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snailhb::hb::SolverConfig;
use snailhb::units::parse_value;

/// Evenly spaced axis `start..=stop` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Axis {
    /// Parses `start:stop:points`; numbers accept engineering suffixes.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("axis {text:?} must look like start:stop:points"));
        }
        let num = |s: &str| parse_value(s.trim()).ok_or_else(|| format!("bad number {s:?} in axis {text:?}"));
        let points = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad point count {:?} in axis {text:?}", parts[2]))?;
        Ok(Self {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        snailhb::smallsignal::linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Manifest {
    /// Device preset; only `table1` exists.
    pub preset: Option<String>,
    /// Netlist file used instead of the preset device.
    pub netlist: Option<PathBuf>,
    /// Cell count override for the preset device.
    pub cells: Option<usize>,
    pub f_pump: f64,
    pub n_harmonics: usize,
    pub n_modulation: usize,
    pub oversampling: usize,
    /// Pump amplitude in µA.
    pub pump_ua: f64,
    pub flux_ratio: Option<f64>,
    pub i_dc: Option<f64>,
    pub band: Axis,
    /// Pump amplitudes (µA) for the power map.
    pub pump_axis: Option<Axis>,
    /// Flux ratios for the SNAIL flux map.
    pub flux_axis: Option<Axis>,
    /// Signal frequencies of the power-map cuts.
    pub cuts: Vec<f64>,
    pub solver: SolverConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Cross-check the pump state against the transient integrator on a
    /// short device.
    pub oracle: bool,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            preset: Some("table1".into()),
            netlist: None,
            cells: None,
            f_pump: 4e9,
            n_harmonics: 8,
            n_modulation: 4,
            oversampling: 4,
            pump_ua: 1.02,
            flux_ratio: None,
            i_dc: None,
            band: Axis {
                start: 2e9,
                stop: 9e9,
                points: 523,
            },
            pump_axis: None,
            flux_axis: None,
            cuts: vec![4.4e9],
            solver: SolverConfig::default(),
            out: PathBuf::from("out"),
            threads: None,
            oracle: false,
        }
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("manifest {}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.flux_ratio.is_some() && self.i_dc.is_some() {
            return Err("give either flux_ratio or i_dc, not both".into());
        }
        match (&self.preset, &self.netlist) {
            (Some(p), _) if p != "table1" => return Err(format!("unknown preset {p:?}")),
            (Some(_), Some(_)) => return Err("give either preset or netlist, not both".into()),
            (None, None) => return Err("a preset or a netlist is required".into()),
            (None, Some(_)) if self.flux_ratio.is_some() => {
                return Err("flux_ratio needs the preset device; give i_dc for a netlist".into())
            }
            _ => {}
        }
        if !(self.pump_ua.is_finite() && self.pump_ua >= 0.0) {
            return Err(format!("pump_ua must be >= 0, got {}", self.pump_ua));
        }
        if self.band.points < 2 || !(self.band.start > 0.0 && self.band.stop > self.band.start) {
            return Err(format!("band needs 0 < start < stop and at least 2 points, got {:?}", self.band));
        }
        if let Some(a) = &self.pump_axis {
            if a.points == 0 || !(a.start >= 0.0 && a.stop >= a.start) {
                return Err(format!("pump axis must be ascending, non-negative and non-empty, got {a:?}"));
            }
        }
        if let Some(a) = &self.flux_axis {
            if a.points == 0 || !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(format!("flux axis must be finite and non-empty, got {a:?}"));
            }
        }
        if self.cells == Some(0) {
            return Err("cells must be at least 1".into());
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        assert_eq!(
            Axis::parse("2g:9e9:523").unwrap(),
            Axis {
                start: 2e9,
                stop: 9e9,
                points: 523
            }
        );
        assert!(Axis::parse("2:9").is_err());
        assert!(Axis::parse("2:x:3").is_err());
    }

    #[test]
    fn flat_json_with_defaults() {
        let m: Manifest = serde_json::from_str(r#"{"f_pump": 6e9, "flux_ratio": 0.5, "solver": {"tolerance": 1e-8}}"#).unwrap();
        assert_eq!(m.f_pump, 6e9);
        assert_eq!(m.solver.tolerance, 1e-8);
        assert_eq!(m.solver.max_iterations, 50);
        assert_eq!(m.band.points, 523);
        assert!(m.validate().is_ok());
        assert!(serde_json::from_str::<Manifest>(r#"{"fpump": 1}"#).is_err());
    }

    #[test]
    fn exclusive_flux_inputs() {
        let m = Manifest {
            flux_ratio: Some(0.5),
            i_dc: Some(1e-4),
            ..Manifest::default()
        };
        assert!(m.validate().is_err());
    }
}
