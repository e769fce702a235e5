//! Browser bindings: flux tuning of one SNAIL, linear transmission and
//! pumped gain of short amplifiers.
//!
//! Each export returns a flat `Float64Array`; the page plots it against the
//! axis it asked for.

use snailhb::hb::{linear_ac, Drive, HarmonicGrid, SolverConfig};
use snailhb::netlist::{build_twpa, flux_current_for, Netlist, TwpaDesign};
use snailhb::smallsignal::{gain_sweep, linspace};
use snailhb::snail::{flux_map, SnailParams};
use wasm_bindgen::prelude::*;

/// Largest device the page may request; keeps a gain sweep interactive.
pub const MAX_CELLS: usize = 400;
pub const MAX_POINTS: usize = 1000;

fn check_axis(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must be between 2 and {MAX_POINTS}, got {points}"))
    }
}

fn device(cells: usize, tan_delta: f64) -> Result<(TwpaDesign, Netlist), String> {
    if !(1..=MAX_CELLS).contains(&cells) {
        return Err(format!("cells must be between 1 and {MAX_CELLS}, got {cells}"));
    }
    let design = TwpaDesign {
        tan_delta,
        ..TwpaDesign::table1().with_cells(cells)
    };
    let netlist = build_twpa(&design).map_err(|e| e.to_string())?;
    Ok((design, netlist))
}

/// γ at `points` flux ratios spanning `[0, 1]`, for asymmetry `r`.
pub fn gamma_curve(r: f64, points: usize) -> Result<Vec<f64>, String> {
    check_axis(points)?;
    let params = SnailParams::new(TwpaDesign::table1().snail.i_c, r).map_err(|e| e.to_string())?;
    let rows = flux_map(&params, &linspace(0.0, 1.0, points)).map_err(|e| e.to_string())?;
    Ok(rows.iter().map(|row| row.expansion.gamma).collect())
}

/// Unpumped `|S21|` in dB over `f1..=f2` (Hz).
pub fn transmission(cells: usize, tan_delta: f64, f1: f64, f2: f64, points: usize) -> Result<Vec<f64>, String> {
    check_axis(points)?;
    let (_, netlist) = device(cells, tan_delta)?;
    let s = linear_ac(&netlist, &linspace(f1, f2, points)).map_err(|e| e.to_string())?;
    Ok((0..points)
        .map(|k| 20.0 * s.get(k, 2, 1).map_or(f64::NAN, |v| v.norm()).log10())
        .collect())
}

/// Pump-on minus pump-off gain in dB over `f1..=f2` (Hz); failed points are
/// NaN.
pub fn gain(cells: usize, f_pump: f64, pump_ua: f64, flux_ratio: f64, f1: f64, f2: f64, points: usize) -> Result<Vec<f64>, String> {
    check_axis(points)?;
    let (design, netlist) = device(cells, TwpaDesign::table1().tan_delta)?;
    let i_dc = flux_current_for(&design, flux_ratio).map_err(|e| e.to_string())?;
    let drive = Drive::new(pump_ua * 1e-6, i_dc);
    let freqs = linspace(f1, f2, points);
    let results = gain_sweep(&netlist, HarmonicGrid::new(f_pump), &drive, &freqs, SolverConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(results.iter().map(|r| r.gain_db).collect())
}

#[wasm_bindgen(js_name = gammaCurve)]
pub fn gamma_curve_js(r: f64, points: usize) -> Result<Vec<f64>, JsError> {
    gamma_curve(r, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = transmission)]
pub fn transmission_js(cells: usize, tan_delta: f64, f1: f64, f2: f64, points: usize) -> Result<Vec<f64>, JsError> {
    transmission(cells, tan_delta, f1, f2, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = gain)]
pub fn gain_js(
    cells: usize,
    f_pump: f64,
    pump_ua: f64,
    flux_ratio: f64,
    f1: f64,
    f2: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    gain(cells, f_pump, pump_ua, flux_ratio, f1, f2, points).map_err(|e| JsError::new(&e))
}
