//! `snailhb`: gain, pump-power and flux sweeps of SNAIL amplifiers.

mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use snailhb::hb::{solve_pump, Drive, HBSolution, HarmonicGrid};
use snailhb::netlist::{build_twpa, flux_current_for, flux_ratio_for, nodes, parse_netlist, Netlist, TwpaDesign};
use snailhb::smallsignal::{gain_csv, power_gain_map, GainResult, GainSetup};
use snailhb::snail::{flux_map, flux_map_csv};
use snailhb::tdoracle::{transient, ToneSource, TransientConfig};
use snailhb::Error;

use manifest::{Axis, Manifest};
use plot::{heat_map, line_chart, Axes, Series};

#[derive(Parser)]
#[command(name = "snailhb", version, about = "Harmonic-balance simulation of SNAIL parametric amplifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gain versus signal frequency at one pump setting.
    Gain(Common),
    /// Gain over pump amplitude and signal frequency.
    PowerMap {
        #[command(flatten)]
        common: Common,
        /// Pump amplitudes in µA as start:stop:points.
        #[arg(long, value_parser = Axis::parse)]
        pump_axis: Option<Axis>,
        /// Signal frequency of a gain-versus-pump cut; repeatable.
        #[arg(long = "cut", value_parser = parse_number)]
        cuts: Vec<f64>,
    },
    /// SNAIL expansion coefficients versus flux.
    Fluxmap {
        #[command(flatten)]
        common: Common,
        /// Flux ratios as start:stop:points.
        #[arg(long, value_parser = Axis::parse)]
        flux_axis: Option<Axis>,
    },
    /// Transient simulation of the pumped device, dumped as a time series.
    #[command(hide = true)]
    Oracle(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run manifest; flags below override its keys.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Device preset (only `table1`).
    #[arg(long, conflicts_with = "netlist")]
    preset: Option<String>,
    /// Netlist file describing the device.
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Cell count of the preset device.
    #[arg(long)]
    cells: Option<usize>,
    /// Pump frequency in Hz.
    #[arg(long, value_parser = parse_number)]
    fp: Option<f64>,
    /// Pump amplitude in µA.
    #[arg(long, value_parser = parse_number)]
    pump_ua: Option<f64>,
    /// External flux in units of the flux quantum.
    #[arg(long, value_parser = parse_number, conflicts_with = "idc")]
    flux: Option<f64>,
    /// DC flux-line current in A.
    #[arg(long, value_parser = parse_number)]
    idc: Option<f64>,
    /// Signal band as f1:f2:points.
    #[arg(long, value_parser = Axis::parse)]
    band: Option<Axis>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also cross-check the pump state against a transient run of a
    /// truncated device.
    #[arg(long)]
    oracle: bool,
}

fn parse_number(s: &str) -> Result<f64, String> {
    snailhb::units::parse_value(s).ok_or_else(|| format!("not a number: {s:?}"))
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidDesign(_)
            | Error::Syntax { .. }
            | Error::Semantic { .. }
            | Error::ZeroCoupling
            | Error::GuardExceeded { .. } => Failure::Input(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io(&path))
}

fn resolve(common: &Common) -> Result<Manifest, Failure> {
    let mut m = match &common.manifest {
        Some(path) => Manifest::load(path).map_err(Failure::Input)?,
        None => Manifest::default(),
    };
    if let Some(p) = &common.preset {
        m.preset = Some(p.clone());
        m.netlist = None;
    }
    if let Some(p) = &common.netlist {
        m.netlist = Some(p.clone());
        m.preset = None;
    }
    if common.cells.is_some() {
        m.cells = common.cells;
    }
    if let Some(v) = common.fp {
        m.f_pump = v;
    }
    if let Some(v) = common.pump_ua {
        m.pump_ua = v;
    }
    if let Some(v) = common.flux {
        m.flux_ratio = Some(v);
        m.i_dc = None;
    }
    if let Some(v) = common.idc {
        m.i_dc = Some(v);
        m.flux_ratio = None;
    }
    if let Some(v) = common.band {
        m.band = v;
    }
    if let Some(v) = &common.out {
        m.out = v.clone();
    }
    if common.threads.is_some() {
        m.threads = common.threads;
    }
    m.oracle |= common.oracle;
    m.validate().map_err(Failure::Input)?;
    Ok(m)
}

/// Device, its design when built from the preset, and the flux operating
/// point in both units.
struct Device {
    netlist: Netlist,
    design: Option<TwpaDesign>,
    i_dc: f64,
    flux_ratio: Option<f64>,
}

fn device(m: &Manifest) -> Result<Device, Failure> {
    if let Some(path) = &m.netlist {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let netlist = parse_netlist(&text)?;
        return Ok(Device {
            netlist,
            design: None,
            i_dc: m.i_dc.unwrap_or(0.0),
            flux_ratio: None,
        });
    }
    let mut design = TwpaDesign::table1();
    if let Some(n) = m.cells {
        design = design.with_cells(n);
    }
    let (i_dc, ratio) = match (m.flux_ratio, m.i_dc) {
        (_, Some(i)) => (i, flux_ratio_for(&design, i)?),
        (r, None) => {
            let r = r.unwrap_or(0.0);
            (flux_current_for(&design, r)?, r)
        }
    };
    Ok(Device {
        netlist: build_twpa(&design)?,
        design: Some(design),
        i_dc,
        flux_ratio: Some(ratio),
    })
}

fn grid(m: &Manifest) -> HarmonicGrid {
    HarmonicGrid {
        n_harmonics: m.n_harmonics,
        n_modulation: m.n_modulation,
        oversampling: m.oversampling,
        ..HarmonicGrid::new(m.f_pump)
    }
}

fn drive(m: &Manifest, dev: &Device) -> Drive {
    Drive::new(m.pump_ua * 1e-6, dev.i_dc)
}

fn prepare_out(m: &Manifest) -> Result<(), Failure> {
    std::fs::create_dir_all(&m.out).map_err(io(&m.out))
}

fn run_record(m: &Manifest, dev: &Device, started: Instant) -> serde_json::Value {
    json!({
        "manifest": m,
        "design": dev.design,
        "mutual_inductance_h": dev.design.as_ref().map(TwpaDesign::mutual_inductance),
        "flux": {
            "i_dc_a": dev.i_dc,
            "flux_ratio": dev.flux_ratio,
            "ratio_per_ampere": dev.design.as_ref().and_then(|d| flux_ratio_for(d, 1.0).ok()),
        },
        "grid": grid(m),
        "sidebands": 2 * m.n_modulation + 1,
        "threads": rayon::current_num_threads(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    })
}

fn solver_stats(pump: &HBSolution) -> serde_json::Value {
    json!({
        "residual_norm": pump.residual_norm,
        "newton_iterations": pump.newton_iterations,
        "homotopy_steps": pump.homotopy_steps,
        "half_wave": pump.half_wave,
    })
}

fn gain_points(results: &[GainResult]) -> Vec<(f64, f64)> {
    results.iter().map(|r| (r.f_signal / 1e9, r.gain_db)).collect()
}

fn count_failed(results: &[GainResult]) -> usize {
    results.iter().filter(|r| !r.converged).count()
}

fn run_gain(m: &Manifest) -> Result<(), Failure> {
    let started = Instant::now();
    let dev = device(m)?;
    prepare_out(m)?;
    let freqs = m.band.values();
    let setup = match GainSetup::new(&dev.netlist, grid(m), &drive(m, &dev), m.solver) {
        Ok(s) => s,
        Err(e) => {
            write(&m.out, "gain.csv", &gain_csv(&[]))?;
            let mut record = run_record(m, &dev, started);
            record["error"] = json!(e.to_string());
            write(&m.out, "run.json", &pretty(&record))?;
            return Err(e.into());
        }
    };
    let results = setup.sweep(&freqs);
    write(&m.out, "gain.csv", &gain_csv(&results))?;
    let title = format!("Gain, f_p = {} GHz, pump {} µA", m.f_pump / 1e9, m.pump_ua);
    let pts = gain_points(&results);
    let svg = line_chart(
        &Axes { title: &title, x_label: "signal frequency (GHz)", y_label: "gain (dB)" },
        &[Series { label: "gain", points: &pts }],
    );
    write(&m.out, "gain.svg", &svg)?;
    let failed = count_failed(&results);
    let mut record = run_record(m, &dev, started);
    record["solver"] = solver_stats(&setup.pump);
    record["failed_points"] = json!(failed);
    if m.oracle {
        record["oracle"] = run_oracle_check(m)?;
    }
    record["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    write(&m.out, "run.json", &pretty(&record))?;
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} of {} points failed", results.len())));
    }
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn cut_file_name(f: f64) -> String {
    format!("cut_{}GHz.csv", f / 1e9)
}

fn run_power_map(m: &Manifest) -> Result<(), Failure> {
    let started = Instant::now();
    let axis = m.pump_axis.ok_or_else(|| Failure::Input("power map needs a pump axis".into()))?;
    let dev = device(m)?;
    prepare_out(m)?;
    let amps_ua = axis.values();
    let amps: Vec<f64> = amps_ua.iter().map(|a| a * 1e-6).collect();
    let band = m.band.values();
    let mut freqs = band.clone();
    freqs.extend(&m.cuts);
    let rows = power_gain_map(&dev.netlist, grid(m), dev.i_dc, &amps, &freqs, m.solver)?;

    let mut csv = String::from("pump_ua,f_signal_hz,gain_db,converged\n");
    let mut cells = Vec::with_capacity(rows.len());
    for (a, row) in amps_ua.iter().zip(&rows) {
        let mut line = Vec::with_capacity(band.len());
        for (k, f) in band.iter().enumerate() {
            let r = row.as_ref().map(|r| r[k]);
            let (g, ok) = r.map_or((f64::NAN, false), |r| (r.gain_db, r.converged));
            let f = r.map_or(*f, |r| r.f_signal);
            csv.push_str(&format!("{a:?},{f:?},{g:?},{ok}\n"));
            line.push(ok.then_some(g));
        }
        cells.push(line);
    }
    write(&m.out, "map.csv", &csv)?;
    let title = format!("Gain (dB), f_p = {} GHz", m.f_pump / 1e9);
    let cols: Vec<f64> = band.iter().map(|f| f / 1e9).collect();
    let svg = heat_map(
        &Axes { title: &title, x_label: "signal frequency (GHz)", y_label: "pump amplitude (µA)" },
        &cols,
        &amps_ua,
        &cells,
    );
    write(&m.out, "map.svg", &svg)?;

    for (c, &f) in m.cuts.iter().enumerate() {
        let k = band.len() + c;
        let mut csv = String::from("pump_ua,gain_db,converged\n");
        for (a, row) in amps_ua.iter().zip(&rows) {
            let (g, ok) = row.as_ref().map_or((f64::NAN, false), |r| (r[k].gain_db, r[k].converged));
            csv.push_str(&format!("{a:?},{g:?},{ok}\n"));
        }
        write(&m.out, &cut_file_name(f), &csv)?;
    }

    let failed_rows = rows.iter().filter(|r| r.is_none()).count();
    let failed_points: usize = rows.iter().flatten().map(|r| count_failed(&r[..band.len()])).sum();
    let mut record = run_record(m, &dev, started);
    record["pump_axis_ua"] = json!(amps_ua);
    record["failed_rows"] = json!(failed_rows);
    record["failed_points"] = json!(failed_points);
    write(&m.out, "run.json", &pretty(&record))?;
    if failed_rows + failed_points > 0 {
        return Err(Failure::Solver(format!("{failed_rows} pump rows and {failed_points} points failed")));
    }
    Ok(())
}

fn run_fluxmap(m: &Manifest) -> Result<(), Failure> {
    let axis = m.flux_axis.unwrap_or(Axis { start: 0.0, stop: 1.0, points: 101 });
    if axis.points == 0 {
        return Err(Failure::Input("flux axis is empty".into()));
    }
    let ratios = axis.values();
    let params = TwpaDesign::table1().snail;
    prepare_out(m)?;
    let rows = flux_map(&params, &ratios)?;
    write(&m.out, "snail.csv", &flux_map_csv(&rows))?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.flux_ratio, r.expansion.gamma)).collect();
    let svg = line_chart(
        &Axes { title: "Four-wave mixing coefficient", x_label: "Φ_ext / Φ₀", y_label: "γ" },
        &[Series { label: "γ", points: &pts }],
    );
    write(&m.out, "gamma.svg", &svg)
}

const ORACLE_CELLS: usize = 3;
const ORACLE_STEPS_PER_PERIOD: f64 = 400.0;
const ORACLE_PERIODS: f64 = 200.0;
const ORACLE_HARMONICS: usize = 5;

/// Preset device truncated to a size the transient integrator handles,
/// at the manifest's pump and flux.
fn oracle_case(m: &Manifest) -> Result<(Manifest, Device), Failure> {
    if m.netlist.is_some() {
        return Err(Failure::Input("the oracle runs on the preset device only".into()));
    }
    let small = Manifest {
        cells: Some(m.cells.unwrap_or(ORACLE_CELLS).min(ORACLE_CELLS)),
        ..m.clone()
    };
    let dev = device(&small)?;
    Ok((small, dev))
}

fn oracle_transient(m: &Manifest, dev: &Device, out_node: &str) -> Result<snailhb::tdoracle::Transient, Failure> {
    let fp = m.f_pump;
    let mut cfg = TransientConfig::new(ORACLE_PERIODS / fp, 1.0 / (fp * ORACLE_STEPS_PER_PERIOD));
    cfg.sources.push(ToneSource::new(1, m.pump_ua * 1e-6, fp));
    cfg.dc_flux_current = dev.i_dc;
    cfg.record_nodes = vec![out_node.to_string()];
    Ok(transient(&dev.netlist, &cfg)?)
}

/// Output-node harmonics of the pump state from both solvers; writes
/// oracle.csv and returns a summary.
fn run_oracle_check(m: &Manifest) -> Result<serde_json::Value, Failure> {
    let (small, dev) = oracle_case(m)?;
    let cells = small.cells.unwrap_or(ORACLE_CELLS);
    let out_node = nodes::chain(cells);
    let idx = dev.netlist.node(&out_node).expect("chain end exists in a built device");
    let hb = solve_pump(&dev.netlist, grid(&small), &drive(&small, &dev), small.solver)?;
    let td = oracle_transient(&small, &dev, &out_node)?.spectrum(&out_node, small.f_pump, ORACLE_HARMONICS)?;
    let mut csv = String::from("harmonic,hb_re,hb_im,transient_re,transient_im\n");
    let mut worst = 0.0f64;
    let scale = hb.harmonic(idx, 1).norm();
    for (h, x_td) in td.iter().enumerate().skip(1) {
        let x_hb = if h <= small.n_harmonics { hb.harmonic(idx, h) } else { Default::default() };
        csv.push_str(&format!("{h},{:?},{:?},{:?},{:?}\n", x_hb.re, x_hb.im, x_td.re, x_td.im));
        worst = worst.max((x_hb - x_td).norm() / scale.max(f64::MIN_POSITIVE));
    }
    write(&m.out, "oracle.csv", &csv)?;
    Ok(json!({
        "cells": cells,
        "node": out_node,
        "steps_per_period": ORACLE_STEPS_PER_PERIOD,
        "periods": ORACLE_PERIODS,
        "max_difference_relative_to_fundamental": worst,
    }))
}

fn run_oracle_dump(m: &Manifest) -> Result<(), Failure> {
    let (small, dev) = oracle_case(m)?;
    prepare_out(m)?;
    let out_node = nodes::chain(small.cells.unwrap_or(ORACLE_CELLS));
    let run = oracle_transient(&small, &dev, &out_node)?;
    write(&m.out, "transient.csv", &run.to_csv())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (common, command) = match &cli.command {
        Command::Gain(c) | Command::Oracle(c) => (c, &cli.command),
        Command::PowerMap { common, .. } | Command::Fluxmap { common, .. } => (common, &cli.command),
    };
    let mut m = resolve(common)?;
    match command {
        Command::PowerMap { pump_axis, cuts, .. } => {
            if pump_axis.is_some() {
                m.pump_axis = *pump_axis;
            }
            if !cuts.is_empty() {
                m.cuts = cuts.clone();
            }
        }
        Command::Fluxmap { flux_axis, .. } if flux_axis.is_some() => m.flux_axis = *flux_axis,
        _ => {}
    }
    m.validate().map_err(Failure::Input)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = m.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Gain(_) => run_gain(&m),
        Command::PowerMap { .. } => run_power_map(&m),
        Command::Fluxmap { .. } => run_fluxmap(&m),
        Command::Oracle(_) => run_oracle_dump(&m),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(msg) | Failure::Solver(msg)) = &f;
            eprintln!("snailhb: {msg}");
            ExitCode::from(f.code())
        }
    }
}
