use snailhb::hb::{linear_ac, solve_pump, Drive, HarmonicGrid, SolverConfig};
use snailhb::netlist::{build_twpa, Netlist, TwpaDesign};
use snailhb::smallsignal::{conversion_matrix, gain_sweep, linspace, ConversionProblem, GainSetup};

fn device(cells: usize, lossless: bool) -> Netlist {
    let mut d = TwpaDesign::table1().with_cells(cells);
    if lossless {
        d = d.lossless();
    }
    build_twpa(&d).unwrap()
}

#[test]
fn zero_pump_gives_zero_gain() {
    let n = device(30, false);
    let f = linspace(2e9, 9e9, 15);
    let r = gain_sweep(&n, HarmonicGrid::new(4e9), &Drive::pump_only(0.0), &f, SolverConfig::default()).unwrap();
    assert!(r.iter().all(|p| p.converged && p.gain_db == 0.0));
    let lin = linear_ac(&n, &r.iter().map(|p| p.f_signal).collect::<Vec<_>>()).unwrap();
    for (k, p) in r.iter().enumerate() {
        assert!((p.s21_off - lin.get(k, 2, 1).unwrap()).norm() < 1e-10);
    }
}

#[test]
fn weak_pump_gain_vanishes() {
    let n = device(700, false);
    let f = linspace(2e9, 9e9, 8);
    let r = gain_sweep(&n, HarmonicGrid::new(4e9), &Drive::pump_only(1e-9), &f, SolverConfig::default()).unwrap();
    for p in &r {
        assert!(p.gain_db.abs() < 0.01, "{} Hz: {} dB", p.f_signal, p.gain_db);
    }
}

#[test]
fn unpumped_conversion_has_no_mixing() {
    let n = device(5, false);
    let rest = solve_pump(&n, HarmonicGrid::new(4e9), &Drive::pump_only(0.0), SolverConfig::default()).unwrap();
    let cm = conversion_matrix(&n, &rest, 5.1e9).unwrap();
    for &a in &cm.ports {
        for &b in &cm.ports {
            for &k in &cm.sidebands {
                for &l in &cm.sidebands {
                    if k != l {
                        assert!(cm.get(a, k, b, l).unwrap().norm() < 1e-14);
                    }
                }
            }
        }
    }
}

#[test]
fn more_sidebands_barely_move_the_gain() {
    let n = device(700, false);
    let grid = HarmonicGrid::new(4e9);
    let pump = solve_pump(&n, grid, &Drive::pump_only(1.02e-6), SolverConfig::default()).unwrap();
    let freqs = vec![3.0e9, 3.7e9, 4.4e9, 5.2e9, 6.5e9];
    let gain = |count: usize| -> Vec<f64> {
        let mut p = ConversionProblem::new(pump.clone(), freqs.clone());
        p.sideband_count = count;
        p.solve(&n)
            .unwrap()
            .into_iter()
            .map(|m| 20.0 * m.unwrap().get(2, 0, 1, 0).unwrap().norm().log10())
            .collect()
    };
    let (four, six) = (gain(4), gain(6));
    for (a, b) in four.iter().zip(&six) {
        assert!((a - b).abs() < 0.1, "{a} dB vs {b} dB");
    }
}

#[test]
fn loss_lowers_transmission_everywhere() {
    let f = linspace(1e9, 12e9, 45);
    let lossy = linear_ac(&device(700, false), &f).unwrap();
    let ideal = linear_ac(&device(700, true), &f).unwrap();
    for k in 0..f.len() {
        let (a, b) = (lossy.get(k, 2, 1).unwrap().norm(), ideal.get(k, 2, 1).unwrap().norm());
        assert!(a < b, "{} Hz: {a} >= {b}", f[k]);
    }
}

#[test]
fn gain_is_roughly_mirrored_about_the_pump() {
    // pump-off ripple breaks exact mirror symmetry, so only the band shape is compared
    let n = device(700, true);
    let fp = 4e9;
    let setup = GainSetup::new(&n, HarmonicGrid::new(fp), &Drive::pump_only(1.02e-6), SolverConfig::default()).unwrap();
    for delta in [0.3e9, 0.9e9, 1.7e9] {
        let (up, down) = (setup.point(fp + delta), setup.point(fp - delta));
        assert!((up.gain_db - down.gain_db).abs() < 0.5, "{delta}: {} vs {}", up.gain_db, down.gain_db);
        let (a, b) = (up.idler.norm(), down.idler.norm());
        assert!((a - b).abs() < 0.05 * a.max(b), "{delta}: idler {a} vs {b}");
    }
}
