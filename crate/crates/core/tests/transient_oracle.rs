use num_complex::Complex64;
use snailhb::hb::linear_ac;
use snailhb::netlist::{build_twpa, nodes, TwpaDesign};
use snailhb::tdoracle::{transient, ToneSource, TransientConfig};

#[test]
fn halving_the_step_converges_the_harmonics() {
    let n = build_twpa(&TwpaDesign::table1().with_cells(3)).unwrap();
    let fp = 4e9;
    let out = nodes::chain(3);
    let run = |steps: f64| {
        let mut cfg = TransientConfig::new(200.0 / fp, 1.0 / (fp * steps));
        cfg.sources.push(ToneSource::new(1, 1.02e-6, fp));
        cfg.record_nodes = vec![out.clone()];
        transient(&n, &cfg).unwrap().spectrum(&out, fp, 3).unwrap()
    };
    let (coarse, fine) = (run(400.0), run(800.0));
    for h in [1, 3] {
        let rel = (coarse[h] - fine[h]).norm() / fine[h].norm();
        assert!(rel < 1e-3, "harmonic {h}: {rel:e}");
    }
}

#[test]
fn lossy_line_transmission_matches_ac_analysis() {
    // 20 cells is the largest device the oracle accepts by default
    let n = build_twpa(&TwpaDesign::table1().with_cells(20)).unwrap();
    let f = 4e9;
    let drive = 1e-9;
    let out = nodes::chain(20);
    let mut cfg = TransientConfig::new(200.0 / f, 1.0 / (f * 200.0));
    cfg.sources.push(ToneSource::new(1, drive, f));
    cfg.record_nodes = vec![out.clone()];
    let x = transient(&n, &cfg).unwrap().spectrum(&out, f, 1).unwrap()[1];
    let s21_td = Complex64::new(0.0, std::f64::consts::TAU * f) * x / (drive * 25.0);
    let s21 = linear_ac(&n, &[f]).unwrap().get(0, 2, 1).unwrap();
    assert!(s21.norm() < 1.0);
    assert!((s21_td - s21).norm() < 1e-3 * s21.norm(), "{s21_td} vs {s21}");
}
