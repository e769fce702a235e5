mod common;

use proptest::prelude::*;
use snailhb::netlist::{build_twpa, flux_current_for, flux_ratio_for, parse_netlist, TwpaDesign};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emit_then_parse_is_identity(seed in any::<u64>()) {
        let n = common::random_netlist(seed);
        let back = parse_netlist(&n.emit()).unwrap();
        prop_assert_eq!(back, n);
    }

    #[test]
    fn flux_calibration_is_linear_and_invertible(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let d = TwpaDesign::table1();
        let (ia, ib) = (flux_current_for(&d, a).unwrap(), flux_current_for(&d, b).unwrap());
        let sum = flux_current_for(&d, a + b).unwrap();
        prop_assert!((sum - ia - ib).abs() <= 1e-12 * (ia.abs() + ib.abs()).max(1e-12));
        let back = flux_ratio_for(&d, ia).unwrap();
        prop_assert!((back - a).abs() <= 1e-12 * a.abs().max(1e-12));
    }

    #[test]
    fn built_devices_round_trip(cells in 1usize..12, k in -1.0f64..1.0, alt in any::<bool>()) {
        let d = TwpaDesign { coupling_k: k, alternate_polarity: alt, ..TwpaDesign::table1().with_cells(cells) };
        let n = build_twpa(&d).unwrap();
        prop_assert_eq!(parse_netlist(&n.emit()).unwrap(), n);
    }
}
