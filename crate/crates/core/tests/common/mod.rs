#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snailhb::netlist::{Component, Netlist};

/// Connected random netlist: a spine of nodes, random shunt and series
/// elements, couplings between inductors and one to three ports.
pub fn random_netlist(seed: u64) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.gen_range(1..12usize);
    let name = |i: usize| if i == 0 { "0".to_string() } else { format!("n{i}") };
    let mut comps = Vec::new();
    let mut inductors = Vec::new();
    let value = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.gen::<f64>());
    for i in 1..=nodes + rng.gen_range(0..nodes + 1) {
        let (a, b) = if i <= nodes {
            (name(i), name(rng.gen_range(0..i)))
        } else {
            (name(rng.gen_range(1..=nodes)), name(rng.gen_range(0..=nodes)))
        };
        let id = comps.len();
        let c = match rng.gen_range(0..4) {
            0 => Component::capacitor(format!("C{id}"), a, b, value(&mut rng, 1e-15, 1e-11)),
            1 => Component::lossy_capacitor(format!("Cl{id}"), a, b, value(&mut rng, 1e-15, 1e-11), value(&mut rng, 1e-5, 1e-2)),
            2 => {
                inductors.push(format!("L{id}"));
                Component::inductor(format!("L{id}"), a, b, value(&mut rng, 1e-15, 1e-7))
            }
            _ => Component::junction(format!("B{id}"), a, b, value(&mut rng, 1e-7, 1e-4)),
        };
        comps.push(c);
    }
    if inductors.len() >= 2 {
        for k in 0..rng.gen_range(0..inductors.len()) {
            let i = rng.gen_range(0..inductors.len());
            let j = (i + 1 + rng.gen_range(0..inductors.len() - 1)) % inductors.len();
            comps.push(Component::mutual(format!("K{k}"), &inductors[i], &inductors[j], rng.gen_range(-0.99..0.99)));
        }
    }
    for p in 1..=rng.gen_range(1..=3u32) {
        comps.push(Component::port(format!("P{p}"), name(rng.gen_range(1..=nodes)), "0", value(&mut rng, 10.0, 100.0), p));
    }
    // a random rotation moves ports and couplings away from the end of the list
    let shift = rng.gen_range(0..comps.len());
    comps.rotate_right(shift);
    Netlist::new(comps).expect("generator builds valid netlists")
}
