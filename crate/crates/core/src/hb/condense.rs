//! Static condensation for the sideband-coupled linear systems.
//!
//! Low-degree nodes away from ports (the junction arms of each cell) are
//! grouped into small interior blocks and eliminated densely; only the
//! remaining boundary nodes enter the banded factorization.

use num_complex::Complex64;

use crate::circuit::{Circuit, Node, PortRef};
use crate::error::Result;
use crate::linalg::{band_ordering, dense_solve_in_place, BandLu, BandMatrix};

use super::JunctionSpectra;

const MAX_INTERIOR_DEGREE: usize = 4;
const MAX_GROUP_NODES: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Slot {
    Boundary(usize),
    Interior { group: usize, local: usize },
}

#[derive(Debug, Clone)]
struct Group {
    interior: usize,
    /// Boundary indices adjacent to the group.
    boundary: Vec<usize>,
}

/// Node partition shared by every frequency of one circuit.
#[derive(Debug, Clone)]
pub(crate) struct Reduction {
    slots: Vec<Slot>,
    groups: Vec<Group>,
    boundary_count: usize,
    boundary_bandwidth: usize,
}

impl Reduction {
    pub fn new(circuit: &Circuit) -> Self {
        let n = circuit.n;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut link = |a: usize, b: usize| {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for s in &circuit.stamps {
            link(s.row, s.col);
        }
        for j in &circuit.junctions {
            if let (Some(a), Some(b)) = (j.a, j.b) {
                link(a, b);
            }
        }
        for v in adj.iter_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let mut candidate: Vec<bool> = adj.iter().map(|v| v.len() <= MAX_INTERIOR_DEGREE).collect();
        for p in &circuit.ports {
            for v in [p.a, p.b].into_iter().flatten() {
                candidate[v] = false;
            }
        }

        let mut group_of = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if !candidate[start] || group_of[start] != usize::MAX {
                continue;
            }
            let g = members.len();
            let mut list = vec![start];
            group_of[start] = g;
            let mut head = 0;
            while head < list.len() {
                let v = list[head];
                head += 1;
                for &w in &adj[v] {
                    if !candidate[w] || group_of[w] != usize::MAX {
                        continue;
                    }
                    if list.len() < MAX_GROUP_NODES {
                        group_of[w] = g;
                        list.push(w);
                    } else {
                        // keeps groups from touching each other
                        candidate[w] = false;
                    }
                }
            }
            members.push(list);
        }

        let boundary_nodes: Vec<usize> = (0..n).filter(|&v| group_of[v] == usize::MAX).collect();
        let mut local_b = vec![usize::MAX; n];
        for (i, &v) in boundary_nodes.iter().enumerate() {
            local_b[v] = i;
        }
        let mut edges = Vec::new();
        for &v in &boundary_nodes {
            for &w in &adj[v] {
                if local_b[w] != usize::MAX && v < w {
                    edges.push((local_b[v], local_b[w]));
                }
            }
        }
        let mut group_boundary: Vec<Vec<usize>> = Vec::with_capacity(members.len());
        for list in &members {
            let mut b: Vec<usize> = list
                .iter()
                .flat_map(|&v| adj[v].iter().copied())
                .filter(|&w| local_b[w] != usize::MAX)
                .map(|w| local_b[w])
                .collect();
            b.sort_unstable();
            b.dedup();
            for (x, &p) in b.iter().enumerate() {
                for &q in &b[x + 1..] {
                    edges.push((p, q));
                }
            }
            group_boundary.push(b);
        }
        let order = band_ordering(boundary_nodes.len(), &edges);
        let mut position = vec![0; boundary_nodes.len()];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let boundary_bandwidth = edges
            .iter()
            .map(|&(a, b)| position[a].abs_diff(position[b]))
            .max()
            .unwrap_or(0);

        let mut slots = vec![Slot::Boundary(0); n];
        for (i, &v) in boundary_nodes.iter().enumerate() {
            slots[v] = Slot::Boundary(position[i]);
        }
        let mut groups = Vec::with_capacity(members.len());
        for (g, list) in members.iter().enumerate() {
            for (local, &v) in list.iter().enumerate() {
                slots[v] = Slot::Interior { group: g, local };
            }
            groups.push(Group {
                interior: list.len(),
                boundary: group_boundary[g].iter().map(|&b| position[b]).collect(),
            });
        }
        Self {
            slots,
            groups,
            boundary_count: boundary_nodes.len(),
            boundary_bandwidth,
        }
    }

    /// Nodes left in the banded system.
    #[cfg(test)]
    pub fn boundary_count(&self) -> usize {
        self.boundary_count
    }

    fn boundary_index(&self, node: usize) -> Option<usize> {
        match self.slots[node] {
            Slot::Boundary(b) => Some(b),
            Slot::Interior { .. } => None,
        }
    }
}

/// Dense interior blocks of one group for the current frequency set.
struct GroupBlocks {
    ii: Vec<Complex64>,
    ib: Vec<Complex64>,
    bi: Vec<Complex64>,
}

/// Factored boundary system of one signal frequency.
pub(crate) struct SidebandLu<'a> {
    reduction: &'a Reduction,
    lu: BandLu<Complex64>,
    s_count: usize,
}

impl SidebandLu<'_> {
    /// Solution for a unit Norton current into `port` at sideband slot `s`.
    /// Only boundary unknowns are returned; every port node is one.
    pub fn unit_port_response(&self, port: &PortRef, s: usize) -> Vec<Complex64> {
        let mut rhs = vec![Complex64::new(0.0, 0.0); self.reduction.boundary_count * self.s_count];
        if let Some(a) = port.a.and_then(|a| self.reduction.boundary_index(a)) {
            rhs[a * self.s_count + s] += 1.0;
        }
        if let Some(b) = port.b.and_then(|b| self.reduction.boundary_index(b)) {
            rhs[b * self.s_count + s] -= 1.0;
        }
        self.lu.solve_in_place(&mut rhs);
        rhs
    }

    /// Flux across `port` at slot `s` of a boundary solution.
    pub fn port_flux(&self, x: &[Complex64], port: &PortRef, s: usize) -> Complex64 {
        let at = |node: Node| {
            node.and_then(|v| self.reduction.boundary_index(v))
                .map(|b| x[b * self.s_count + s])
                .unwrap_or_default()
        };
        at(port.a) - at(port.b)
    }
}

/// Assembles, condenses and factors the sideband-coupled admittance system.
/// Sideband slot `s` has label `labels[s]` and angular frequency
/// `omegas[s]`; junctions couple labels `k` and `l` through `G_{k-l}`.
pub(crate) fn assemble_sidebands<'a>(
    circuit: &Circuit,
    reduction: &'a Reduction,
    omegas: &[f64],
    labels: &[isize],
    spectra: &JunctionSpectra,
) -> Result<SidebandLu<'a>> {
    let sc = omegas.len();
    let bw = (reduction.boundary_bandwidth + 1) * sc - 1;
    let mut band = BandMatrix::<Complex64>::new(reduction.boundary_count * sc, bw, bw);
    let mut blocks: Vec<GroupBlocks> = reduction
        .groups
        .iter()
        .map(|g| {
            let (ni, nb) = (g.interior * sc, g.boundary.len() * sc);
            GroupBlocks {
                ii: vec![Complex64::new(0.0, 0.0); ni * ni],
                ib: vec![Complex64::new(0.0, 0.0); ni * nb],
                bi: vec![Complex64::new(0.0, 0.0); nb * ni],
            }
        })
        .collect();

    let mut put = |r: usize, s: usize, c: usize, t: usize, v: Complex64| match (reduction.slots[r], reduction.slots[c]) {
        (Slot::Boundary(br), Slot::Boundary(bc)) => band.add(br * sc + s, bc * sc + t, v),
        (Slot::Interior { group, local: lr }, Slot::Interior { local: lc, .. }) => {
            let ni = reduction.groups[group].interior * sc;
            blocks[group].ii[(lr * sc + s) * ni + lc * sc + t] += v;
        }
        (Slot::Interior { group, local }, Slot::Boundary(bc)) => {
            let g = &reduction.groups[group];
            let nb = g.boundary.len() * sc;
            let k = g.boundary.iter().position(|&b| b == bc).expect("group boundary");
            blocks[group].ib[(local * sc + s) * nb + k * sc + t] += v;
        }
        (Slot::Boundary(br), Slot::Interior { group, local }) => {
            let g = &reduction.groups[group];
            let ni = g.interior * sc;
            let k = g.boundary.iter().position(|&b| b == br).expect("group boundary");
            blocks[group].bi[(k * sc + s) * ni + local * sc + t] += v;
        }
    };

    for st in &circuit.stamps {
        for (s, &w) in omegas.iter().enumerate() {
            put(st.row, s, st.col, s, st.at(w));
        }
    }
    for &(p, g) in &circuit.dc_anchors {
        for (s, &w) in omegas.iter().enumerate() {
            if w == 0.0 {
                put(p, s, p, s, Complex64::new(g, 0.0));
            }
        }
    }
    for (j, junction) in circuit.junctions.iter().enumerate() {
        for (s, &k) in labels.iter().enumerate() {
            for (t, &l) in labels.iter().enumerate() {
                let y = spectra.get(j, k - l);
                if y == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (r, sr) in [(junction.a, 1.0), (junction.b, -1.0)] {
                    for (c, sc_) in [(junction.a, 1.0), (junction.b, -1.0)] {
                        if let (Some(r), Some(c)) = (r, c) {
                            put(r, s, c, t, y * (sr * sc_));
                        }
                    }
                }
            }
        }
    }

    for (g, blk) in reduction.groups.iter().zip(blocks.iter_mut()) {
        let (ni, nb) = (g.interior * sc, g.boundary.len() * sc);
        // X = A_II⁻¹·A_IB, then A_BB −= A_BI·X
        dense_solve_in_place(&mut blk.ii, ni, &mut blk.ib, nb)?;
        for r in 0..nb {
            let row_b = g.boundary[r / sc] * sc + r % sc;
            for c in 0..nb {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..ni {
                    acc += blk.bi[r * ni + k] * blk.ib[k * nb + c];
                }
                if acc != Complex64::new(0.0, 0.0) {
                    let col_b = g.boundary[c / sc] * sc + c % sc;
                    band.add(row_b, col_b, -acc);
                }
            }
        }
    }
    Ok(SidebandLu {
        reduction,
        lu: band.factor()?,
        s_count: sc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_twpa, TwpaDesign};

    #[test]
    fn twpa_keeps_chain_and_flux_line() {
        let n = build_twpa(&TwpaDesign::table1().with_cells(40)).unwrap();
        let c = Circuit::compile(&n).unwrap();
        let r = Reduction::new(&c);
        // at most the chain s0..s40, flux f0..f40 and the flux port remain
        assert!(r.boundary_count() <= 41 + 41 + 1, "{}", r.boundary_count());
        assert!(r.groups.len() >= 40);
        assert!(r.boundary_bandwidth <= 4, "{}", r.boundary_bandwidth);
    }
}
