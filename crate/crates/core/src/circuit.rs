//! Netlist compiled into solver-ready element lists.
//!
//! All solvers work in node-flux coordinates: the unknown at each node is the
//! time integral of its voltage (Wb). In these coordinates an inductor is a
//! frequency-independent conductance `1/L`, a capacitor contributes `-ω²C`,
//! a resistor `jω/R`, and a junction carries the memoryless current
//! `I_c·sin(2π·ΔΦ/Φ₀)`.
//!
//! Nodes are renumbered for a narrow band; every index stored here is a
//! *position* in that ordering.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::band_ordering;
use crate::netlist::{ComponentKind, Netlist, GROUND};
use crate::REDUCED_FLUX_QUANTUM;

pub type Node = Option<usize>;


#[derive(Debug, Clone)]
pub struct Capacitor {
    pub a: Node,
    pub b: Node,
    pub c: f64,
    pub tan_delta: f64,
}

/// Mutually coupled inductors and their inverse inductance matrix.
#[derive(Debug, Clone)]
pub struct InductorGroup {
    pub branches: Vec<(Node, Node)>,
    pub inverse: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Junction {
    pub a: Node,
    pub b: Node,
    pub i_c: f64,
}

impl Junction {
    /// Small-signal inductance `Φ₀/(2π·I_c)` at zero phase.
    pub fn inductance(&self) -> f64 {
        REDUCED_FLUX_QUANTUM / self.i_c
    }
}

#[derive(Debug, Clone)]
pub struct PortRef {
    pub number: u32,
    pub a: Node,
    pub b: Node,
    pub r: f64,
}

/// Merged linear admittance entry: `y(ω) = k − ω²·c + j·(ω|ω|·c_loss + ω·g)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stamp {
    pub row: usize,
    pub col: usize,
    pub k: f64,
    pub c: f64,
    pub c_loss: f64,
    pub g: f64,
}

impl Stamp {
    #[inline]
    pub fn at(&self, omega: f64) -> Complex64 {
        Complex64::new(
            self.k - omega * omega * self.c,
            omega * omega.abs() * self.c_loss + omega * self.g,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Circuit {
    /// Number of non-ground nodes.
    pub n: usize,
    /// `position[netlist_node]`.
    pub position: Vec<usize>,
    /// Half-bandwidth in nodes.
    pub node_bandwidth: usize,
    pub capacitors: Vec<Capacitor>,
    pub inductors: Vec<InductorGroup>,
    pub junctions: Vec<Junction>,
    pub ports: Vec<PortRef>,
    pub stamps: Vec<Stamp>,
    /// One node per DC-floating subcircuit; pinned to zero flux at DC.
    pub dc_anchors: Vec<(usize, f64)>,
}

fn pair_edges(a: Node, b: Node, edges: &mut Vec<(usize, usize)>) {
    if let (Some(a), Some(b)) = (a, b) {
        edges.push((a, b));
    }
}

impl Circuit {
    pub fn compile(netlist: &Netlist) -> Result<Self> {
        let n = netlist.node_count();
        let raw = |name: &str| -> Node {
            if name == GROUND {
                None
            } else {
                netlist.node(name)
            }
        };

        let comps = netlist.components();
        let mut name_to_inductor = BTreeMap::new();
        let mut inductor_list = Vec::new();
        for c in comps.iter().filter(|c| c.kind == ComponentKind::Inductor) {
            name_to_inductor.insert(c.name.as_str(), inductor_list.len());
            inductor_list.push(c);
        }
        // group inductors by coupling
        let mut group_of: Vec<usize> = (0..inductor_list.len()).collect();
        fn root(g: &mut [usize], mut x: usize) -> usize {
            while g[x] != x {
                g[x] = g[g[x]];
                x = g[x];
            }
            x
        }
        let mut couplings = Vec::new();
        for c in comps.iter().filter(|c| c.kind == ComponentKind::MutualCoupling) {
            let (i, j) = (name_to_inductor[c.nodes[0].as_str()], name_to_inductor[c.nodes[1].as_str()]);
            couplings.push((i, j, c.value));
            let (ri, rj) = (root(&mut group_of, i), root(&mut group_of, j));
            group_of[ri.max(rj)] = ri.min(rj);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..inductor_list.len() {
            let r = root(&mut group_of, i);
            groups.entry(r).or_default().push(i);
        }

        let mut inverses = Vec::new();
        for members in groups.values() {
            let m = members.len();
            let mut l = vec![vec![0.0; m]; m];
            for (x, &i) in members.iter().enumerate() {
                l[x][x] = inductor_list[i].value;
            }
            for &(i, j, k) in &couplings {
                if let (Some(x), Some(y)) = (
                    members.iter().position(|&v| v == i),
                    members.iter().position(|&v| v == j),
                ) {
                    let mutual = k * (l[x][x] * l[y][y]).sqrt();
                    l[x][y] += mutual;
                    l[y][x] += mutual;
                }
            }
            let inverse = invert_spd(&l).ok_or_else(|| {
                let names: Vec<&str> = members.iter().map(|&i| inductor_list[i].name.as_str()).collect();
                Error::SingularSystem(format!(
                    "inductance matrix of coupled group {names:?} is not positive definite"
                ))
            })?;
            inverses.push(inverse);
        }

        // ordering from the connectivity pattern
        let mut edges = Vec::new();
        for c in comps.iter().filter(|c| c.kind != ComponentKind::MutualCoupling) {
            pair_edges(raw(&c.nodes[0]), raw(&c.nodes[1]), &mut edges);
        }
        for members in groups.values().filter(|m| m.len() > 1) {
            let nodes: Vec<usize> = members
                .iter()
                .flat_map(|&i| inductor_list[i].nodes.iter().filter_map(|s| raw(s)))
                .collect();
            for (x, &p) in nodes.iter().enumerate() {
                for &q in &nodes[x + 1..] {
                    edges.push((p, q));
                }
            }
        }
        let order = band_ordering(n, &edges);
        let mut position = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let node = |name: &str| raw(name).map(|i| position[i]);
        let node_bandwidth = edges
            .iter()
            .map(|&(a, b)| position[a].abs_diff(position[b]))
            .max()
            .unwrap_or(0);

        let mut capacitors = Vec::new();
        let mut junctions = Vec::new();
        let mut ports = Vec::new();
        for c in comps {
            let (a, b) = (node(&c.nodes[0]), node(&c.nodes[1]));
            match c.kind {
                ComponentKind::Capacitor => capacitors.push(Capacitor {
                    a,
                    b,
                    c: c.value,
                    tan_delta: c.loss_tangent,
                }),
                ComponentKind::JosephsonJunction => junctions.push(Junction { a, b, i_c: c.value }),
                ComponentKind::Port => ports.push(PortRef {
                    number: c.port_number.unwrap_or(0),
                    a,
                    b,
                    r: c.value,
                }),
                _ => {}
            }
        }
        ports.sort_by_key(|p| p.number);

        let mut inductors = Vec::new();
        for (members, inverse) in groups.values().zip(inverses) {
            let branches = members
                .iter()
                .map(|&i| (node(&inductor_list[i].nodes[0]), node(&inductor_list[i].nodes[1])))
                .collect();
            inductors.push(InductorGroup { branches, inverse });
        }
        let mut circuit = Self {
            n,
            position,
            node_bandwidth,
            capacitors,
            inductors,
            junctions,
            ports,
            stamps: Vec::new(),
            dc_anchors: Vec::new(),
        };
        circuit.stamps = circuit.merge_stamps();
        circuit.dc_anchors = circuit.find_dc_anchors();
        Ok(circuit)
    }

    pub fn port(&self, number: u32) -> Option<&PortRef> {
        self.ports.iter().find(|p| p.number == number)
    }

    fn merge_stamps(&self) -> Vec<Stamp> {
        let mut map: BTreeMap<(usize, usize), Stamp> = BTreeMap::new();
        let mut put = |a: Node, b: Node, f: &dyn Fn(&mut Stamp, f64)| {
            for (r, c, s) in [(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)] {
                if let (Some(r), Some(c)) = (r, c) {
                    let e = map.entry((r, c)).or_insert(Stamp { row: r, col: c, ..Default::default() });
                    f(e, s);
                }
            }
        };
        for cap in &self.capacitors {
            let (c, loss) = (cap.c, cap.c * cap.tan_delta);
            put(cap.a, cap.b, &|e, s| {
                e.c += s * c;
                e.c_loss += s * loss;
            });
        }
        for p in &self.ports {
            let g = 1.0 / p.r;
            put(p.a, p.b, &|e, s| e.g += s * g);
        }
        for group in &self.inductors {
            for (x, &(ax, bx)) in group.branches.iter().enumerate() {
                for (y, &(ay, by)) in group.branches.iter().enumerate() {
                    let gamma = group.inverse[x][y];
                    for (r, sr) in [(ax, 1.0), (bx, -1.0)] {
                        for (c, sc) in [(ay, 1.0), (by, -1.0)] {
                            if let (Some(r), Some(c)) = (r, c) {
                                let e = map.entry((r, c)).or_insert(Stamp { row: r, col: c, ..Default::default() });
                                e.k += sr * sc * gamma;
                            }
                        }
                    }
                }
            }
        }
        map.into_values().collect()
    }

    /// Groups nodes by inductive (DC-conducting) paths. Each group without a
    /// path to ground gets one anchor node with a conductance comparable to
    /// its inductive stiffness. At a steady state with no DC injection into
    /// such a group the anchor carries no current, so the pin only removes
    /// the flux gauge freedom.
    fn find_dc_anchors(&self) -> Vec<(usize, f64)> {
        let mut stiffness = vec![0.0f64; self.n];
        for s in &self.stamps {
            if s.row == s.col {
                stiffness[s.row] = stiffness[s.row].max(s.k.abs());
            }
        }
        for j in &self.junctions {
            let g = 1.0 / j.inductance();
            for v in [j.a, j.b].into_iter().flatten() {
                stiffness[v] = stiffness[v].max(g);
            }
        }
        let mut anchors: Vec<(usize, f64)> = self
            .dc_anchor_of()
            .into_iter()
            .enumerate()
            .filter_map(|(v, a)| (a == Some(v)).then(|| (v, if stiffness[v] > 0.0 { stiffness[v] } else { 1.0 })))
            .collect();
        anchors.sort_by_key(|a| a.0);
        anchors
    }

    /// For every node, the anchor of its DC-floating group: the lowest node
    /// index reachable through inductive branches, or `None` when the group
    /// reaches ground.
    pub fn dc_anchor_of(&self) -> Vec<Option<usize>> {
        let ground = self.n;
        let mut parent: Vec<usize> = (0..=self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut join = |a: Node, b: Node| {
            let (a, b) = (a.unwrap_or(ground), b.unwrap_or(ground));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        for j in &self.junctions {
            join(j.a, j.b);
        }
        for g in &self.inductors {
            for &(a, b) in &g.branches {
                join(a, b);
            }
        }
        let ground_root = find(&mut parent, ground);
        // the union keeps the smallest index as root
        (0..self.n)
            .map(|v| {
                let r = find(&mut parent, v);
                (r != ground_root).then_some(r)
            })
            .collect()
    }

    /// Half-bandwidth in scalar unknowns for `block` unknowns per node.
    pub fn scalar_bandwidth(&self, block: usize) -> usize {
        (self.node_bandwidth + 1) * block - 1
    }
}

/// Inverse of a small symmetric positive-definite matrix via Cholesky.
fn invert_spd(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 1e-14 * a[i][i].abs()) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (rhs - s) / l[i][i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * inv[k][col]).sum();
            inv[i][col] = (y[i] - s) / l[i][i];
        }
    }
    Some(inv)
}

/// Difference of a node quantity across a branch, with ground as zero.
#[inline]
pub fn across<T: Copy + std::ops::Sub<Output = T> + Default>(x: &[T], a: Node, b: Node) -> T {
    let va = a.map(|i| x[i]).unwrap_or_default();
    let vb = b.map(|i| x[i]).unwrap_or_default();
    va - vb
}
