//! Circuit description: components, a line-oriented text format and the
//! amplifier builder.
//!
//! # Text format
//!
//! One component per line; the leading letter of the name selects the kind.
//!
//! ```text
//! C<name> <n1> <n2> <value> [tan=<loss tangent>]
//! L<name> <n1> <n2> <value>
//! B<name> <n1> <n2> Ic=<critical current>
//! K<name> <inductor a> <inductor b> <coupling k>
//! P<name> <n1> <n2> R=<ohms> port=<number>
//! # comment
//! ```
//!
//! Values accept the scale suffixes `f p n u m` (and `k meg g t`). Node `0`
//! is ground. Anything after `#` is ignored.

mod build;
mod parse;

pub use build::{build_twpa, nodes, flux_current_for, flux_ratio_for, CjPlacement, LgPlacement, TwpaDesign};
pub use parse::parse_netlist;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::units::format_value;

pub const GROUND: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Capacitor,
    Inductor,
    MutualCoupling,
    JosephsonJunction,
    Port,
}

impl ComponentKind {
    pub fn prefix(self) -> char {
        match self {
            ComponentKind::Capacitor => 'C',
            ComponentKind::Inductor => 'L',
            ComponentKind::MutualCoupling => 'K',
            ComponentKind::JosephsonJunction => 'B',
            ComponentKind::Port => 'P',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub kind: ComponentKind,
    pub name: String,
    /// Two node names, or two inductor names for a mutual coupling.
    pub nodes: [String; 2],
    /// F, H, A (junction critical current), Ω (port) or the coupling k.
    pub value: f64,
    pub loss_tangent: f64,
    pub port_number: Option<u32>,
}

impl Component {
    fn new(kind: ComponentKind, name: impl Into<String>, a: impl Into<String>, b: impl Into<String>, value: f64) -> Self {
        Self {
            kind,
            name: name.into(),
            nodes: [a.into(), b.into()],
            value,
            loss_tangent: 0.0,
            port_number: None,
        }
    }

    pub fn capacitor(name: impl Into<String>, a: impl Into<String>, b: impl Into<String>, c: f64) -> Self {
        Self::new(ComponentKind::Capacitor, name, a, b, c)
    }

    pub fn lossy_capacitor(
        name: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        c: f64,
        tan_delta: f64,
    ) -> Self {
        Self {
            loss_tangent: tan_delta,
            ..Self::capacitor(name, a, b, c)
        }
    }

    pub fn inductor(name: impl Into<String>, a: impl Into<String>, b: impl Into<String>, l: f64) -> Self {
        Self::new(ComponentKind::Inductor, name, a, b, l)
    }

    pub fn junction(name: impl Into<String>, a: impl Into<String>, b: impl Into<String>, i_c: f64) -> Self {
        Self::new(ComponentKind::JosephsonJunction, name, a, b, i_c)
    }

    pub fn mutual(name: impl Into<String>, la: impl Into<String>, lb: impl Into<String>, k: f64) -> Self {
        Self::new(ComponentKind::MutualCoupling, name, la, lb, k)
    }

    pub fn port(name: impl Into<String>, a: impl Into<String>, b: impl Into<String>, r: f64, number: u32) -> Self {
        Self {
            port_number: Some(number),
            ..Self::new(ComponentKind::Port, name, a, b, r)
        }
    }

    /// Serialized form, one line without trailing newline.
    pub fn to_line(&self) -> String {
        let [a, b] = &self.nodes;
        let v = format_value(self.value);
        match self.kind {
            ComponentKind::Capacitor if self.loss_tangent != 0.0 => {
                format!("{} {a} {b} {v} tan={}", self.name, format_value(self.loss_tangent))
            }
            ComponentKind::Capacitor | ComponentKind::Inductor | ComponentKind::MutualCoupling => {
                format!("{} {a} {b} {v}", self.name)
            }
            ComponentKind::JosephsonJunction => format!("{} {a} {b} Ic={v}", self.name),
            ComponentKind::Port => format!(
                "{} {a} {b} R={v} port={}",
                self.name,
                self.port_number.unwrap_or(0)
            ),
        }
    }
}

/// A validated circuit. Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<Component>", into = "Vec<Component>")]
pub struct Netlist {
    components: Vec<Component>,
    /// Non-ground node names in order of first appearance.
    node_names: Vec<String>,
    node_index: HashMap<String, usize>,
    /// Component indices of the ports, ordered by port number.
    ports: Vec<usize>,
}

impl Netlist {
    /// Validates `components`. Errors carry the 1-based component position
    /// as the line number, which matches the line in [`Netlist::emit`].
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let lines: Vec<usize> = (1..=components.len()).collect();
        Self::with_lines(components, &lines)
    }

    pub(crate) fn with_lines(components: Vec<Component>, lines: &[usize]) -> Result<Self> {
        let end_line = lines.last().copied().unwrap_or(1);
        let sem = |line: usize, reason: String| Error::Semantic { line, reason };
        if components.is_empty() {
            return Err(sem(end_line, "empty netlist: no components and no port".into()));
        }

        let mut by_name: HashMap<&str, usize> = HashMap::new();
        for (i, c) in components.iter().enumerate() {
            let line = lines[i];
            if c.name.is_empty() || c.nodes.iter().any(|n| n.is_empty()) {
                return Err(sem(line, format!("component '{}' has an empty identifier", c.name)));
            }
            if by_name.insert(c.name.as_str(), i).is_some() {
                return Err(sem(line, format!("duplicate component name '{}'", c.name)));
            }
            if !c.value.is_finite() {
                return Err(sem(line, format!("{}: value is not finite", c.name)));
            }
            match c.kind {
                ComponentKind::MutualCoupling => {
                    if c.value.abs() > 1.0 {
                        return Err(sem(line, format!("{}: |k| = {} exceeds 1", c.name, c.value.abs())));
                    }
                }
                _ if c.value <= 0.0 => {
                    return Err(sem(line, format!("{}: value must be positive, got {}", c.name, c.value)));
                }
                _ => {}
            }
            if !(c.loss_tangent.is_finite() && c.loss_tangent >= 0.0) {
                return Err(sem(line, format!("{}: loss tangent must be >= 0", c.name)));
            }
            if c.kind == ComponentKind::Port && c.port_number.is_none() {
                return Err(sem(line, format!("{}: port number missing", c.name)));
            }
        }

        for (i, c) in components.iter().enumerate() {
            if c.kind != ComponentKind::MutualCoupling {
                continue;
            }
            for target in &c.nodes {
                let ok = by_name
                    .get(target.as_str())
                    .is_some_and(|&j| components[j].kind == ComponentKind::Inductor);
                if !ok {
                    return Err(sem(
                        lines[i],
                        format!("{} references undefined inductor {}", c.name, target),
                    ));
                }
            }
            if c.nodes[0] == c.nodes[1] {
                return Err(sem(lines[i], format!("{} couples {} to itself", c.name, c.nodes[0])));
            }
        }

        let mut node_names = Vec::new();
        let mut node_index = HashMap::new();
        for c in components.iter().filter(|c| c.kind != ComponentKind::MutualCoupling) {
            for n in &c.nodes {
                if n != GROUND && !node_index.contains_key(n) {
                    node_index.insert(n.clone(), node_names.len());
                    node_names.push(n.clone());
                }
            }
        }

        // connectivity: every node must reach ground through some element
        let mut uf = UnionFind::new(node_names.len() + 1);
        let idx = |n: &str| if n == GROUND { 0 } else { node_index[n] + 1 };
        let mut touches_ground = false;
        for c in components.iter().filter(|c| c.kind != ComponentKind::MutualCoupling) {
            let (a, b) = (idx(&c.nodes[0]), idx(&c.nodes[1]));
            touches_ground |= a == 0 || b == 0;
            uf.union(a, b);
        }
        if !touches_ground {
            return Err(sem(end_line, "missing ground: no component connects to node 0".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.kind == ComponentKind::MutualCoupling {
                continue;
            }
            for n in &c.nodes {
                if uf.find(idx(n)) != uf.find(0) {
                    return Err(sem(lines[i], format!("node {n} is not connected to ground")));
                }
            }
        }

        let mut numbered: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            if let Some(p) = c.port_number.filter(|_| c.kind == ComponentKind::Port) {
                if numbered.insert(p, i).is_some() {
                    return Err(sem(lines[i], format!("duplicate port number {p}")));
                }
            }
        }
        if numbered.is_empty() {
            return Err(sem(end_line, "netlist has no port".into()));
        }

        Ok(Self {
            components,
            node_names,
            node_index,
            ports: numbered.into_values().collect(),
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    /// Dense index of a node; `None` for ground or unknown names.
    pub fn node(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    /// Port components ordered by port number.
    pub fn ports(&self) -> impl Iterator<Item = &Component> {
        self.ports.iter().map(|&i| &self.components[i])
    }

    pub fn port(&self, number: u32) -> Option<&Component> {
        self.ports().find(|c| c.port_number == Some(number))
    }

    pub fn count(&self, kind: ComponentKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }

    /// Text form accepted by [`parse_netlist`].
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            let _ = writeln!(out, "{}", c.to_line());
        }
        out
    }
}

impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

impl TryFrom<Vec<Component>> for Netlist {
    type Error = Error;

    fn try_from(components: Vec<Component>) -> Result<Self> {
        Netlist::new(components)
    }
}

impl From<Netlist> for Vec<Component> {
    fn from(n: Netlist) -> Self {
        n.components
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn through() -> Vec<Component> {
        vec![
            Component::port("P1", "1", "0", 50.0, 1),
            Component::port("P2", "1", "0", 50.0, 2),
        ]
    }

    #[test]
    fn ports_sorted_by_number() {
        let mut c = through();
        c.swap(0, 1);
        let n = Netlist::new(c).unwrap();
        let names: Vec<_> = n.ports().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["P1", "P2"]);
    }

    #[test]
    fn floating_node_rejected() {
        let mut c = through();
        c.push(Component::capacitor("C1", "5", "6", 1e-15));
        let err = Netlist::new(c).unwrap_err();
        assert_eq!(
            err,
            Error::Semantic {
                line: 3,
                reason: "node 5 is not connected to ground".into()
            }
        );
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = through();
        c.push(Component::inductor("L1", "1", "0", -1e-9));
        assert!(matches!(Netlist::new(c).unwrap_err(), Error::Semantic { line: 3, .. }));
        let mut c = through();
        c.push(Component::inductor("L1", "1", "0", 1e-9));
        c.push(Component::inductor("L2", "1", "0", 1e-9));
        c.push(Component::mutual("K1", "L1", "L2", 1.5));
        assert!(matches!(Netlist::new(c).unwrap_err(), Error::Semantic { line: 5, .. }));
    }

    #[test]
    fn duplicate_port_number() {
        let c = vec![
            Component::port("P1", "1", "0", 50.0, 1),
            Component::port("P2", "1", "0", 50.0, 1),
        ];
        assert!(matches!(Netlist::new(c).unwrap_err(), Error::Semantic { line: 2, .. }));
    }
}
