use super::{Component, ComponentKind, Netlist};
use crate::error::{Error, Result};
use crate::units::parse_value;

/// Parses the netlist text format described in the [module docs](super).
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut components = Vec::new();
    let mut lines = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let component = parse_line(content).map_err(|reason| Error::Syntax {
            line: line_no,
            reason,
        })?;
        components.push(component);
        lines.push(line_no);
    }
    if components.is_empty() {
        return Err(Error::Semantic {
            line: last_line.max(1),
            reason: "empty netlist: no components and no port".into(),
        });
    }
    Netlist::with_lines(components, &lines)
}

fn value(token: &str, what: &str) -> std::result::Result<f64, String> {
    parse_value(token).ok_or_else(|| format!("cannot parse {what} '{token}'"))
}

/// Splits `key=value`, matching the key case-insensitively.
fn keyed<'a>(token: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = token.split_once('=')?;
    k.eq_ignore_ascii_case(key).then_some(v)
}

fn parse_line(content: &str) -> std::result::Result<Component, String> {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    let name = tokens[0];
    let kind = match name.chars().next().map(|c| c.to_ascii_uppercase()) {
        Some('C') => ComponentKind::Capacitor,
        Some('L') => ComponentKind::Inductor,
        Some('K') => ComponentKind::MutualCoupling,
        Some('B') => ComponentKind::JosephsonJunction,
        Some('P') => ComponentKind::Port,
        _ => return Err(format!("unknown component type '{name}'")),
    };
    let expect = |n: usize, form: &str| {
        if tokens.len() == n {
            Ok(())
        } else {
            Err(format!("expected `{form}`, found {} fields", tokens.len()))
        }
    };
    let (a, b) = match tokens.get(1..3) {
        Some([a, b]) => (*a, *b),
        _ => return Err(format!("{name}: expected two node names")),
    };
    match kind {
        ComponentKind::Capacitor => {
            if !(tokens.len() == 4 || tokens.len() == 5) {
                return Err(format!("expected `{name} n1 n2 value [tan=x]`, found {} fields", tokens.len()));
            }
            let c = value(tokens[3], "capacitance")?;
            let tan = match tokens.get(4) {
                None => 0.0,
                Some(t) => {
                    let v = keyed(t, "tan").ok_or_else(|| format!("unexpected option '{t}', expected tan=<x>"))?;
                    value(v, "loss tangent")?
                }
            };
            Ok(Component::lossy_capacitor(name, a, b, c, tan))
        }
        ComponentKind::Inductor => {
            expect(4, "L<name> n1 n2 value")?;
            Ok(Component::inductor(name, a, b, value(tokens[3], "inductance")?))
        }
        ComponentKind::MutualCoupling => {
            expect(4, "K<name> L<a> L<b> k")?;
            Ok(Component::mutual(name, a, b, value(tokens[3], "coupling coefficient")?))
        }
        ComponentKind::JosephsonJunction => {
            expect(4, "B<name> n1 n2 Ic=value")?;
            let v = keyed(tokens[3], "ic").ok_or_else(|| format!("expected Ic=<value>, found '{}'", tokens[3]))?;
            Ok(Component::junction(name, a, b, value(v, "critical current")?))
        }
        ComponentKind::Port => {
            expect(5, "P<name> n1 n2 R=value port=n")?;
            let (mut r, mut number) = (None, None);
            for t in &tokens[3..] {
                if let Some(v) = keyed(t, "r") {
                    r = Some(value(v, "port resistance")?);
                } else if let Some(v) = keyed(t, "port") {
                    number = Some(v.parse::<u32>().map_err(|_| format!("cannot parse port number '{v}'"))?);
                } else {
                    return Err(format!("unexpected option '{t}'"));
                }
            }
            match (r, number) {
                (Some(r), Some(n)) => Ok(Component::port(name, a, b, r, n)),
                (None, _) => Err("port needs R=<value>".into()),
                (_, None) => Err("port needs port=<number>".into()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacitor_line() {
        let n = parse_netlist("C1 1 0 250f\nP1 1 0 R=50 port=1\n").unwrap();
        let c = &n.components()[0];
        assert_eq!(c.kind, ComponentKind::Capacitor);
        assert_eq!(c.nodes, ["1".to_string(), "0".to_string()]);
        assert_eq!(c.value, 250e-15);
        assert_eq!(c.loss_tangent, 0.0);
    }

    #[test]
    fn options_and_comments() {
        let text = "# header\nC1 1 0 250f tan=2.1e-3 # lossy\nB1 1 2 Ic=2.19u\nL1 2 0 1n\nP1 1 0 port=1 R=50\n";
        let n = parse_netlist(text).unwrap();
        assert_eq!(n.components().len(), 4);
        assert_eq!(n.components()[0].loss_tangent, 2.1e-3);
        assert_eq!(n.components()[1].value, 2.19e-6);
        assert_eq!(n.port(1).unwrap().value, 50.0);
    }

    #[test]
    fn empty_text() {
        assert!(matches!(parse_netlist(""), Err(Error::Semantic { line: 1, .. })));
        assert!(matches!(parse_netlist("# only\n\n"), Err(Error::Semantic { line: 2, .. })));
    }

    #[test]
    fn dangling_mutual_names_both() {
        let text = "P1 1 0 R=50 port=1\nL1 1 0 1n\nL2 1 0 1n\nK1 L1 L2 -0.99\nK2 L2 L9 0.5\n";
        let err = parse_netlist(text).unwrap_err();
        match err {
            Error::Semantic { line, reason } => {
                assert_eq!(line, 5);
                assert!(reason.contains("K2") && reason.contains("L9"), "{reason}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let cases = [
            ("P1 1 0 R=50 port=1\nX1 1 0 5\n", 2),
            ("P1 1 0 R=50 port=1\nC1 1 0\n", 2),
            ("P1 1 0 R=50 port=1\nC1 1 0 5q\n", 2),
            ("C1 1 0 5p foo=1\n", 1),
            ("B1 1 0 2u\n", 1),
            ("P1 1 0 R=50\n", 1),
            ("P1 1 0 R=50 port=x\n", 1),
            ("\n\nL1 1\n", 3),
        ];
        for (text, line) in cases {
            match parse_netlist(text) {
                Err(Error::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_errors_carry_lines() {
        let cases = [
            ("P1 1 0 R=50 port=1\nC1 1 0 1p\nC1 1 0 2p\n", 3),
            ("C1 1 2 1p\nC2 2 1 1p\n", 2),
            ("P1 1 0 R=50 port=1\nL1 1 0 0\n", 2),
            ("C1 1 0 1p\n", 1),
            ("P1 1 0 R=50 port=1\n\nK1 L1 L2 0.5\n", 3),
        ];
        for (text, line) in cases {
            match parse_netlist(text) {
                Err(Error::Semantic { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
