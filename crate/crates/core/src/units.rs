//! Engineering-notation numbers (`250f`, `2.19u`, `0.076p`).

/// Exponent for a SPICE-style scale suffix, case-insensitive.
fn suffix_exponent(suffix: &str) -> Option<i32> {
    let s = suffix.to_ascii_lowercase();
    Some(match s.as_str() {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "meg" => 6,
        "g" => 9,
        "t" => 12,
        _ => return None,
    })
}

/// Parses a number with an optional engineering suffix.
///
/// The mantissa and the suffix exponent are joined textually before a single
/// `f64` parse, so `250f` yields the correctly rounded value of `250e-15`.
pub fn parse_value(token: &str) -> Option<f64> {
    let split = token
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic()
                && !((c == 'e' || c == 'E')
                    && token[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let (mantissa, suffix) = token.split_at(split);
    if mantissa.is_empty() {
        return None;
    }
    let exp = suffix_exponent(suffix)?;
    let v: f64 = if exp == 0 {
        mantissa.parse().ok()?
    } else if mantissa.contains(['e', 'E']) {
        mantissa.parse::<f64>().ok()? * 10f64.powi(exp)
    } else {
        format!("{mantissa}e{exp}").parse().ok()?
    };
    v.is_finite().then_some(v)
}

/// Formats a value so that [`parse_value`] reads back the identical `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_value("250f"), Some(250e-15));
        assert_eq!(parse_value("2.19u"), Some(2.19e-6));
        assert_eq!(parse_value("0.076p"), Some(0.076e-12));
        assert_eq!(parse_value("20n"), Some(20e-9));
        assert_eq!(parse_value("70F"), Some(70e-15));
        assert_eq!(parse_value("1m"), Some(1e-3));
        assert_eq!(parse_value("3meg"), Some(3e6));
        assert_eq!(parse_value("50"), Some(50.0));
        assert_eq!(parse_value("-0.99"), Some(-0.99));
        assert_eq!(parse_value("1.5e-3"), Some(1.5e-3));
        assert_eq!(parse_value("1e3p"), Some(1e3 * 1e-12));
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(parse_value(""), None);
        assert_eq!(parse_value("f"), None);
        assert_eq!(parse_value("12x"), None);
        assert_eq!(parse_value("1..2"), None);
        assert_eq!(parse_value("nan"), None);
    }

    #[test]
    fn format_round_trips() {
        for v in [250e-15, 2.19e-6, 3.627e-12, 0.9947299, 1.0, -0.5, 1e-300] {
            assert_eq!(parse_value(&format_value(v)), Some(v));
        }
    }
}
