//! Single-SNAIL physics: current-phase relation, zero-current expansion
//! point and flux-dependent nonlinear coefficients.
//!
//! A SNAIL is a loop of one small junction (critical current `r·I_c`) in
//! parallel with `n_big` series junctions of critical current `I_c`. With the
//! big-junction phases shared equally the branch current is
//!
//! ```text
//! I_L(φ) = I_c · [ r·sin φ + sin((φ − φ_ext)/n_big) ]
//! ```
//!
//! and its Taylor expansion around the zero-current phase `φ*` is
//! `I_L(φ* + x) / (α̃·I_c) ≈ x − β·x² − γ·x³`.
//!
//! The external flux `φ_ext` entering these formulas is the *reduced* flux
//! in radians, `2π·Φ_ext/Φ₀`. [`FluxPoint`] keeps the normalized ratio
//! `Φ_ext/Φ₀` as its source of truth and derives the radian value from it.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::FLUX_QUANTUM;

/// Absolute tolerance on `I_L(φ*)/I_c`.
pub const ROOT_TOLERANCE: f64 = 1e-12;

const CONTINUATION_STEP: f64 = 0.25;
const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnailParams {
    /// Critical current of each big junction (A).
    pub i_c: f64,
    /// Small/big junction critical-current ratio.
    pub r: f64,
    /// Number of big junctions in series.
    pub n_big: u32,
}

impl SnailParams {
    pub fn new(i_c: f64, r: f64) -> Result<Self> {
        let p = Self { i_c, r, n_big: 3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_c.is_finite() && self.i_c > 0.0) {
            return Err(Error::InvalidParameter(format!("i_c must be > 0, got {}", self.i_c)));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidParameter(format!("r must lie in (0, 1), got {}", self.r)));
        }
        if self.n_big == 0 {
            return Err(Error::InvalidParameter("n_big must be at least 1".into()));
        }
        Ok(())
    }

    fn n(&self) -> f64 {
        self.n_big as f64
    }
}

/// External flux threading the SNAIL loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    ratio: f64,
}

impl FluxPoint {
    pub fn from_ratio(flux_ratio: f64) -> Self {
        Self { ratio: flux_ratio }
    }

    /// Normalized flux `Φ_ext/Φ₀`.
    pub fn flux_ratio(&self) -> f64 {
        self.ratio
    }

    /// Reduced flux `2π·Φ_ext/Φ₀` in radians.
    pub fn phi_ext(&self) -> f64 {
        TAU * self.ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnailExpansion {
    pub phi_star: f64,
    pub alpha_tilde: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Linear inductance `Φ₀/(2π·α̃·I_c)` in henries.
    pub l_eff: f64,
}

/// Branch current `I_L(φ)` in amperes.
pub fn branch_current(params: &SnailParams, phi: f64, flux: FluxPoint) -> f64 {
    params.i_c * normalized_current(params, phi, flux.phi_ext())
}

/// SNAIL potential energy in joules; its phase derivative times `2π/Φ₀` is
/// [`branch_current`].
pub fn potential(params: &SnailParams, phi: f64, flux: FluxPoint) -> f64 {
    let n = params.n();
    -(FLUX_QUANTUM / TAU)
        * params.i_c
        * (params.r * phi.cos() + n * ((phi - flux.phi_ext()) / n).cos())
}

fn normalized_current(p: &SnailParams, phi: f64, phi_ext: f64) -> f64 {
    p.r * phi.sin() + ((phi - phi_ext) / p.n()).sin()
}

fn normalized_slope(p: &SnailParams, phi: f64, phi_ext: f64) -> f64 {
    let n = p.n();
    p.r * phi.cos() + ((phi - phi_ext) / n).cos() / n
}

/// Half-width of a bracket around `φ_ext` on which the current changes sign.
fn bracket_half_width(p: &SnailParams) -> f64 {
    PI.min(p.n() * PI / 2.0)
}

/// Newton from `guess`, without safeguards. `None` if it stalls or wanders
/// outside the bracket around `phi_ext`.
fn newton(p: &SnailParams, phi_ext: f64, guess: f64) -> Option<f64> {
    let h = bracket_half_width(p);
    let mut phi = guess;
    for _ in 0..MAX_NEWTON {
        let f = normalized_current(p, phi, phi_ext);
        if f.abs() < ROOT_TOLERANCE * 1e-2 {
            return Some(phi);
        }
        let d = normalized_slope(p, phi, phi_ext);
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let next = phi - f / d;
        if (next - phi_ext).abs() > h {
            return None;
        }
        if next == phi {
            break;
        }
        phi = next;
    }
    (normalized_current(p, phi, phi_ext).abs() < ROOT_TOLERANCE).then_some(phi)
}

/// Safeguarded Newton on `[φ_ext − h, φ_ext + h]`.
fn bracketed(p: &SnailParams, phi_ext: f64, guess: f64) -> Result<f64> {
    let h = bracket_half_width(p);
    let (mut lo, mut hi) = (phi_ext - h, phi_ext + h);
    let (flo, fhi) = (normalized_current(p, lo, phi_ext), normalized_current(p, hi, phi_ext));
    if flo * fhi > 0.0 {
        return Err(Error::NoConvergence(format!(
            "no sign change on [{lo:.6}, {hi:.6}] for r = {}",
            p.r
        )));
    }
    let increasing = flo < 0.0;
    let mut phi = guess.clamp(lo, hi);
    for _ in 0..200 {
        let f = normalized_current(p, phi, phi_ext);
        if f.abs() < ROOT_TOLERANCE * 1e-2 {
            return Ok(phi);
        }
        if (f < 0.0) == increasing {
            lo = phi;
        } else {
            hi = phi;
        }
        let d = normalized_slope(p, phi, phi_ext);
        let newton = phi - f / d;
        phi = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * (1.0 + phi.abs()) {
            break;
        }
    }
    if normalized_current(p, phi, phi_ext).abs() < ROOT_TOLERANCE {
        Ok(phi)
    } else {
        Err(Error::NoConvergence(format!("bracketed Newton stalled at phi = {phi}")))
    }
}

/// Follows the zero-current root from `(from_ext, from_root)` to `to_ext`.
fn continue_root(p: &SnailParams, from_ext: f64, from_root: f64, to_ext: f64) -> Result<f64> {
    let span = to_ext - from_ext;
    let steps = ((span.abs() / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut root = from_root;
    let mut prev_ext = from_ext;
    for s in 1..=steps {
        let ext = if s == steps {
            to_ext
        } else {
            from_ext + span * (s as f64 / steps as f64)
        };
        // first-order predictor along the branch: dφ*/dφ_ext = (1/n)cos(..)/(n·α̃)
        let slope = normalized_slope(p, root, prev_ext);
        let pred = if slope > 0.0 {
            let c = ((root - prev_ext) / p.n()).cos() / p.n();
            root + (ext - prev_ext) * c / slope
        } else {
            root + (ext - prev_ext)
        };
        root = match newton(p, ext, pred) {
            Some(r) => r,
            None => bracketed(p, ext, pred)?,
        };
        prev_ext = ext;
    }
    Ok(root)
}

/// Zero-current phase `φ*` on the branch continuous from `φ* = 0` at zero flux.
pub fn solve_phi_star(params: &SnailParams, flux: FluxPoint) -> Result<f64> {
    params.validate()?;
    continue_root(params, 0.0, 0.0, flux.phi_ext())
}

fn expansion_at(params: &SnailParams, flux: FluxPoint, phi_star: f64) -> Result<SnailExpansion> {
    let n = params.n();
    let r = params.r;
    let theta = (phi_star - flux.phi_ext()) / n;
    let alpha_tilde = r * phi_star.cos() + theta.cos() / n;
    if !(alpha_tilde.abs() >= 1e-9) {
        return Err(Error::DegenerateExpansion {
            alpha_tilde,
            flux_ratio: flux.flux_ratio(),
        });
    }
    let beta = 0.5 * (r * phi_star.sin() + theta.sin() / (n * n)) / alpha_tilde;
    let gamma = (r * phi_star.cos() + theta.cos() / (n * n * n)) / (6.0 * alpha_tilde);
    Ok(SnailExpansion {
        phi_star,
        alpha_tilde,
        beta,
        gamma,
        l_eff: FLUX_QUANTUM / (TAU * alpha_tilde * params.i_c),
    })
}

/// Taylor data of the current-phase relation around `φ*`.
pub fn expansion(params: &SnailParams, flux: FluxPoint) -> Result<SnailExpansion> {
    let phi_star = solve_phi_star(params, flux)?;
    expansion_at(params, flux, phi_star)
}

/// One row of a flux sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxMapRow {
    pub flux_ratio: f64,
    pub expansion: SnailExpansion,
}

/// Expansion coefficients for each flux ratio, following the root branch from
/// one ratio to the next in the given order.
pub fn flux_map(params: &SnailParams, ratios: &[f64]) -> Result<Vec<FluxMapRow>> {
    params.validate()?;
    let mut rows = Vec::with_capacity(ratios.len());
    let (mut ext, mut root) = (0.0, 0.0);
    for &ratio in ratios {
        let at = |e: Error| Error::AtFlux {
            flux_ratio: ratio,
            source: Box::new(e),
        };
        if !ratio.is_finite() {
            return Err(at(Error::InvalidParameter("flux ratio is not finite".into())));
        }
        let flux = FluxPoint::from_ratio(ratio);
        root = continue_root(params, ext, root, flux.phi_ext()).map_err(at)?;
        ext = flux.phi_ext();
        rows.push(FluxMapRow {
            flux_ratio: ratio,
            expansion: expansion_at(params, flux, root).map_err(at)?,
        });
    }
    Ok(rows)
}

/// Formats `v` in positional decimal notation with `sig` significant digits.
pub fn format_significant(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { format!("{v}") };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.99.. -> 10.0..)
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    let significant = digits.trim_start_matches('0').len();
    if decimals > 0 && significant > sig {
        let d = decimals - 1;
        format!("{v:.d$}")
    } else {
        s
    }
}

pub const FLUX_MAP_HEADER: &str = "flux_ratio,phi_star,alpha_tilde,beta,gamma,l_eff_H";

/// CSV text for a flux map, 12 significant digits per value.
pub fn flux_map_csv(rows: &[FluxMapRow]) -> String {
    let mut out = String::from(FLUX_MAP_HEADER);
    out.push('\n');
    for row in rows {
        let e = &row.expansion;
        let cells = [row.flux_ratio, e.phi_star, e.alpha_tilde, e.beta, e.gamma, e.l_eff]
            .map(|v| format_significant(v, 12));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> SnailParams {
        SnailParams::new(2.19e-6, 0.07).unwrap()
    }

    /// Plain bisection on the same bracket, independent of the Newton path.
    fn bisection_root(p: &SnailParams, phi_ext: f64) -> f64 {
        let f = |x: f64| p.r * x.sin() + ((x - phi_ext) / 3.0).sin();
        let (mut lo, mut hi) = (phi_ext - PI, phi_ext + PI);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn current_examples() {
        let p = table1();
        assert_eq!(branch_current(&p, 0.0, FluxPoint::from_ratio(0.0)), 0.0);
        let i = branch_current(&p, PI / 2.0, FluxPoint::from_ratio(0.0));
        assert!((i - 2.19e-6 * 0.57).abs() < 1e-18, "{i}");
        // energy derivative oracle
        let h = 1e-5;
        let flux = FluxPoint::from_ratio(0.0);
        let du = (potential(&p, PI / 2.0 + h, flux) - potential(&p, PI / 2.0 - h, flux)) / (2.0 * h);
        assert!((du * TAU / FLUX_QUANTUM - i).abs() < 1e-14);
    }

    #[test]
    fn phi_star_zero_flux() {
        assert_eq!(solve_phi_star(&table1(), FluxPoint::from_ratio(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn phi_star_half_flux_matches_bisection() {
        let p = table1();
        let root = solve_phi_star(&p, FluxPoint::from_ratio(0.5)).unwrap();
        let oracle = bisection_root(&p, PI);
        assert!((root - oracle).abs() < 1e-12, "{root} vs {oracle}");
        assert!((root - PI).abs() < 1e-12);
        assert!(branch_current(&p, root, FluxPoint::from_ratio(0.5)).abs() < p.i_c * 1e-12);
    }

    #[test]
    fn phi_star_many_points_match_bisection() {
        let p = table1();
        for i in 0..=40 {
            let ratio = -1.0 + i as f64 * 0.05;
            let flux = FluxPoint::from_ratio(ratio);
            let root = solve_phi_star(&p, flux).unwrap();
            assert!((root - bisection_root(&p, flux.phi_ext())).abs() < 1e-11, "ratio {ratio}");
        }
    }

    #[test]
    fn zero_flux_coefficients() {
        let e = expansion(&table1(), FluxPoint::from_ratio(0.0)).unwrap();
        assert_eq!(e.beta, 0.0);
        let gamma = (0.07 + 1.0 / 27.0) / (6.0 * (0.07 + 1.0 / 3.0));
        assert!((e.gamma - gamma).abs() < 1e-12);
        assert!((e.gamma - 0.04423).abs() < 1e-5);
        assert!((e.l_eff - 373e-12).abs() < 1e-12, "{}", e.l_eff);
    }

    #[test]
    fn l_eff_matches_energy_curvature() {
        let p = table1();
        for ratio in [0.0, 0.2, 0.5] {
            let flux = FluxPoint::from_ratio(ratio);
            let e = expansion(&p, flux).unwrap();
            let h = 1e-4;
            let u = |x| potential(&p, x, flux);
            let d2 = (u(e.phi_star + h) - 2.0 * u(e.phi_star) + u(e.phi_star - h)) / (h * h);
            let l = (FLUX_QUANTUM / TAU).powi(2) / d2;
            assert!((l / e.l_eff - 1.0).abs() < 1e-6, "ratio {ratio}");
        }
    }

    #[test]
    fn periodic_in_flux_quantum() {
        let p = table1();
        let a = expansion(&p, FluxPoint::from_ratio(0.0)).unwrap();
        let b = expansion(&p, FluxPoint::from_ratio(1.0)).unwrap();
        assert!((b.phi_star - a.phi_star - TAU).abs() < 1e-9);
        assert!((a.gamma - b.gamma).abs() < 1e-9);
        assert!((a.beta - b.beta).abs() < 1e-9);
        assert!((a.alpha_tilde - b.alpha_tilde).abs() < 1e-9);
    }

    #[test]
    fn gamma_changes_sign_before_half_flux() {
        let ratios: Vec<f64> = (0..=50).map(|i| i as f64 * 0.01).collect();
        let rows = flux_map(&table1(), &ratios).unwrap();
        assert!((rows[0].expansion.gamma - 0.044226).abs() < 1e-5);
        for w in rows.windows(2) {
            assert!(w[1].expansion.gamma < w[0].expansion.gamma);
        }
        assert!(rows.last().unwrap().expansion.gamma < 0.0);
    }

    #[test]
    fn flux_map_reports_offending_ratio() {
        let err = flux_map(&table1(), &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::AtFlux { .. }));
    }

    #[test]
    fn invalid_params() {
        assert!(SnailParams::new(0.0, 0.07).is_err());
        assert!(SnailParams::new(1e-6, 1.0).is_err());
        assert!(SnailParams::new(1e-6, -0.1).is_err());
    }

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(0.0442264477, 4), "0.04423");
        assert_eq!(format_significant(373.1, 2), "373");
        assert_eq!(format_significant(9.9999, 3), "10.0");
        assert_eq!(format_significant(3.7316e-10, 3), "0.000000000373");
        assert_eq!(format_significant(-1.5, 2), "-1.5");
    }

    #[test]
    fn csv_layout() {
        let rows = flux_map(&table1(), &[0.0]).unwrap();
        let csv = flux_map_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(FLUX_MAP_HEADER));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[3], "0");
        assert!(csv.lines().skip(1).all(|l| !l.contains('e')));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn derivative_consistency(r in 0.02f64..0.15, ratio in -1.0f64..1.0) {
                let p = SnailParams::new(2.19e-6, r).unwrap();
                let flux = FluxPoint::from_ratio(ratio);
                let e = expansion(&p, flux).unwrap();
                let f = |x: f64| branch_current(&p, e.phi_star + x, flux) / (e.alpha_tilde * p.i_c);
                let h = 1e-3;
                let d1 = (f(h) - f(-h)) / (2.0 * h);
                let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
                let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
                prop_assert!((d1 - 1.0).abs() < 1e-6);
                prop_assert!((d2 + 2.0 * e.beta).abs() <= 1e-5 * (2.0 * e.beta).abs().max(1e-2));
                prop_assert!((d3 + 6.0 * e.gamma).abs() <= 1e-4 * (6.0 * e.gamma).abs().max(1e-2));
            }

            #[test]
            fn beta_odd_gamma_even(ratio in 0.0f64..1.0) {
                let p = SnailParams::new(2.19e-6, 0.07).unwrap();
                let a = expansion(&p, FluxPoint::from_ratio(ratio)).unwrap();
                let b = expansion(&p, FluxPoint::from_ratio(-ratio)).unwrap();
                prop_assert!((a.beta + b.beta).abs() < 1e-14);
                prop_assert!((a.gamma - b.gamma).abs() < 1e-14);
                prop_assert!(a.l_eff > 0.0);
            }
        }
    }
}
