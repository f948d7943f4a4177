//! Step-like potentials q(x) → a∓ as x → ∓∞, their integrability moments and
//! the analytic reference families used by the oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Deviation profile added on top of the piecewise-constant step background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    None,
    /// `height` on `[x0, x0 + width)`.
    Square { x0: f64, width: f64, height: f64 },
    /// `amplitude · exp(-((x - center)/width)²)`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `amplitude · exp(-rate·|x|)`.
    ExpTail { amplitude: f64, rate: f64 },
    /// Piecewise-linear interpolation of `values` over `x`, zero outside.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

/// Step-like potential: `q(x) = a⁻ + dev(x)` for `x < 0`, `a⁺ + dev(x)` for `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub a_minus: f64,
    pub a_plus: f64,
    pub deviation: Deviation,
}

/// Values below this are treated as numerically absent when locating the
/// effective support of an unbounded profile.
const SUPPORT_CUTOFF: f64 = 1e-18;

impl Potential {
    pub fn step(a_minus: f64, a_plus: f64) -> Self {
        Potential { a_minus, a_plus, deviation: Deviation::None }
    }

    pub fn free(level: f64) -> Self {
        Self::step(level, level)
    }

    pub fn with_deviation(mut self, deviation: Deviation) -> Self {
        self.deviation = deviation;
        self
    }

    /// Structural checks: finite parameters, increasing tabulated abscissae,
    /// positive widths and decay rates.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPotential(m.to_string()));
        if !self.a_minus.is_finite() || !self.a_plus.is_finite() {
            return bad("asymptotes must be finite");
        }
        match &self.deviation {
            Deviation::None => Ok(()),
            Deviation::Square { x0, width, height } => {
                if !(x0.is_finite() && height.is_finite() && *width > 0.0 && width.is_finite()) {
                    return bad("square profile needs finite x0/height and positive width");
                }
                Ok(())
            }
            Deviation::Gaussian { amplitude, center, width } => {
                if !(amplitude.is_finite() && center.is_finite() && *width > 0.0 && width.is_finite()) {
                    return bad("gaussian profile needs finite amplitude/center and positive width");
                }
                Ok(())
            }
            Deviation::ExpTail { amplitude, rate } => {
                if !amplitude.is_finite() || !rate.is_finite() {
                    return bad("exp_tail parameters must be finite");
                }
                if *rate <= 0.0 && *amplitude != 0.0 {
                    return Err(Error::NonIntegrableDeviation(format!(
                        "exp_tail with rate {rate} does not decay"
                    )));
                }
                Ok(())
            }
            Deviation::Tabulated { x, values } => {
                if x.len() != values.len() || x.len() < 2 {
                    return bad("tabulated profile needs matching x/values of length >= 2");
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated abscissae must be strictly increasing");
                }
                if x.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("tabulated profile must be finite");
                }
                Ok(())
            }
        }
    }

    /// Asymptote governing the background at `x`.
    pub fn background(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.a_minus
        } else {
            self.a_plus
        }
    }

    pub fn deviation_at(&self, x: f64) -> f64 {
        match &self.deviation {
            Deviation::None => 0.0,
            Deviation::Square { x0, width, height } => {
                if x >= *x0 && x < x0 + width {
                    *height
                } else {
                    0.0
                }
            }
            Deviation::Gaussian { amplitude, center, width } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp()
            }
            Deviation::ExpTail { amplitude, rate } => amplitude * (-rate * x.abs()).exp(),
            Deviation::Tabulated { x: xs, values } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return 0.0;
                }
                let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                    Ok(i) => return values[i],
                    Err(i) => i,
                };
                let (x0, x1) = (xs[i - 1], xs[i]);
                let w = (x - x0) / (x1 - x0);
                values[i - 1] * (1.0 - w) + values[i] * w
            }
        }
    }

    /// Points where q or its derivative may jump. Always includes the step at 0.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        match &self.deviation {
            Deviation::Square { x0, width, .. } => {
                pts.push(*x0);
                pts.push(x0 + width);
            }
            Deviation::ExpTail { .. } => {}
            Deviation::Tabulated { x, .. } => pts.extend_from_slice(x),
            _ => {}
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// Interval outside which the deviation is below `1e-18`·max|dev|
    /// (exactly zero for compactly supported profiles). Returns `None` for an
    /// identically zero deviation.
    pub fn deviation_support(&self) -> Option<(f64, f64)> {
        match &self.deviation {
            Deviation::None => None,
            Deviation::Square { x0, width, height } => {
                if *height == 0.0 {
                    None
                } else {
                    Some((*x0, x0 + width))
                }
            }
            Deviation::Gaussian { amplitude, center, width } => {
                if *amplitude == 0.0 {
                    return None;
                }
                let r = width * (-(SUPPORT_CUTOFF.ln())).sqrt();
                Some((center - r, center + r))
            }
            Deviation::ExpTail { amplitude, rate } => {
                if *amplitude == 0.0 {
                    return None;
                }
                let r = -(SUPPORT_CUTOFF.ln()) / rate.max(1e-300);
                Some((-r, r))
            }
            Deviation::Tabulated { x, .. } => Some((x[0], x[x.len() - 1])),
        }
    }

    /// Smallest interval containing the step point and the deviation support.
    pub fn active_region(&self) -> (f64, f64) {
        match self.deviation_support() {
            None => (0.0, 0.0),
            Some((lo, hi)) => (lo.min(0.0), hi.max(0.0)),
        }
    }

    /// Constant value of q on `(a, b)` when the potential is constant there.
    pub fn constant_on(&self, a: f64, b: f64) -> Option<f64> {
        if a < 0.0 && b > 0.0 {
            return None;
        }
        let bg = self.background(0.5 * (a + b));
        match &self.deviation {
            Deviation::None => Some(bg),
            Deviation::Square { x0, width, height } => {
                let (l, r) = (*x0, x0 + width);
                if b <= l || a >= r {
                    Some(bg)
                } else if a >= l && b <= r {
                    Some(bg + height)
                } else {
                    None
                }
            }
            _ => match self.deviation_support() {
                None => Some(bg),
                Some((l, r)) if b <= l || a >= r => Some(bg),
                _ => None,
            },
        }
    }

    /// Lower bound of q over the active region widened by `margin`.
    pub fn min_value(&self, margin: f64) -> f64 {
        let (lo, hi) = self.active_region();
        let (lo, hi) = (lo - margin, hi + margin);
        let n = 4000;
        let mut m = self.a_minus.min(self.a_plus);
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            m = m.min(eval_q(self, x));
        }
        for &b in &self.breakpoints() {
            m = m.min(eval_q(self, b));
        }
        m
    }
}

/// Pointwise evaluation of q(x).
pub fn eval_q(p: &Potential, x: f64) -> f64 {
    p.background(x) + p.deviation_at(x)
}

/// Reference pure step with the same asymptotes.
pub fn step_reference(p: &Potential) -> Potential {
    Potential::step(p.a_minus, p.a_plus)
}

/// Integrability moments of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// ∫₋∞⁰|q − a⁻| + ∫₀^∞|q − a⁺|.
    pub m1: f64,
    /// ∫₋∞⁰(1 − x)|q − a⁻| + ∫₀^∞(1 + x)|q − a⁺|.
    pub m2: f64,
    /// (x, h⁺(x)) with h⁺(x) = ∫ₓ^∞|q − a⁺|.
    pub h_plus_at: Vec<(f64, f64)>,
    /// (x, h₁⁺(x)) with h₁⁺(x) = ∫ₓ^∞ h⁺.
    pub h1_plus_at: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    pub tol: f64,
    /// Tail windows are doubled until this half-width; divergence beyond it is an error.
    pub max_extent: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions { tol: 1e-10, max_extent: 1e6 }
    }
}

/// Integrate `f` over `[a, b]`, splitting at the potential's breakpoints.
fn integrate_split<F: Fn(f64) -> f64>(p: &Potential, f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut cuts = vec![a];
    cuts.extend(p.breakpoints().into_iter().filter(|&c| c > a && c < b));
    if let Some((lo, hi)) = p.deviation_support() {
        for c in [lo, hi] {
            if c > a && c < b {
                cuts.push(c);
            }
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let tol_each = tol / cuts.len() as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        // Split long pieces so the Simpson estimate sees the profile's structure.
        let pieces = ((w[1] - w[0]) / 0.5).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for i in 0..pieces {
            let lo = w[0] + i as f64 * h;
            let hi = if i + 1 == pieces { w[1] } else { lo + h };
            // One-sided limits at the piece ends, so jumps sitting on a cut are harmless.
            let eps = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
            let inner = |x: f64| f(x.clamp(lo + eps, hi - eps));
            total += adaptive_simpson(&inner, lo, hi, tol_each / pieces as f64, 40).ok_or_else(|| {
                Error::NoConvergence(format!("moment quadrature on [{lo}, {hi}]"))
            })?;
        }
    }
    Ok(total)
}

/// Integrate over [0, ∞) (sign = +1) or (−∞, 0] (sign = −1) by doubling windows.
fn integrate_half_line<F: Fn(f64) -> f64>(p: &Potential, f: &F, sign: f64, opts: MomentOptions) -> Result<f64> {
    let mut total = 0.0;
    let mut inner = 0.0;
    let mut outer = 1.0;
    loop {
        let (a, b) = if sign > 0.0 { (inner, outer) } else { (-outer, -inner) };
        let piece = integrate_split(p, f, a, b, opts.tol)?;
        total += piece;
        let beyond_support = match p.deviation_support() {
            None => true,
            Some((lo, hi)) => {
                if sign > 0.0 {
                    outer >= hi
                } else {
                    -outer <= lo
                }
            }
        };
        if beyond_support && piece.abs() <= opts.tol {
            return Ok(total);
        }
        if outer >= opts.max_extent {
            return Err(Error::NonIntegrableDeviation(format!(
                "tail integral still growing at |x| = {outer:e} (last window {piece:e})"
            )));
        }
        inner = outer;
        outer *= 2.0;
    }
}

/// Moments (1) and (4) and the functions h⁺, h₁⁺ at the probe points.
pub fn moment_report(p: &Potential, probe_points: &[f64]) -> Result<MomentReport> {
    moment_report_with(p, probe_points, MomentOptions::default())
}

pub fn moment_report_with(p: &Potential, probe_points: &[f64], opts: MomentOptions) -> Result<MomentReport> {
    if let Deviation::ExpTail { amplitude, rate } = p.deviation {
        if rate <= 0.0 && amplitude != 0.0 {
            return Err(Error::NonIntegrableDeviation(format!("exp_tail rate {rate} is not positive")));
        }
    }
    p.validate()?;
    let dev = |x: f64| p.deviation_at(x).abs();
    let weighted = |x: f64| (1.0 + x.abs()) * p.deviation_at(x).abs();
    let m1 = integrate_half_line(p, &dev, 1.0, opts)? + integrate_half_line(p, &dev, -1.0, opts)?;
    let m2 = integrate_half_line(p, &weighted, 1.0, opts)? + integrate_half_line(p, &weighted, -1.0, opts)?;

    let mut h_plus_at = Vec::with_capacity(probe_points.len());
    let mut h1_plus_at = Vec::with_capacity(probe_points.len());
    for &x in probe_points {
        h_plus_at.push((x, h_plus(p, x, opts)?));
        h1_plus_at.push((x, h1_plus(p, x, opts)?));
    }
    Ok(MomentReport { m1, m2, h_plus_at, h1_plus_at })
}

/// h⁺(x) = ∫ₓ^∞ |q(t) − a⁺| dt.
pub fn h_plus(p: &Potential, x: f64, opts: MomentOptions) -> Result<f64> {
    let f = |t: f64| (eval_q(p, t) - p.a_plus).abs();
    tail_from(p, &f, x, opts)
}

/// h₁⁺(x) = ∫ₓ^∞ h⁺(t) dt = ∫ₓ^∞ (t − x)|q(t) − a⁺| dt.
pub fn h1_plus(p: &Potential, x: f64, opts: MomentOptions) -> Result<f64> {
    let f = |t: f64| (t - x) * (eval_q(p, t) - p.a_plus).abs();
    tail_from(p, &f, x, opts)
}

/// ∫ₓ^∞ (q(t) − a⁺) dt, the signed counterpart of h⁺.
pub fn signed_tail(p: &Potential, x: f64, opts: MomentOptions) -> Result<f64> {
    let f = |t: f64| eval_q(p, t) - p.a_plus;
    tail_from(p, &f, x, opts)
}

fn tail_from<F: Fn(f64) -> f64>(p: &Potential, f: &F, x: f64, opts: MomentOptions) -> Result<f64> {
    let right_end = match p.deviation_support() {
        None => x.max(0.0),
        Some((_, hi)) => hi.max(0.0).max(x),
    };
    let mut total = integrate_split(p, f, x, right_end, opts.tol)?;
    if p.deviation_support().is_some() {
        // Remaining tail beyond the effective support, by doubling windows.
        let mut a = right_end;
        let mut width = 1.0;
        loop {
            let piece = integrate_split(p, f, a, a + width, opts.tol)?;
            total += piece;
            if piece.abs() <= opts.tol {
                break;
            }
            if width > opts.max_extent {
                return Err(Error::NonIntegrableDeviation(format!("h-tail diverges beyond {a}")));
            }
            a += width;
            width *= 2.0;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_well() -> Potential {
        Potential::free(0.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -3.0 })
    }

    #[test]
    fn eval_q_examples() {
        let step = Potential::step(0.0, 2.0);
        assert_eq!(eval_q(&step, -1.0), 0.0);
        assert_eq!(eval_q(&step, 1.0), 2.0);
        assert_eq!(eval_q(&square_well(), 0.5), -3.0);
    }

    #[test]
    fn tabulated_outside_support_is_the_asymptote() {
        let p = Potential::step(-1.0, 2.0).with_deviation(Deviation::Tabulated {
            x: vec![-1.0, 0.0, 1.0],
            values: vec![0.0, 1.0, 0.0],
        });
        assert_eq!(eval_q(&p, -5.0), -1.0);
        assert_eq!(eval_q(&p, 7.0), 2.0);
        assert!((eval_q(&p, 0.5) - 2.5).abs() < 1e-15);
        assert!((eval_q(&p, -0.25) - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn tabulated_must_increase() {
        let p = Potential::step(0.0, 0.0).with_deviation(Deviation::Tabulated {
            x: vec![0.0, 0.0, 1.0],
            values: vec![0.0, 1.0, 0.0],
        });
        assert!(matches!(p.validate(), Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn moments_of_pure_step_vanish() {
        let r = moment_report(&Potential::step(0.0, 2.0), &[1.0, 3.0]).unwrap();
        assert_eq!(r.m1, 0.0);
        assert_eq!(r.m2, 0.0);
        assert!(r.h_plus_at.iter().all(|&(_, h)| h == 0.0));
    }

    #[test]
    fn moments_of_square_well() {
        let r = moment_report(&square_well(), &[]).unwrap();
        assert!((r.m1 - 3.0).abs() < 1e-9);
        assert!((r.m2 - 4.5).abs() < 1e-9);
    }

    #[test]
    fn exp_tail_without_decay_is_rejected() {
        let p = Potential::free(0.0).with_deviation(Deviation::ExpTail { amplitude: 1.0, rate: 0.0 });
        assert!(matches!(moment_report(&p, &[]), Err(Error::NonIntegrableDeviation(_))));
    }

    #[test]
    fn h_functions_on_a_step() {
        // For x < 0 on a step (0, 2): h⁺(x) = 2|x|, h₁⁺(x) = x².
        let p = Potential::step(0.0, 2.0);
        let o = MomentOptions::default();
        assert!((h_plus(&p, -1.5, o).unwrap() - 3.0).abs() < 1e-9);
        assert!((h1_plus(&p, -1.5, o).unwrap() - 2.25).abs() < 1e-9);
        assert_eq!(h_plus(&p, 0.5, o).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_and_exp_moments_match_closed_forms() {
        let g = Potential::free(0.0).with_deviation(Deviation::Gaussian { amplitude: -2.0, center: 0.0, width: 1.0 });
        let r = moment_report(&g, &[]).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((r.m1 - 2.0 * sqrt_pi).abs() < 1e-8);
        // ∫(1+|x|)·2e^{-x²} = 2√π + 2
        assert!((r.m2 - (2.0 * sqrt_pi + 2.0)).abs() < 1e-8);

        let e = Potential::free(1.0).with_deviation(Deviation::ExpTail { amplitude: 1.0, rate: 2.0 });
        let r = moment_report(&e, &[]).unwrap();
        assert!((r.m1 - 1.0).abs() < 1e-8);
        assert!((r.m2 - 1.5).abs() < 1e-8);
    }

    #[test]
    fn step_reference_projection() {
        let p = Potential::step(0.0, 2.0).with_deviation(Deviation::Gaussian { amplitude: 1.0, center: 0.0, width: 1.0 });
        assert_eq!(step_reference(&p), Potential::step(0.0, 2.0));
        let s = Potential::step(0.0, 2.0);
        assert_eq!(step_reference(&s), s);
        assert_eq!(step_reference(&Potential::free(1.5)), Potential::free(1.5));
    }

    #[test]
    fn serde_shape_of_potential() {
        let p: Potential = serde_json::from_str(
            r#"{"a_minus": 0, "a_plus": 2, "deviation": {"kind": "gaussian", "amplitude": -3, "center": 0.5, "width": 1}}"#,
        )
        .unwrap();
        assert_eq!(p.deviation, Deviation::Gaussian { amplitude: -3.0, center: 0.5, width: 1.0 });
        let none: Potential = serde_json::from_str(r#"{"a_minus": 1, "a_plus": 1, "deviation": {"kind": "none"}}"#).unwrap();
        assert_eq!(none, Potential::free(1.0));
    }
}
