//! Eigenvalues below the continuous spectrum and their norming constants.

use serde::{Deserialize, Serialize};

use super::{band_edges, real_solution_on, SpectralOptions};
use crate::error::{Error, Result};
use crate::jost::{JostOptions, Side};
use crate::potentials::Potential;
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

/// One below the smallest value of q.
pub fn default_mu_floor(p: &Potential) -> f64 {
    p.min_value(1.0) - 1.0
}

/// W(μ) = y₁⁺·(y₂⁻)′ − (y₁⁺)′·y₂⁻ at `x`, plus a magnitude scale for it.
fn decaying_wronskian(p: &Potential, mu: f64, x: f64, jo: &JostOptions) -> Result<(f64, f64)> {
    let r = real_solution_on(p, mu, Side::Plus, &[x], jo)?[0];
    let l = real_solution_on(p, mu, Side::Minus, &[x], jo)?[0];
    let w = r.0 * l.1 - r.1 * l.0;
    // Norms of the state vectors; the cross terms alone vanish where y′ = 0.
    let scale = r.0.hypot(r.1) * l.0.hypot(l.1);
    Ok((w, scale))
}

/// Number of zeros on ℝ of the solution decaying at −∞; by oscillation theory
/// it counts the eigenvalues below μ.
pub fn node_count(p: &Potential, mu: f64, jo: &JostOptions) -> Result<usize> {
    let (lo, hi) = p.active_region();
    let depth = (mu - p.min_value(1.0)).max(1.0);
    let dx = (0.2 / depth.sqrt()).min(0.01);
    let n = ((hi - lo) / dx).ceil() as usize + 1;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals = real_solution_on(p, mu, Side::Minus, &xs, jo)?;
    let mut count = vals.windows(2).filter(|w| w[0].0 * w[1].0 < 0.0 || (w[1].0 == 0.0 && w[0].0 != 0.0)).count();
    // Beyond the active region q = a⁺; y = c₋e^{−κx} + c₊e^{κx} has one more zero iff y and c₊ differ in sign.
    let (y, yp) = vals[n];
    let kappa = (p.a_plus - mu).sqrt();
    let grow = yp + kappa * y;
    if y != 0.0 && grow != 0.0 && y.signum() != grow.signum() {
        count += 1;
    }
    Ok(count)
}

pub fn find_bound_states(p: &Potential, mu_floor: f64, scan_step: f64) -> Result<Vec<f64>> {
    find_bound_states_with(p, mu_floor, scan_step, &SpectralOptions::default())
}

/// Sign changes of W on a scan of (mu_floor, μ₁), refined by bisection.
///
/// Each scan interval is cross-checked with the node count of the left
/// decaying solution; two or more eigenvalues inside one step give
/// `ScanTooCoarse`.
pub fn find_bound_states_with(p: &Potential, mu_floor: f64, scan_step: f64, opts: &SpectralOptions) -> Result<Vec<f64>> {
    let (m1, _) = band_edges(p);
    let eps = opts.edge_eps_for(p);
    let top = m1 - eps;
    if mu_floor >= top {
        return Err(Error::InvalidGrid(format!("mu_floor {mu_floor} must lie below mu1 {m1}")));
    }
    if scan_step <= 0.0 {
        return Err(Error::InvalidGrid("scan step must be positive".into()));
    }
    let jo = &opts.jost;
    let n = ((top - mu_floor) / scan_step).ceil() as usize;
    let mus: Vec<f64> = (0..=n).map(|i| mu_floor + (top - mu_floor) * i as f64 / n as f64).collect();
    let ws: Vec<f64> = mus.iter().map(|&m| decaying_wronskian(p, m, opts.x_match, jo).map(|w| w.0)).collect::<Result<_>>()?;
    let nodes: Vec<usize> = mus.iter().map(|&m| node_count(p, m, jo)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..n {
        let jump = nodes[i + 1].saturating_sub(nodes[i]);
        let sign_change = ws[i] * ws[i + 1] < 0.0 || ws[i + 1] == 0.0;
        if jump >= 2 || (jump == 1) != sign_change {
            return Err(Error::ScanTooCoarse { lo: mus[i], hi: mus[i + 1] });
        }
        if sign_change {
            out.push(bisect(p, mus[i], mus[i + 1], ws[i], opts)?);
        }
    }
    Ok(out)
}

fn bisect(p: &Potential, mut lo: f64, mut hi: f64, mut wlo: f64, opts: &SpectralOptions) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
        let w = decaying_wronskian(p, mid, opts.x_match, &opts.jost)?.0;
        if w == 0.0 {
            return Ok(mid);
        }
        if (w < 0.0) == (wlo < 0.0) {
            lo = mid;
            wlo = w;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn norming_constant(p: &Potential, mu: f64) -> Result<f64> {
    norming_constant_with(p, mu, 1, &SpectralOptions::default())
}

/// N⁺ = 1/‖y₁⁺(·, μ)‖² by Gauss-Legendre panels between breakpoints plus the
/// exact exponential tails outside the active region. `refine` multiplies the
/// panel count.
pub fn norming_constant_with(p: &Potential, mu: f64, refine: usize, opts: &SpectralOptions) -> Result<f64> {
    let (m1, _) = band_edges(p);
    let jo = &opts.jost;
    if mu >= m1 {
        return Err(Error::NotABoundState { mu, wronskian: f64::NAN });
    }
    let (w, scale) = decaying_wronskian(p, mu, opts.x_match, jo)?;
    if w.abs() > 1e-6 * scale {
        return Err(Error::NotABoundState { mu, wronskian: w });
    }
    let (lo, hi) = p.active_region();
    let mut cuts: Vec<f64> = p.breakpoints().into_iter().filter(|&b| b > lo && b < hi).collect();
    cuts.insert(0, lo);
    cuts.push(hi);
    let rule = GaussLegendre::new(10);
    let mut nodes = Vec::new();
    for piece in cuts.windows(2) {
        let len = piece[1] - piece[0];
        if len <= 0.0 {
            continue;
        }
        let panels = ((len / 0.25).ceil() as usize).max(1) * refine.max(1);
        let h = len / panels as f64;
        for k in 0..panels {
            let a = piece[0] + k as f64 * h;
            nodes.extend(rule.on(a, a + h));
        }
    }
    // Travel order for the right-decaying solution is descending.
    nodes.reverse();
    let mut xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    xs.push(lo);
    let vals = real_solution_on(p, mu, Side::Plus, &xs, jo)?;
    let mut norm: f64 = nodes.iter().zip(&vals).map(|(n, v)| n.1 * v.0 * v.0).sum();
    let kp = (p.a_plus - mu).sqrt();
    norm += (-2.0 * kp * hi).exp() / (2.0 * kp);
    let (y, yp) = vals[vals.len() - 1];
    let km = (p.a_minus - mu).sqrt();
    let decaying = (yp + km * y) / (2.0 * km);
    norm += decaying * decaying / (2.0 * km);
    Ok(1.0 / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Deviation;

    fn step_well() -> Potential {
        Potential::step(0.0, 2.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -8.0 })
    }

    /// Roots of the matching condition for q = 0 (x<0), −6 on [0,1), 2 (x≥1):
    /// y = cos(kx) + (κ₋/k)·sin(kx) inside, y′(1) + κ₊y(1) = 0.
    fn square_well_roots() -> Vec<f64> {
        let g = |mu: f64| {
            let k = (mu + 6.0).sqrt();
            let km = (-mu).sqrt();
            let kp = (2.0 - mu).sqrt();
            let y = k.cos() + km / k * k.sin();
            let yp = -k * k.sin() + km * k.cos();
            yp + kp * y
        };
        let mut roots = Vec::new();
        let n = 20000;
        let (a, b) = (-6.0 + 1e-9, -1e-9);
        let mut prev = (a, g(a));
        for i in 1..=n {
            let m = a + (b - a) * i as f64 / n as f64;
            let v = g(m);
            if prev.1 * v < 0.0 {
                let (mut l, mut r, mut gl) = (prev.0, m, prev.1);
                for _ in 0..200 {
                    let mid = 0.5 * (l + r);
                    let gm = g(mid);
                    if gm * gl > 0.0 {
                        l = mid;
                        gl = gm;
                    } else {
                        r = mid;
                    }
                }
                roots.push(0.5 * (l + r));
            }
            prev = (m, v);
        }
        roots
    }

    #[test]
    fn no_bound_states_without_a_well() {
        assert!(find_bound_states(&Potential::free(0.0), -1.0, 0.05).unwrap().is_empty());
        assert!(find_bound_states(&Potential::step(0.0, 2.0), -10.0, 0.05).unwrap().is_empty());
    }

    #[test]
    fn square_well_on_a_step_matches_the_transcendental_roots() {
        let p = step_well();
        let found = find_bound_states(&p, default_mu_floor(&p), 0.05).unwrap();
        let expect = square_well_roots();
        assert_eq!(found.len(), expect.len());
        assert!(!found.is_empty());
        for (a, b) in found.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn coarse_scan_is_detected() {
        // A deep wide well holds several eigenvalues; one scan step spanning all of them must fail.
        let p = Potential::step(0.0, 2.0).with_deviation(Deviation::Square { x0: 0.0, width: 4.0, height: -30.0 });
        let r = find_bound_states(&p, -29.5, 30.0);
        assert!(matches!(r, Err(Error::ScanTooCoarse { .. })), "{r:?}");
    }

    #[test]
    fn norming_constant_converges_and_rejects_non_eigenvalues() {
        let p = step_well();
        let mus = find_bound_states(&p, default_mu_floor(&p), 0.05).unwrap();
        let o = SpectralOptions::default();
        for &mu in &mus {
            let a = norming_constant_with(&p, mu, 1, &o).unwrap();
            let b = norming_constant_with(&p, mu, 2, &o).unwrap();
            assert!(a > 0.0 && (a - b).abs() < 1e-6 * a);
        }
        assert!(matches!(norming_constant(&Potential::free(0.0), -1.0), Err(Error::NotABoundState { .. })));
        assert!(matches!(norming_constant(&p, mus[0] + 0.1), Err(Error::NotABoundState { .. })));
    }

    #[test]
    fn norming_constant_matches_closed_form_for_the_square_well() {
        // ‖y₁⁺‖² in closed form: inside, y₁⁺ = A cos(k(x−1)) + B sin(k(x−1)) matched at x = 1.
        let p = step_well();
        let mu = square_well_roots()[0];
        let k = (mu + 6.0).sqrt();
        let kp = (2.0 - mu).sqrt();
        let km = (-mu).sqrt();
        let e = (-kp).exp();
        let (a, b) = (e, -kp * e / k);
        let inside = 0.5 * (a * a + b * b)
            + (a * a - b * b) * (2.0 * k).sin() / (4.0 * k)
            + a * b * ((2.0 * k).cos() - 1.0) / (2.0 * k);
        let y0 = a * k.cos() - b * k.sin();
        let right = (-2.0 * kp).exp() / (2.0 * kp);
        let left = y0 * y0 / (2.0 * km);
        let expect = 1.0 / (inside + right + left);
        let n = norming_constant(&p, mu).unwrap();
        assert!((n - expect).abs() < 1e-9 * expect, "{n} vs {expect}");
    }

    #[test]
    fn symmetric_well_ground_state_is_accepted() {
        // y′(0) = 0 for the even ground state, right at the matching point.
        let p = Potential::free(0.0).with_deviation(Deviation::Gaussian { amplitude: -3.0, center: 0.0, width: 1.0 });
        let mus = find_bound_states(&p, default_mu_floor(&p), 0.05).unwrap();
        assert!(!mus.is_empty());
        for mu in mus {
            assert!(norming_constant(&p, mu).unwrap() > 0.0);
        }
    }
}
