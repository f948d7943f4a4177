//! Channel wavenumbers, the bracket form and Jost solutions of
//! `-y'' + q y = μ y` normalized to `e^{iλx}` at ±∞.
//!
//! The default integrator propagates `(y, y')` from the far end of the grid
//! towards the matching region: exactly (transfer matrices) where q is
//! constant and with an embedded Dormand-Prince 5(4) pair elsewhere. The
//! successive-approximation route solves the Volterra equation for
//! `u = y·e^{-iλx}` on a uniform grid and serves as a cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{eval_q, Potential};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }

    pub fn asymptote(self, p: &Potential) -> f64 {
        match self {
            Side::Plus => p.a_plus,
            Side::Minus => p.a_minus,
        }
    }
}

/// A channel (μ, side, j) with its wavenumber λ = (−1)^{j−1}√(μ − a^side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub mu: C,
    pub side: Side,
    pub j: u8,
    pub lambda: C,
}

impl Channel {
    pub fn new(p: &Potential, mu: f64, side: Side, j: u8, eps: f64) -> Result<Self> {
        let lambda = lambda_channel(C::new(mu, 0.0), side.asymptote(p), j, eps)?;
        Ok(Channel { mu: C::new(mu, 0.0), side, j, lambda })
    }

    /// True when the Jost solution is bounded on its own side
    /// (decaying or oscillatory as x → ±∞).
    pub fn is_bounded(&self) -> bool {
        match self.side {
            Side::Plus => self.lambda.im >= 0.0,
            Side::Minus => self.lambda.im <= 0.0,
        }
    }
}

/// Default threshold distance below which μ counts as sitting on a band edge.
pub const BAND_EDGE_EPS: f64 = 1e-10;

/// λ_j(μ) = (−1)^{j−1}√(μ − a), principal branch.
pub fn lambda_channel(mu: C, a: f64, j: u8, eps: f64) -> Result<C> {
    assert!(j == 1 || j == 2, "channel index must be 1 or 2");
    let z = mu - a;
    if z.norm() < eps {
        return Err(Error::BandEdge { mu: mu.re, edge: a, eps });
    }
    // Real negative offsets must land on +i·√|z| irrespective of the sign of a zero imaginary part.
    let root = if z.im == 0.0 && z.re < 0.0 { C::new(0.0, (-z.re).sqrt()) } else { z.sqrt() };
    Ok(if j == 1 { root } else { -root })
}

/// Half the number of real roots of λ² + a = μ.
pub fn half_root_count(mu: f64, a: f64) -> Result<u8> {
    half_root_count_eps(mu, a, BAND_EDGE_EPS)
}

pub fn half_root_count_eps(mu: f64, a: f64, eps: f64) -> Result<u8> {
    if (mu - a).abs() < eps {
        return Err(Error::BandEdge { mu, edge: a, eps });
    }
    Ok(u8::from(mu > a))
}

/// [y, z] = i(y·conj(z') − y'·conj(z)).
pub fn bracket(y: C, y_prime: C, z: C, z_prime: C) -> C {
    I * (y * z_prime.conj() - y_prime * z.conj())
}

/// Ordinary (bilinear) Wronskian y·z' − y'·z.
pub fn wronskian(y: C, y_prime: C, z: C, z_prime: C) -> C {
    y * z_prime - y_prime * z
}

#[derive(Debug, Clone, Copy)]
pub struct JostOptions {
    /// Distance added beyond the active region of the potential to place the far end.
    pub far_margin: f64,
    /// Relative local tolerance of the adaptive integrator.
    pub rtol: f64,
    pub band_edge_eps: f64,
    /// Iteration cap for successive approximations.
    pub max_picard: usize,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions { far_margin: 10.0, rtol: 1e-12, band_edge_eps: BAND_EDGE_EPS, max_picard: 2000 }
    }
}

/// One Jost solution sampled on a grid.
#[derive(Debug, Clone)]
pub struct JostSample {
    pub channel: Channel,
    pub x_grid: Vec<f64>,
    pub y: Vec<C>,
    pub y_prime: Vec<C>,
    pub residual: f64,
}

/// Far end used for a given side: beyond every grid point and the active region.
pub fn far_point(p: &Potential, side: Side, grid: &[f64], opts: &JostOptions) -> f64 {
    let (lo, hi) = p.active_region();
    match side {
        Side::Plus => {
            let g = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi.max(g) + opts.far_margin
        }
        Side::Minus => {
            let g = grid.iter().cloned().fold(f64::INFINITY, f64::min);
            lo.min(g) - opts.far_margin
        }
    }
}

/// Jost solution y_j^side(·, μ) on `x_grid` (any order, returned in the same order).
pub fn solve_jost(p: &Potential, mu: f64, side: Side, j: u8, x_grid: &[f64], opts: &JostOptions) -> Result<JostSample> {
    let channel = Channel::new(p, mu, side, j, opts.band_edge_eps)?;
    if !channel.is_bounded() {
        return Err(Error::GrowingChannel { mu, side: side.name(), j });
    }
    for a in [p.a_minus, p.a_plus] {
        if (mu - a).abs() < opts.band_edge_eps {
            return Err(Error::BandEdge { mu, edge: a, eps: opts.band_edge_eps });
        }
    }
    let lambda = channel.lambda;
    let x_far = far_point(p, side, x_grid, opts);
    let e = (I * lambda * x_far).exp();
    let start = [e, I * lambda * e];

    // Visit targets in travel order: descending for the plus side, ascending for minus.
    let mut order: Vec<usize> = (0..x_grid.len()).collect();
    match side {
        Side::Plus => order.sort_by(|&a, &b| x_grid[b].partial_cmp(&x_grid[a]).unwrap()),
        Side::Minus => order.sort_by(|&a, &b| x_grid[a].partial_cmp(&x_grid[b]).unwrap()),
    }
    let targets: Vec<f64> = order.iter().map(|&i| x_grid[i]).collect();
    let states = propagate(p, mu, x_far, start, &targets, opts.rtol)?;
    let mut y = vec![C::new(0.0, 0.0); x_grid.len()];
    let mut yp = y.clone();
    for (k, &i) in order.iter().enumerate() {
        y[i] = states[k][0];
        yp[i] = states[k][1];
    }
    let mut sample = JostSample { channel, x_grid: x_grid.to_vec(), y, y_prime: yp, residual: 0.0 };
    if x_grid.len() >= 3 && x_grid.windows(2).all(|w| w[1] > w[0]) {
        sample.residual = ode_residual(p, &sample, mu);
    }
    Ok(sample)
}

/// (y, y') of a Jost solution at a single point.
pub fn jost_at(p: &Potential, mu: f64, side: Side, j: u8, x: f64, opts: &JostOptions) -> Result<(C, C)> {
    let s = solve_jost(p, mu, side, j, &[x], opts)?;
    Ok((s.y[0], s.y_prime[0]))
}

/// Cut points of the propagation: breakpoints and the support edges.
fn cut_points(p: &Potential) -> Vec<f64> {
    let mut cuts = p.breakpoints();
    if let Some((lo, hi)) = p.deviation_support() {
        cuts.push(lo);
        cuts.push(hi);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

/// Propagate `(y, y')` from `x0` through the monotone sequence `targets`.
pub fn propagate(p: &Potential, mu: f64, x0: f64, state: [C; 2], targets: &[f64], rtol: f64) -> Result<Vec<[C; 2]>> {
    let mut out = Vec::with_capacity(targets.len());
    if targets.is_empty() {
        return Ok(out);
    }
    let forward = targets[targets.len() - 1] >= x0;
    let cuts = cut_points(p);
    let mut x = x0;
    let mut s = state;
    for &target in targets {
        if (forward && target < x - 1e-15) || (!forward && target > x + 1e-15) {
            return Err(Error::InvalidGrid("propagation targets must be monotone".into()));
        }
        // Advance piece by piece between cut points.
        while x != target {
            let next_cut = if forward {
                cuts.iter().cloned().find(|&c| c > x && c < target)
            } else {
                cuts.iter().rev().cloned().find(|&c| c < x && c > target)
            };
            let stop = next_cut.unwrap_or(target);
            let (lo, hi) = if forward { (x, stop) } else { (stop, x) };
            s = match p.constant_on(lo, hi) {
                Some(c) => transfer_constant(s, mu - c, stop - x),
                None => integrate_rk(p, mu, x, stop, s, lo, hi, rtol)?,
            };
            x = stop;
        }
        out.push(s);
    }
    Ok(out)
}

/// Exact transfer across a piece with y'' = −z·y (z = μ − q constant).
fn transfer_constant(s: [C; 2], z: f64, d: f64) -> [C; 2] {
    if d == 0.0 {
        return s;
    }
    let k = if z >= 0.0 { C::new(z.sqrt(), 0.0) } else { C::new(0.0, (-z).sqrt()) };
    let kd = k * d;
    let (cos, sinc_d) = if kd.norm() < 1e-6 {
        let kd2 = kd * kd;
        (C::new(1.0, 0.0) - kd2 / 2.0 + kd2 * kd2 / 24.0, d * (C::new(1.0, 0.0) - kd2 / 6.0 + kd2 * kd2 / 120.0))
    } else {
        (kd.cos(), kd.sin() / k)
    };
    // sin(kd)·k = (sin(kd)/k)·k²
    let k_sin = sinc_d * z;
    [s[0] * cos + s[1] * sinc_d, -s[0] * k_sin + s[1] * cos]
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[allow(clippy::too_many_arguments)]
fn integrate_rk(p: &Potential, mu: f64, x0: f64, x1: f64, s0: [C; 2], lo: f64, hi: f64, rtol: f64) -> Result<[C; 2]> {
    let eps = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
    let q = |x: f64| eval_q(p, x.clamp(lo + eps, hi - eps));
    let rhs = |x: f64, s: [C; 2]| -> [C; 2] { [s[1], s[0] * (q(x) - mu)] };
    let omega = (mu - q(0.5 * (lo + hi))).abs().sqrt().max((mu - q(lo)).abs().sqrt()).max(1.0);
    let norm = |s: &[C; 2]| s[0].norm() + s[1].norm() / omega;

    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let mut h = (0.05 / omega).min(span);
    let mut x = x0;
    let mut s = s0;
    let mut k: [[C; 2]; 7] = [[C::new(0.0, 0.0); 2]; 7];
    k[0] = rhs(x, s);
    let mut steps = 0usize;
    while (x1 - x) * dir > 0.0 {
        steps += 1;
        if steps > 5_000_000 {
            return Err(Error::NoConvergence(format!("step budget exhausted integrating [{lo}, {hi}] at mu={mu}")));
        }
        let remaining = (x1 - x).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        for st in 1..7 {
            let mut acc = s;
            for (m, a) in DP_A[st].iter().enumerate().take(st) {
                if *a != 0.0 {
                    acc[0] += k[m][0] * (hs * a);
                    acc[1] += k[m][1] * (hs * a);
                }
            }
            k[st] = rhs(x + DP_C[st] * hs, acc);
        }
        let mut new = s;
        let mut err = [C::new(0.0, 0.0); 2];
        for m in 0..7 {
            new[0] += k[m][0] * (hs * DP_B[m]);
            new[1] += k[m][1] * (hs * DP_B[m]);
            err[0] += k[m][0] * (hs * DP_E[m]);
            err[1] += k[m][1] * (hs * DP_E[m]);
        }
        let scale = rtol * norm(&s).max(norm(&new)).max(1e-300);
        let ratio = norm(&err) / scale;
        if ratio <= 1.0 {
            x = if last { x1 } else { x + hs };
            s = new;
            k[0] = k[6];
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                h *= grow;
            }
        } else {
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::NoConvergence(format!("step size underflow at x={x}, mu={mu}")));
            }
        }
    }
    Ok(s)
}

/// Defect of `−y'' + (q − μ)y = 0` on the sample grid, relative to max|y|.
///
/// Uses the Numerov-corrected centered second difference, which is fourth
/// order on smooth stretches. Stencils straddling a breakpoint of q are
/// skipped since y'' jumps there.
pub fn ode_residual(p: &Potential, s: &JostSample, mu: f64) -> f64 {
    let x = &s.x_grid;
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    let breaks = p.breakpoints();
    let ymax = s.y.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let g = |i: usize| s.y[i] * (eval_q(p, x[i]) - mu);
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        if breaks.iter().any(|&b| b > x[i - 1] && b <= x[i + 1]) {
            continue;
        }
        let d2 = |f: &dyn Fn(usize) -> C| -> C {
            (f(i + 1) * hl + f(i - 1) * hr - f(i) * (hl + hr)) * (2.0 / (hl * hr * (hl + hr)))
        };
        let yy = |k: usize| s.y[k];
        let ypp = d2(&yy);
        let hh = 0.5 * (hl + hr);
        let defect = ypp - g(i) - d2(&g) * (hh * hh / 12.0);
        worst = worst.max(defect.norm() / ymax);
    }
    worst
}

/// Successive approximations on the Volterra equation for u = y·e^{−iλx}.
///
/// `x_grid` must be uniform and increasing; it is extended to the far end with
/// the same step.
pub fn solve_jost_volterra(p: &Potential, mu: f64, side: Side, j: u8, x_grid: &[f64], opts: &JostOptions) -> Result<JostSample> {
    let channel = Channel::new(p, mu, side, j, opts.band_edge_eps)?;
    if !channel.is_bounded() {
        return Err(Error::GrowingChannel { mu, side: side.name(), j });
    }
    let n0 = x_grid.len();
    if n0 < 2 {
        return Err(Error::InvalidGrid("volterra route needs at least two grid points".into()));
    }
    let h = x_grid[1] - x_grid[0];
    if h <= 0.0 || x_grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidGrid("volterra route needs a uniform increasing grid".into()));
    }
    let lambda = channel.lambda;
    let a = side.asymptote(p);
    let x_far = far_point(p, side, x_grid, opts);
    // Extended uniform grid from the grid towards the far end.
    let mut xs: Vec<f64> = x_grid.to_vec();
    match side {
        Side::Plus => {
            let mut xn = x_grid[n0 - 1];
            while xn < x_far {
                xn += h;
                xs.push(xn);
            }
        }
        Side::Minus => {
            let mut pre = Vec::new();
            let mut xn = x_grid[0];
            while xn > x_far {
                xn -= h;
                pre.push(xn);
            }
            pre.reverse();
            pre.extend_from_slice(x_grid);
            xs = pre;
        }
    }
    let n = xs.len();
    let first = match side {
        Side::Plus => 0,
        Side::Minus => n - n0,
    };
    // At a jump of q the trapezoid rule stays second order with the mean of the one-sided limits.
    let breaks = p.breakpoints();
    let v: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = 1e-12 * (1.0 + x.abs());
            if breaks.iter().any(|&b| (b - x).abs() <= 1e-9 * h) {
                0.5 * (eval_q(p, x - d) + eval_q(p, x + d)) - a
            } else {
                eval_q(p, x) - a
            }
        })
        .collect();
    // Kernel G(s) for s ≥ 0 and its derivative G'(s).
    let lam_eff = match side {
        Side::Plus => lambda,
        Side::Minus => -lambda,
    };
    let kern = |s: f64| -> C {
        let z = 2.0 * I * lam_eff;
        if (z * s).norm() < 1e-8 {
            C::new(s, 0.0) + z * s * s / 2.0
        } else {
            ((z * s).exp() - 1.0) / z
        }
    };
    let dkern = |s: f64| -> C { (2.0 * I * lam_eff * s).exp() };
    let gk: Vec<C> = (0..n).map(|m| kern(m as f64 * h)).collect();
    let dgk: Vec<C> = (0..n).map(|m| dkern(m as f64 * h)).collect();

    let mut u = vec![C::new(1.0, 0.0); n];
    let mut converged = false;
    for _ in 0..opts.max_picard {
        let w: Vec<C> = (0..n).map(|i| u[i] * v[i]).collect();
        let mut next = vec![C::new(0.0, 0.0); n];
        for i in 0..n {
            // Integration runs over the far side of x_i.
            let range: Box<dyn Iterator<Item = usize>> = match side {
                Side::Plus => Box::new(i..n),
                Side::Minus => Box::new(0..=i),
            };
            let mut acc = C::new(0.0, 0.0);
            let (lo, hi) = match side {
                Side::Plus => (i, n - 1),
                Side::Minus => (0, i),
            };
            for m in range {
                let wt = if (m == lo || m == hi) && lo != hi { 0.5 * h } else if lo == hi { 0.0 } else { h };
                acc += gk[m.abs_diff(i)] * w[m] * wt;
            }
            next[i] = C::new(1.0, 0.0) + acc;
        }
        let diff = next.iter().zip(&u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        u = next;
        if diff <= 1e-14 * scale {
            converged = true;
            break;
        }
        if !diff.is_finite() {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "successive approximations did not contract within {} iterations (mu={mu})",
            opts.max_picard
        )));
    }
    let w: Vec<C> = (0..n).map(|i| u[i] * v[i]).collect();
    let mut y = Vec::with_capacity(n0);
    let mut yp = Vec::with_capacity(n0);
    for i in first..first + n0 {
        let (lo, hi) = match side {
            Side::Plus => (i, n - 1),
            Side::Minus => (0, i),
        };
        let mut du = C::new(0.0, 0.0);
        for m in lo..=hi {
            let wt = if lo == hi { 0.0 } else if m == lo || m == hi { 0.5 * h } else { h };
            du += dgk[m.abs_diff(i)] * w[m] * wt;
        }
        let du = match side {
            Side::Plus => -du,
            Side::Minus => du,
        };
        let e = (I * lambda * xs[i]).exp();
        y.push(e * u[i]);
        yp.push(I * lambda * e * u[i] + e * du);
    }
    let mut sample = JostSample { channel, x_grid: x_grid.to_vec(), y, y_prime: yp, residual: 0.0 };
    if n0 >= 3 {
        sample.residual = ode_residual(p, &sample, mu);
    }
    Ok(sample)
}

/// Growing companion of a decaying Jost solution by variation of constants:
/// z = y ∫ W/y² with W = −2iλ, anchored at the first grid point. The result is
/// fixed only up to adding a multiple of y, which does not affect its growth.
pub fn growing_from_decaying(s: &JostSample) -> Result<JostSample> {
    let n = s.x_grid.len();
    if n < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if s.y.iter().any(|v| v.norm() == 0.0) {
        return Err(Error::InvalidData("decaying solution vanishes on the grid".into()));
    }
    let w = -2.0 * I * s.channel.lambda;
    let mut integral = vec![C::new(0.0, 0.0); n];
    for i in 1..n {
        let h = s.x_grid[i] - s.x_grid[i - 1];
        let f0 = w / (s.y[i - 1] * s.y[i - 1]);
        let f1 = w / (s.y[i] * s.y[i]);
        integral[i] = integral[i - 1] + (f0 + f1) * (0.5 * h);
    }
    let y: Vec<C> = (0..n).map(|i| s.y[i] * integral[i]).collect();
    let yp: Vec<C> = (0..n).map(|i| s.y_prime[i] * integral[i] + w / s.y[i]).collect();
    let mut channel = s.channel;
    channel.j = 3 - channel.j;
    channel.lambda = -channel.lambda;
    Ok(JostSample { channel, x_grid: s.x_grid.clone(), y, y_prime: yp, residual: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Deviation;
    use crate::quad::uniform_grid;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn lambda_examples() {
        let a = 0.7;
        let e = BAND_EDGE_EPS;
        assert!(close(lambda_channel(C::new(a + 1.0, 0.0), a, 1, e).unwrap(), C::new(1.0, 0.0), 1e-15));
        assert!(close(lambda_channel(C::new(a - 1.0, 0.0), a, 1, e).unwrap(), C::new(0.0, 1.0), 1e-15));
        assert!(close(lambda_channel(C::new(a + 4.0, 0.0), a, 2, e).unwrap(), C::new(-2.0, 0.0), 1e-15));
        assert!(matches!(lambda_channel(C::new(a, 0.0), a, 1, e), Err(Error::BandEdge { .. })));
    }

    #[test]
    fn half_root_count_examples() {
        assert_eq!(half_root_count(2.0, 1.0).unwrap(), 1);
        assert_eq!(half_root_count(0.0, 1.0).unwrap(), 0);
        assert!(matches!(half_root_count(1.0, 1.0), Err(Error::BandEdge { .. })));
    }

    #[test]
    fn bracket_examples() {
        let x = 0.37;
        let y = (I * 2.0 * x).exp();
        let yp = 2.0 * I * y;
        assert!(close(bracket(y, yp, y, yp), C::new(4.0, 0.0), 1e-14));
        let z = (-I * 2.0 * x).exp();
        let zp = -2.0 * I * z;
        assert!(close(bracket(y, yp, z, zp), C::new(0.0, 0.0), 1e-14));
        let r = C::new((-x).exp(), 0.0);
        assert!(close(bracket(r, -r, r, -r), C::new(0.0, 0.0), 1e-15));
    }

    #[test]
    fn free_jost_is_a_plane_wave() {
        let p = Potential::free(0.0);
        let grid = uniform_grid(-3.0, 3.0, 0.25);
        let s = solve_jost(&p, 4.0, Side::Plus, 1, &grid, &JostOptions::default()).unwrap();
        for (x, y) in grid.iter().zip(&s.y) {
            assert!(close(*y, (I * 2.0 * x).exp(), 1e-12));
        }
    }

    #[test]
    fn step_jost_matches_plane_wave_matching() {
        let p = Potential::step(0.0, 3.0);
        let grid = uniform_grid(-2.0, 2.0, 0.125);
        let s = solve_jost(&p, 4.0, Side::Plus, 1, &grid, &JostOptions::default()).unwrap();
        for (x, y) in grid.iter().zip(&s.y) {
            let expect = if *x >= 0.0 {
                (I * x).exp()
            } else {
                0.75 * (2.0 * I * x).exp() + 0.25 * (-2.0 * I * x).exp()
            };
            assert!(close(*y, expect, 1e-12), "x={x}: {y} vs {expect}");
        }
    }

    #[test]
    fn rk_route_agrees_with_exact_transfer_on_a_square_well() {
        // Same potential as a tabulated plateau forces the RK path; compare with exact transfer.
        let exact = Potential::free(0.0).with_deviation(Deviation::Square { x0: -1.0, width: 2.0, height: -2.0 });
        let tab = Potential::free(0.0).with_deviation(Deviation::Tabulated {
            x: vec![-1.0, 1.0],
            values: vec![-2.0, -2.0],
        });
        let grid = [-2.5, -1.0, 0.3, 1.5];
        let o = JostOptions::default();
        let a = solve_jost(&exact, 3.0, Side::Plus, 1, &grid, &o).unwrap();
        let b = solve_jost(&tab, 3.0, Side::Plus, 1, &grid, &o).unwrap();
        for i in 0..grid.len() {
            assert!(close(a.y[i], b.y[i], 1e-9), "{} vs {}", a.y[i], b.y[i]);
            assert!(close(a.y_prime[i], b.y_prime[i], 1e-9));
        }
    }

    #[test]
    fn residual_examples() {
        let p = Potential::free(0.0);
        let grid = uniform_grid(-1.0, 1.0, 1e-3);
        let mut s = solve_jost(&p, 4.0, Side::Plus, 1, &grid, &JostOptions::default()).unwrap();
        assert!(ode_residual(&p, &s, 4.0) <= 1e-8);
        s.y[1000] = C::new(0.0, 0.0);
        assert!(ode_residual(&p, &s, 4.0) > 0.1);

        let g = Potential::step(0.0, 1.0).with_deviation(Deviation::Gaussian { amplitude: -2.0, center: 0.5, width: 0.7 });
        let grid = uniform_grid(0.01, 3.0, 1e-2);
        let s = solve_jost(&g, 2.5, Side::Plus, 1, &grid, &JostOptions::default()).unwrap();
        assert!(s.residual < 1e-6, "residual {}", s.residual);
    }

    #[test]
    fn growing_channel_is_refused() {
        let p = Potential::step(0.0, 3.0);
        let r = solve_jost(&p, 1.0, Side::Plus, 2, &[0.0], &JostOptions::default());
        assert!(matches!(r, Err(Error::GrowingChannel { .. })));
    }

    #[test]
    fn growing_companion_has_the_right_wronskian() {
        let p = Potential::step(0.0, 3.0).with_deviation(Deviation::Gaussian { amplitude: 1.0, center: 1.0, width: 0.5 });
        let grid = uniform_grid(0.0, 4.0, 1e-3);
        let d = solve_jost(&p, 1.0, Side::Plus, 1, &grid, &JostOptions::default()).unwrap();
        let g = growing_from_decaying(&d).unwrap();
        let w_expect = -2.0 * I * d.channel.lambda;
        for i in (0..grid.len()).step_by(500) {
            let w = wronskian(d.y[i], d.y_prime[i], g.y[i], g.y_prime[i]);
            assert!(close(w, w_expect, 1e-12), "{w} vs {w_expect}");
        }
        // Grows like e^{κx}.
        let n = grid.len() - 1;
        let kappa = d.channel.lambda.im;
        let ratio = g.y[n].norm() / g.y[n / 2].norm();
        assert!((ratio.ln() - 2.0 * kappa).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn volterra_route_cross_checks_the_ode_route() {
        let p = Potential::step(0.0, 1.0).with_deviation(Deviation::Gaussian { amplitude: -2.0, center: 0.5, width: 0.7 });
        let o = JostOptions { far_margin: 6.0, ..Default::default() };
        let grid = uniform_grid(-2.0, 2.0, 0.01);
        for &(mu, side, j) in &[(2.5, Side::Plus, 1u8), (2.5, Side::Minus, 2u8), (0.5, Side::Plus, 1), (-0.3, Side::Minus, 2)] {
            let a = solve_jost(&p, mu, side, j, &grid, &o).unwrap();
            let b = solve_jost_volterra(&p, mu, side, j, &grid, &o).unwrap();
            let scale = a.y.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let diff = a.y.iter().zip(&b.y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(diff < 2e-4 * scale, "mu={mu} {side:?}: {diff} (scale {scale})");
        }
    }
}
