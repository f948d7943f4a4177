//! Scattering data turned into a μ-quadrature: interpolation of the sampled
//! S⁺ along each band, Gauss panels, and an analytic model of the
//! truncated tail beyond the last sample.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{composite_nodes, GaussLegendre};
use crate::special::oscillatory_tail;
use crate::spectral::{channel_weight, ScatteringData};

type C = Complex64;
const ZERO: C = C { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub lower_panels: usize,
    pub upper_panels: usize,
    pub order: usize,
    /// Degree parameter of the Floater-Hormann interpolant along each band.
    pub interp_degree: usize,
    /// Largest admissible modeled tail of F̃ beyond the last sample.
    pub tail_tol: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { lower_panels: 40, upper_panels: 200, order: 8, interp_degree: 4, tail_tol: 5e-3 }
    }
}

/// ω(x, t) = min(|x|, |t|) when xt ≥ 0, else 0.
pub fn omega(x: f64, t: f64) -> f64 {
    if x * t >= 0.0 {
        x.abs().min(t.abs())
    } else {
        0.0
    }
}

/// Floater-Hormann rational interpolation of vector values, evaluated on a
/// window of nearby nodes. A global barycentric sum over strongly clustered
/// nodes mixes weights of very different size and loses digits.
#[derive(Debug, Clone)]
struct Rational {
    nodes: Vec<f64>,
    values: Vec<[C; 4]>,
    degree: usize,
}

const WINDOW: usize = 12;

impl Rational {
    fn new(nodes: Vec<f64>, values: Vec<[C; 4]>, degree: usize) -> Self {
        Rational { nodes, values, degree }
    }

    /// Inside the node range the rational interpolant; outside it a quadratic
    /// through interpolated values spaced like the distance to the range, so
    /// that clustered end nodes do not amplify the extrapolation.
    fn eval(&self, v: f64) -> [C; 4] {
        let (lo, hi) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        let (end, dir) = if v < lo {
            (lo, 1.0)
        } else if v > hi {
            (hi, -1.0)
        } else {
            return self.inside(v);
        };
        let step = (v - end).abs().min(0.5 * (hi - lo));
        if step <= 0.0 {
            return self.inside(end);
        }
        let r = (v - end).abs() / step;
        let f: Vec<[C; 4]> = (0..3).map(|j| self.inside(end + dir * step * j as f64)).collect();
        // Lagrange weights at −r for nodes 0, 1, 2.
        let l = [(r + 1.0) * (r + 2.0) / 2.0, -r * (r + 2.0), r * (r + 1.0) / 2.0];
        let mut out = [ZERO; 4];
        for e in 0..4 {
            out[e] = f[0][e] * l[0] + f[1][e] * l[1] + f[2][e] * l[2];
        }
        out
    }

    fn inside(&self, v: f64) -> [C; 4] {
        let n = self.nodes.len();
        let m = WINDOW.min(n);
        let at = self.nodes.partition_point(|&x| x < v);
        let start = at.saturating_sub(m / 2).min(n - m);
        let xs = &self.nodes[start..start + m];
        let d = self.degree.min(m - 1);
        let mut num = [ZERO; 4];
        let mut den = 0.0;
        for k in 0..m {
            let dv = v - xs[k];
            if dv == 0.0 {
                return self.values[start + k];
            }
            let mut sum = 0.0;
            for i in k.saturating_sub(d)..=k.min(m - 1 - d) {
                let mut prod = 1.0;
                for j in i..=i + d {
                    if j != k {
                        prod /= (xs[k] - xs[j]).abs();
                    }
                }
                sum += prod;
            }
            let w = if (k + d) % 2 == 0 { sum } else { -sum };
            let c = w / dv;
            den += c;
            for e in 0..4 {
                num[e] += self.values[start + k][e] * c;
            }
        }
        num.map(|z| z / den)
    }
}

/// One node of the μ-quadrature with weights folded in (including 1/2π).
#[derive(Debug, Clone, Copy)]
enum Node {
    /// μ < a⁺: single closed channel, S⁺ scalar, λ₁⁺ = iκ.
    Closed { kappa: f64, c: f64 },
    /// μ > a⁺: channels ±k; `g[j][ν]` multiplies a_ν(x)·conj(a_j(t)); `bg` is the background weight.
    Open { k: f64, g: [[C; 2]; 2], bg: f64 },
}

/// One term e^{−ikφ}(α/k² + β/k⁴) of the reflection tail. A jump of q
/// contributes such a term with φ fixed by its position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub phi: f64,
    pub alpha: C,
    pub beta: C,
}

impl TailTerm {
    /// Coefficients of k^{-2} and k^{-4}.
    fn coefficients(&self) -> [(u32, C); 2] {
        [(2, self.alpha), (4, self.beta)]
    }
}

/// Asymptotic model R₁₂(k) ≈ Σ e^{−ikφ}(α/k² + β/k⁴) beyond k_cut, with
/// R = S/|λ′| − I.
#[derive(Debug, Clone)]
pub struct TailModel {
    pub k_cut: f64,
    pub terms: Vec<TailTerm>,
    /// Bound on the modeled F̃ tail.
    pub estimate: f64,
}

/// Scattering data prepared for kernel evaluation.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub a_plus: f64,
    pub a_minus: f64,
    bound: Vec<(f64, f64)>,
    nodes: Vec<Node>,
    pub tail: TailModel,
}

fn e1(kappa: f64, x: f64) -> f64 {
    if kappa * x.abs() < 1e-300 {
        -x
    } else {
        (-kappa * x).exp_m1() / kappa
    }
}

/// (e^{iλx} − 1)/λ for real λ.
fn a_fn(lambda: f64, x: f64) -> C {
    let th = lambda * x;
    if th.abs() < 1e-8 {
        return C::new(-0.5 * th * x, x);
    }
    let s = (0.5 * th).sin();
    C::new(-2.0 * s * s, th.sin()) / lambda
}

/// ∫_k^∞ e^{−iκφ}(e^{−iκx} − 1)(e^{−iκt} − 1)κ^{−n} dκ
fn tail_sum(n: u32, x: f64, t: f64, phi: f64, k: f64) -> C {
    oscillatory_tail(n, x + t + phi, k) - oscillatory_tail(n, x + phi, k) - oscillatory_tail(n, t + phi, k)
        + oscillatory_tail(n, phi, k)
}

impl Spectrum {
    pub fn new(d: &ScatteringData, opts: &QuadOptions) -> Result<Self> {
        d.validate()?;
        let (m1, m2) = (d.mu1(), d.mu2());
        let ap = d.a_plus;
        let upper = &d.bands[1];
        if upper.samples.is_empty() {
            return Err(Error::InvalidData("upper band has no samples".into()));
        }
        let mu_max = upper.interval[1].max(upper.samples.last().unwrap().mu);
        let reduced = |mu: f64, s: &crate::spectral::CMat| -> [C; 4] {
            let w = channel_weight(mu, ap);
            if mu < ap {
                // S⁺ grows like |λ′| at the threshold; S/|λ′| stays smooth.
                [s[(0, 0)] / w, ZERO, ZERO, ZERO]
            } else {
                [s[(0, 0)] / w - 1.0, s[(0, 1)] / w, s[(1, 0)] / w, s[(1, 1)] / w - 1.0]
            }
        };
        let rule = GaussLegendre::new(opts.order);
        let mut nodes = Vec::new();
        let inv2pi = 0.5 / PI;

        // Lower band in θ with μ = μ₁ + Δ·sin²θ.
        let lower = &d.bands[0];
        let span = m2 - m1;
        if span > 0.0 && !lower.samples.is_empty() {
            let vars: Vec<f64> = lower.samples.iter().map(|s| ((s.mu - m1) / span).sqrt().clamp(0.0, 1.0).asin()).collect();
            let vals: Vec<[C; 4]> = lower.samples.iter().map(|s| reduced(s.mu, &s.s)).collect();
            let interp = Rational::new(vars, vals, opts.interp_degree);
            for (th, wt) in composite_nodes(&rule, 0.0, FRAC_PI_2, opts.lower_panels) {
                let mu = m1 + span * th.sin().powi(2);
                let dmu = wt * span * (2.0 * th).sin() * inv2pi;
                nodes.push(make_node(mu, dmu, ap, interp.eval(th)));
            }
        } else if span > 0.0 {
            return Err(Error::InvalidData("lower band has no samples".into()));
        }

        // Upper band in u = √(μ − μ₂).
        let vars: Vec<f64> = upper.samples.iter().map(|s| (s.mu - m2).sqrt()).collect();
        let vals: Vec<[C; 4]> = upper.samples.iter().map(|s| reduced(s.mu, &s.s)).collect();
        let interp = Rational::new(vars, vals.clone(), opts.interp_degree);
        let umax = (mu_max - m2).sqrt();
        for (u, wt) in composite_nodes(&rule, 0.0, umax, opts.upper_panels) {
            let mu = m2 + u * u;
            nodes.push(make_node(mu, wt * 2.0 * u * inv2pi, ap, interp.eval(u)));
        }

        // Tail fitted to R₁₂ over the upper half of the sampled k range.
        let k_cut = (mu_max - ap).sqrt();
        let fit: Vec<(f64, C)> = upper
            .samples
            .iter()
            .zip(&vals)
            .map(|(s, v)| ((s.mu - ap).sqrt(), v[1]))
            .filter(|(k, _)| *k >= 0.5 * k_cut)
            .collect();
        let terms = fit_tail(&fit, k_cut);
        let at_cut: f64 =
            terms.iter().map(|t| t.coefficients().iter().map(|&(n, c)| c * k_cut.powi(2 - n as i32)).sum::<C>().norm()).sum();
        let magnitude = fit.iter().map(|(k, r)| r.norm() * k * k).fold(at_cut, f64::max);
        let estimate = 4.0 * magnitude / (3.0 * PI * k_cut.powi(3));
        if estimate > opts.tail_tol {
            return Err(Error::TailTooShort(format!(
                "modeled tail {estimate:.3e} beyond mu_max={mu_max} exceeds {:.3e}",
                opts.tail_tol
            )));
        }
        let bound = d.bound_states.iter().map(|b| ((ap - b.mu).sqrt(), b.n)).collect();
        Ok(Spectrum {
            a_plus: ap,
            a_minus: d.a_minus,
            bound,
            nodes,
            tail: TailModel { k_cut, terms, estimate },
        })
    }

    /// F̃⁺(x, t) with the free background integrated in closed form.
    pub fn f_tilde(&self, x: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for &(kappa, n) in &self.bound {
            acc += n * e1(kappa, x) * e1(kappa, t);
        }
        let mut z = ZERO;
        for node in &self.nodes {
            match *node {
                Node::Closed { kappa, c } => acc += c * e1(kappa, x) * e1(kappa, t),
                Node::Open { k, g, .. } => {
                    let ax = [a_fn(k, x), a_fn(-k, x)];
                    let at = [a_fn(k, t), a_fn(-k, t)];
                    for j in 0..2 {
                        for nu in 0..2 {
                            z += g[j][nu] * ax[nu] * at[j].conj();
                        }
                    }
                }
            }
        }
        acc + z.re + self.f_tilde_tail(x, t)
    }

    fn f_tilde_tail(&self, x: f64, t: f64) -> f64 {
        let k = self.tail.k_cut;
        let mut z = ZERO;
        for term in &self.tail.terms {
            for (n, c) in term.coefficients() {
                if c != ZERO {
                    z += c * tail_sum(n + 2, x, t, term.phi, k);
                }
            }
        }
        -z.re / PI
    }

    /// F̃⁺(x, t) evaluated literally: the full S⁺ is integrated and ω subtracted.
    pub fn f_tilde_raw(&self, x: f64, t: f64) -> f64 {
        let mut acc = self.f_tilde(x, t);
        let mut z = ZERO;
        for node in &self.nodes {
            if let Node::Open { k, bg, .. } = *node {
                let a1x = a_fn(k, x);
                let a1t = a_fn(k, t);
                // a₂ = conj(a₁) for real k.
                z += (a1x * a1t.conj() + a1x.conj() * a1t) * bg;
            }
        }
        acc += z.re;
        // Background beyond the last sample, then ω.
        let k = self.tail.k_cut;
        let bgt = oscillatory_tail(2, t - x, k) - oscillatory_tail(2, -x, k) - oscillatory_tail(2, t, k)
            + oscillatory_tail(2, 0.0, k);
        acc + bgt.re / PI - omega(x, t)
    }

    /// F⁺(x, t) by direct quadrature of the differentiated integrand.
    pub fn f_direct(&self, x: f64, t: f64) -> f64 {
        let s = x + t;
        let mut acc = 0.0;
        for &(kappa, n) in &self.bound {
            acc += n * (-kappa * s).exp();
        }
        let mut z = ZERO;
        for node in &self.nodes {
            match *node {
                Node::Closed { kappa, c } => acc += c * (-kappa * s).exp(),
                Node::Open { k, g, .. } => {
                    let ex = [C::from_polar(1.0, k * x), C::from_polar(1.0, -k * x)];
                    let et = [C::from_polar(1.0, k * t), C::from_polar(1.0, -k * t)];
                    for j in 0..2 {
                        for nu in 0..2 {
                            z += g[j][nu] * ex[nu] * et[j].conj();
                        }
                    }
                }
            }
        }
        acc + z.re + self.f_direct_tail(s)
    }

    fn f_direct_tail(&self, s: f64) -> f64 {
        let k = self.tail.k_cut;
        let mut z = ZERO;
        for term in &self.tail.terms {
            for (n, c) in term.coefficients() {
                if c != ZERO {
                    z += c * oscillatory_tail(n, s + term.phi, k);
                }
            }
        }
        z.re / PI
    }

    /// Columns Φ_m(x) and the block coefficients pairing Φ_m(x) with conj(Φ_m'(t)).
    fn basis(&self, xs: &[f64], differentiated: bool) -> (DMatrix<f64>, DMatrix<f64>, Vec<Block>) {
        let mut blocks = Vec::new();
        let mut m = 0usize;
        for &(kappa, n) in &self.bound {
            blocks.push(Block::Real { col: m, kappa, c: n });
            m += 1;
        }
        for node in &self.nodes {
            match *node {
                Node::Closed { kappa, c } => {
                    blocks.push(Block::Real { col: m, kappa, c });
                    m += 1;
                }
                Node::Open { k, g, .. } => {
                    blocks.push(Block::Pair { col: m, k, g });
                    m += 2;
                }
            }
        }
        let mut re = DMatrix::<f64>::zeros(xs.len(), m);
        let mut im = DMatrix::<f64>::zeros(xs.len(), m);
        for b in &blocks {
            match *b {
                Block::Real { col, kappa, .. } => {
                    for (i, &x) in xs.iter().enumerate() {
                        re[(i, col)] = if differentiated { (-kappa * x).exp() } else { e1(kappa, x) };
                    }
                }
                Block::Pair { col, k, .. } => {
                    for (i, &x) in xs.iter().enumerate() {
                        let (v1, v2) = if differentiated {
                            (C::from_polar(1.0, k * x), C::from_polar(1.0, -k * x))
                        } else {
                            (a_fn(k, x), a_fn(-k, x))
                        };
                        re[(i, col)] = v1.re;
                        im[(i, col)] = v1.im;
                        re[(i, col + 1)] = v2.re;
                        im[(i, col + 1)] = v2.im;
                    }
                }
            }
        }
        (re, im, blocks)
    }

    /// Matrix of F̃⁺(xs[i], ts[j]) (`differentiated = false`) or of the
    /// direct F⁺ (`differentiated = true`), including the tail model.
    pub fn grid(&self, xs: &[f64], ts: &[f64], differentiated: bool) -> DMatrix<f64> {
        let (xr, xi, blocks) = self.basis(xs, differentiated);
        let (tr, ti, _) = self.basis(ts, differentiated);
        // B = C·conj(Φ(t))ᵀ, laid out as (m × T).
        let m = xr.ncols();
        let nt = ts.len();
        let mut br = DMatrix::<f64>::zeros(m, nt);
        let mut bi = DMatrix::<f64>::zeros(m, nt);
        for b in &blocks {
            match *b {
                Block::Real { col, c, .. } => {
                    for j in 0..nt {
                        br[(col, j)] = c * tr[(j, col)];
                    }
                }
                Block::Pair { col, g, .. } => {
                    // Row ν of B collects Σ_j g[j][ν]·conj(Φ_j(t)).
                    for j in 0..nt {
                        let phi = [C::new(tr[(j, col)], ti[(j, col)]), C::new(tr[(j, col + 1)], ti[(j, col + 1)])];
                        for nu in 0..2 {
                            let v = g[0][nu] * phi[0].conj() + g[1][nu] * phi[1].conj();
                            br[(col + nu, j)] = v.re;
                            bi[(col + nu, j)] = v.im;
                        }
                    }
                }
            }
        }
        let mut out = &xr * &br - &xi * &bi;
        let tails: Vec<(usize, usize, f64)> = (0..xs.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = xs[i];
                (0..nt).map(move |j| (i, j, x))
            })
            .map(|(i, j, x)| {
                let t = ts[j];
                let v = if differentiated { self.f_direct_tail(x + t) } else { self.f_tilde_tail(x, t) };
                (i, j, v)
            })
            .collect();
        for (i, j, v) in tails {
            out[(i, j)] += v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Real { col: usize, kappa: f64, c: f64 },
    Pair { col: usize, k: f64, g: [[C; 2]; 2] },
}

fn make_node(mu: f64, dmu: f64, ap: f64, v: [C; 4]) -> Node {
    let w = channel_weight(mu, ap);
    if mu < ap {
        Node::Closed { kappa: (ap - mu).sqrt(), c: dmu * w * v[0].re }
    } else {
        let f = dmu * w;
        Node::Open {
            k: (mu - ap).sqrt(),
            g: [[v[0] * f, v[1] * f], [v[2] * f, v[3] * f]],
            bg: f,
        }
    }
}

/// Least squares of c(k) = k²R₁₂(k) by Σ e^{−ikφ}(α + βz), z = (k_cut/k)²,
/// for a fixed set of frequencies; returns the coefficients and the residual
/// norm.
fn project(samples: &[(f64, C)], phis: &[f64], k_cut: f64) -> (Vec<[C; 2]>, f64) {
    let n = samples.len();
    let m = 2 * phis.len();
    let a = DMatrix::<C>::from_fn(n, m, |i, j| {
        let k = samples[i].0;
        C::from_polar(1.0, -k * phis[j / 2]) * (k_cut / k).powi(2 * (j % 2) as i32)
    });
    let b = nalgebra::DVector::<C>::from_iterator(n, samples.iter().map(|&(k, r)| r * k * k));
    if m == 0 {
        return (Vec::new(), b.norm());
    }
    let Ok(c) = a.clone().svd(true, true).solve(&b, 1e-13) else {
        return (vec![[ZERO; 2]; phis.len()], b.norm());
    };
    let res = (&b - &a * &c).norm();
    let coef = (0..phis.len()).map(|j| [c[2 * j], c[2 * j + 1] * k_cut * k_cut]).collect();
    (coef, res)
}

/// Frequencies are found on all of `samples` (the longer the k range, the
/// finer the resolution) and added greedily from a scan of [−Φ, Φ], Φ set by the
/// sample spacing and kept apart by the resolution 2π/(k range), then
/// refined jointly by golden-section sweeps. A new frequency must cut the
/// residual by 10% and carry at least 1% of the largest 1/k² amplitude, so
/// that the error of the two-term expansion itself is not fitted by side
/// lobes; the search also stops once the residual is below 1e-9 of the data.
fn fit_tail(samples: &[(f64, C)], k_cut: f64) -> Vec<TailTerm> {
    const MAX_TERMS: usize = 4;
    const MIN_RELATIVE_AMPLITUDE: f64 = 1e-2;
    // Amplitudes come from the top quarter, closest to the asymptotic regime.
    let top: Vec<(f64, C)> = samples.iter().copied().filter(|s| s.0 >= 0.75 * k_cut).collect();
    let terms = |phis: &[f64]| -> Vec<TailTerm> {
        let data = if top.len() >= 4 * phis.len().max(1) { &top[..] } else { samples };
        let (coef, _) = project(data, phis, k_cut);
        phis.iter().zip(coef).map(|(&phi, [alpha, beta])| TailTerm { phi, alpha, beta }).collect()
    };
    match samples.len() {
        0 => return Vec::new(),
        1..=3 => return terms(&[0.0]),
        _ => {}
    }
    let k_lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let k_hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let dk = samples.windows(2).map(|w| (w[1].0 - w[0].0).abs()).fold(0.0, f64::max);
    let phi_max = 0.8 * PI / dk;
    let dphi = PI / (4.0 * (k_hi - k_lo));
    // Frequencies closer than the resolution of the window are not told apart.
    let sep = 2.0 * PI / (k_hi - k_lo);
    let scan: Vec<f64> = {
        let n = (phi_max / dphi).ceil() as i64;
        (-n..=n).map(|i| i as f64 * dphi).collect()
    };
    let mut phis: Vec<f64> = Vec::new();
    let (_, mut res) = project(samples, &phis, k_cut);
    let floor = 1e-9 * res;
    while phis.len() < MAX_TERMS && res > floor {
        let best = scan
            .par_iter()
            .filter(|&&phi| phis.iter().all(|&q| (phi - q).abs() >= sep))
            .map(|&phi| {
                let mut trial = phis.clone();
                trial.push(phi);
                (project(samples, &trial, k_cut).1, phi)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((r, phi)) = best else { break };
        if !(r < 0.9 * res) {
            break;
        }
        let mut trial = phis.clone();
        trial.push(phi);
        let (coef, _) = project(samples, &trial, k_cut);
        let largest = coef.iter().map(|c| c[0].norm()).fold(0.0, f64::max);
        if !(coef[coef.len() - 1][0].norm() >= MIN_RELATIVE_AMPLITUDE * largest) {
            break;
        }
        phis.push(phi);
        res = r;
        // Coordinate sweeps at full width until the frequencies settle, then
        // with shrinking brackets.
        let mut delta = dphi;
        let mut sweeps = 0;
        while delta > 1e-12 && sweeps < 200 {
            sweeps += 1;
            let mut moved: f64 = 0.0;
            for j in 0..phis.len() {
                let eval = |v: f64| {
                    let mut trial = phis.clone();
                    trial[j] = v;
                    project(samples, &trial, k_cut).1
                };
                let (mut lo, mut hi) = (phis[j] - delta, phis[j] + delta);
                for (i, &q) in phis.iter().enumerate() {
                    if i != j && q < phis[j] {
                        lo = lo.max(q + sep);
                    } else if i != j {
                        hi = hi.min(q - sep);
                    }
                }
                let v = golden_min(eval, lo, hi);
                let r = eval(v);
                if r < res {
                    moved = moved.max((v - phis[j]).abs());
                    phis[j] = v;
                    res = r;
                }
            }
            if moved < 0.25 * delta {
                delta *= 0.5;
            }
        }
    }
    terms(&phis)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..30 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_examples() {
        assert_eq!(omega(1.0, 2.0), 1.0);
        assert_eq!(omega(-1.0, 2.0), 0.0);
        assert_eq!(omega(-2.0, -3.0), 2.0);
    }

    #[test]
    fn rational_interpolant_is_accurate_on_smooth_data() {
        let rule = GaussLegendre::new(24);
        let nodes: Vec<f64> = rule.on(0.0, 3.0).map(|p| p.0).collect();
        let vals = nodes.iter().map(|&v| [C::new(v.sin(), v.cos()), ZERO, ZERO, ZERO]).collect();
        let r = Rational::new(nodes, vals, 4);
        for &v in &[0.01, 0.77, 1.5, 2.99] {
            let e = r.eval(v)[0] - C::new(f64::sin(v), f64::cos(v));
            assert!(e.norm() < 1e-6, "{v}: {e}");
        }
    }

    #[test]
    fn a_fn_small_and_large_arguments() {
        for &(l, x) in &[(1e-12, 3.0), (2.0, 0.7), (-3.0, -1.1)] {
            let exact = (C::new(0.0, l * x).exp() - 1.0) / l;
            assert!((a_fn(l, x) - exact).norm() < 1e-9 * exact.norm().max(1e-3));
        }
    }

    #[test]
    fn tail_fit_recovers_two_term_model() {
        let kc = 10.0;
        let (a, b) = (C::new(0.3, -0.1), C::new(-2.0, 0.5));
        let s: Vec<(f64, C)> = [8.0, 9.0, 10.0].iter().map(|&k: &f64| (k, a / (k * k) + b / k.powi(4))).collect();
        let t = fit_tail(&s, kc);
        assert_eq!(t.len(), 1);
        assert!(t[0].phi == 0.0 && (t[0].alpha - a).norm() < 1e-12 && (t[0].beta - b).norm() < 1e-10);
    }

    #[test]
    fn tail_fit_finds_oscillating_terms() {
        let kc = 10.0;
        let model = [(0.0, C::new(-0.5, 0.0), C::new(0.4, 0.1)), (2.0, C::new(1.5, -0.3), C::new(-1.0, 0.0))];
        let s: Vec<(f64, C)> = (0..100)
            .map(|i| {
                let k = 5.0 + 0.05 * i as f64;
                let r = model
                    .iter()
                    .map(|&(p, a, b)| C::from_polar(1.0, -k * p) * (a / (k * k) + b / k.powi(4)))
                    .sum();
                (k, r)
            })
            .collect();
        let mut t = fit_tail(&s, kc);
        t.sort_by(|a, b| a.phi.total_cmp(&b.phi));
        assert_eq!(t.len(), 2, "{t:?}");
        for (term, &(p, a, b)) in t.iter().zip(&model) {
            assert!((term.phi - p).abs() < 1e-8, "{term:?}");
            assert!((term.alpha - a).norm() < 1e-7 && (term.beta - b).norm() < 1e-5, "{term:?}");
        }
    }
}
