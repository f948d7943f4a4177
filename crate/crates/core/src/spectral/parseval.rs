//! Generalized Parseval equality as a numerical check of completeness.
//!
//! On an open-right band φⱼ = (2π)^{-1/2}·Σ_ν √|λ′_ν|·A⁺_{jν}·y_ν⁺ exactly, so
//! Σⱼ|Fⱼ(μ)|² = (2π)^{-1}·Σ_{νν'} G_ν·S⁺_{νν'}·conj(G_ν') with G_ν = ∫f·conj(y_ν⁺).
//! On the closed-right band only ν = 1 occurs. The continuous part therefore
//! needs S⁺ and the right Jost solutions only.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{band_edges, scattering_matrix_with, ScatteringData, SpectralOptions};
use crate::error::{Error, Result};
use crate::jost::{solve_jost, Side};
use crate::potentials::Potential;
use crate::quad::{composite_nodes, GaussLegendre};

/// A real function sampled on an increasing grid; zero outside it.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let values = x.iter().map(|&t| f(t)).collect();
        SampledFunction { x, values }
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.x.len();
        let mut w = vec![0.0; n];
        for i in 1..n {
            let h = 0.5 * (self.x[i] - self.x[i - 1]);
            w[i - 1] += h;
            w[i] += h;
        }
        w
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParsevalOptions {
    /// Upper end of the μ integral; `None` takes the last sample of the data.
    pub mu_max: Option<f64>,
    pub lower_panels: usize,
    pub upper_panels: usize,
    pub order: usize,
    pub spectral: SpectralOptions,
}

impl Default for ParsevalOptions {
    fn default() -> Self {
        ParsevalOptions {
            mu_max: None,
            lower_panels: 20,
            upper_panels: 200,
            order: 8,
            spectral: SpectralOptions { edge_eps: Some(1e-12), ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParsevalReport {
    pub norm_sq: f64,
    pub discrete: f64,
    pub continuous: f64,
    /// |‖f‖² − discrete − continuous| / ‖f‖²
    pub residual: f64,
}

pub fn parseval_residual(p: &Potential, d: &ScatteringData, f: &SampledFunction) -> Result<f64> {
    Ok(parseval_report(p, d, f, &ParsevalOptions::default())?.residual)
}

pub fn parseval_report(p: &Potential, d: &ScatteringData, f: &SampledFunction, opts: &ParsevalOptions) -> Result<ParsevalReport> {
    if f.x.len() != f.values.len() || f.x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("probe function needs an increasing grid matching its values".into()));
    }
    let w = f.weights();
    let norm_sq: f64 = w.iter().zip(&f.values).map(|(w, v)| w * v * v).sum();
    if norm_sq == 0.0 {
        return Ok(ParsevalReport { norm_sq, discrete: 0.0, continuous: 0.0, residual: 0.0 });
    }
    let so = &opts.spectral;
    let inner = |mu: f64, j: u8| -> Result<Complex64> {
        let s = solve_jost(p, mu, Side::Plus, j, &f.x, &so.jost)?;
        Ok(s.y.iter().zip(&f.values).zip(&w).map(|((y, v), w)| y.conj() * (v * w)).sum())
    };

    let mut discrete = 0.0;
    for b in &d.bound_states {
        let g = inner(b.mu, 1)?.re;
        discrete += b.n * g * g;
    }

    let (m1, m2) = band_edges(p);
    let mu_max = opts.mu_max.unwrap_or_else(|| d.mu_max());
    let rule = GaussLegendre::new(opts.order);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    if m2 > m1 {
        let span = m2 - m1;
        for (t, wt) in composite_nodes(&rule, 0.0, FRAC_PI_2, opts.lower_panels) {
            nodes.push((m1 + span * t.sin().powi(2), wt * span * (2.0 * t).sin()));
        }
    }
    if mu_max > m2 {
        for (u, wt) in composite_nodes(&rule, 0.0, (mu_max - m2).sqrt(), opts.upper_panels) {
            nodes.push((m2 + u * u, wt * 2.0 * u));
        }
    }
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&(mu, wt)| -> Result<f64> {
            let s = scattering_matrix_with(p, mu, so)?;
            let n = s.nrows();
            let g: Vec<Complex64> = (1..=n as u8).map(|j| inner(mu, j)).collect::<Result<_>>()?;
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    acc += g[a] * s[(a, b)] * g[b].conj();
                }
            }
            Ok(wt * acc.re / (2.0 * PI))
        })
        .collect::<Result<_>>()?;
    let continuous: f64 = parts.iter().sum();
    let residual = (norm_sq - discrete - continuous).abs() / norm_sq;
    Ok(ParsevalReport { norm_sq, discrete, continuous, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Deviation;
    use crate::quad::uniform_grid;
    use crate::spectral::{forward_scatter, BandGrids};

    #[test]
    fn zero_probe_has_zero_residual() {
        let p = Potential::free(0.0);
        let d = forward_scatter(&p, &BandGrids::standard(&p, 4, 400.0, 1e-4).unwrap(), -1.0).unwrap();
        let f = SampledFunction::from_fn(uniform_grid(-1.0, 1.0, 0.1), |_| 0.0);
        assert_eq!(parseval_residual(&p, &d, &f).unwrap(), 0.0);
    }

    #[test]
    fn free_gaussian_probe() {
        let p = Potential::free(0.0);
        let d = forward_scatter(&p, &BandGrids::standard(&p, 8, 400.0, 1e-4).unwrap(), -1.0).unwrap();
        let f = SampledFunction::from_fn(uniform_grid(-6.0, 6.0, 0.01), |x| (-x * x).exp());
        let r = parseval_report(&p, &d, &f, &ParsevalOptions::default()).unwrap();
        assert!(r.residual <= 1e-3, "{r:?}");
    }

    #[test]
    fn bound_eigenfunction_probe_is_purely_discrete() {
        let p = Potential::step(0.0, 2.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -8.0 });
        let d = forward_scatter(&p, &BandGrids::standard(&p, 8, 102.0, 3e-4).unwrap(), -7.0).unwrap();
        let b = d.bound_states[0];
        let x = uniform_grid(-12.0, 12.0, 0.005);
        let s = solve_jost(&p, b.mu, Side::Plus, 1, &x, &Default::default()).unwrap();
        let f = SampledFunction { x, values: s.y.iter().map(|y| y.re * b.n.sqrt()).collect() };
        let r = parseval_report(&p, &d, &f, &ParsevalOptions { upper_panels: 100, ..Default::default() }).unwrap();
        assert!((r.discrete / r.norm_sq - 1.0).abs() < 1e-3, "{r:?}");
        assert!(r.continuous / r.norm_sq < 1e-3, "{r:?}");
    }
}
