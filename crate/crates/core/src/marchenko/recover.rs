//! Recovery of a⁺ and q, the kernel estimates, and the full inverse pipeline.

use serde::Serialize;

use nalgebra::DMatrix;

use super::solve::{factorization_defects, kernel_inverse_pair, solve_marchenko, MarchenkoStats};
use super::spectrum::{QuadOptions, Spectrum};
use super::{build_f_from, uniform_step, FMethod, KernelGrid};
use crate::error::{Error, Result};
use crate::potentials::{eval_q, h1_plus, h_plus, MomentOptions, Potential};
use crate::quad::uniform_grid;
use crate::spectral::ScatteringData;

/// q = a⁺ − 2·d/dx K(x, x) by central differences, second-order one-sided at the ends.
pub fn recover_q(k_diag: &[f64], h: f64, a_plus: f64) -> Vec<f64> {
    let n = k_diag.len();
    let d: Vec<f64> = match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => vec![(k_diag[1] - k_diag[0]) / h; 2],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * k_diag[0] + 4.0 * k_diag[1] - k_diag[2]) / (2.0 * h)
                } else if i == n - 1 {
                    (3.0 * k_diag[n - 1] - 4.0 * k_diag[n - 2] + k_diag[n - 3]) / (2.0 * h)
                } else {
                    (k_diag[i + 1] - k_diag[i - 1]) / (2.0 * h)
                }
            })
            .collect(),
    };
    d.iter().map(|v| a_plus - 2.0 * v).collect()
}

/// a⁺ = lim μ − 1/(4 S₁₁⁺(μ)²): least-squares fit of a + b/μ over the upper
/// half of the top band, evaluated at μ = ∞.
pub fn estimate_a_plus(d: &ScatteringData) -> f64 {
    let band = &d.bands[d.bands.len() - 1];
    let lo = band.samples.first().map(|s| s.mu).unwrap_or(d.mu2());
    let hi = d.mu_max();
    let pts: Vec<(f64, f64)> = band
        .samples
        .iter()
        .filter(|s| s.mu >= 0.5 * (lo + hi))
        .map(|s| {
            let v = s.s[(0, 0)].re;
            (1.0 / s.mu, s.mu - 1.0 / (4.0 * v * v))
        })
        .collect();
    match pts.len() {
        0 => d.a_plus,
        1 => pts[0].1,
        _ => {
            let n = pts.len() as f64;
            let (sz, sv) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
            let (mz, mv) = (sz / n, sv / n);
            let (szz, szv) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mz).powi(2), a.1 + (p.0 - mz) * (p.1 - mv)));
            if szz <= 1e-30 {
                return mv;
            }
            mv - szv / szz * mz
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub k_violations: usize,
    pub h_violations: usize,
    /// max of |kernel| / bound over entries where the bound exceeds the floor
    pub max_ratio_k: f64,
    pub max_ratio_h: f64,
    /// decreasing majorant σ(s) of |F| over (x + t)/2 ≥ s, on the half-step grid
    pub sigma: Vec<(f64, f64)>,
    pub sigma_integral: f64,
}

/// |K(x, t)|, |H(x, t)| ≤ ½h⁺((x+t)/2)·exp[h₁⁺(x) − h₁⁺((x+t)/2)] with a
/// relative `slack` and an absolute floor for discretization noise; also the
/// decreasing majorant of |F| when F is given.
pub fn kernel_bound_check(
    k: &KernelGrid,
    h: &KernelGrid,
    f: Option<&KernelGrid>,
    p: &Potential,
    slack: f64,
    floor: f64,
) -> Result<BoundReport> {
    let g = &k.x_grid;
    let step = uniform_step(&k.t_grid)?;
    let mo = MomentOptions::default();
    // Midpoints (x+t)/2 of grid nodes sit on the half-step grid.
    let half0 = g[0];
    let nh = 2 * (k.t_grid.len() - 1) + 1;
    let mids: Vec<f64> = (0..nh).map(|m| half0 + 0.5 * step * m as f64).collect();
    let hp: Vec<f64> = mids.iter().map(|&s| h_plus(p, s, mo)).collect::<Result<_>>()?;
    let h1m: Vec<f64> = mids.iter().map(|&s| h1_plus(p, s, mo)).collect::<Result<_>>()?;
    let h1x: Vec<f64> = g.iter().map(|&x| h1_plus(p, x, mo)).collect::<Result<_>>()?;
    let check = |kg: &KernelGrid| -> (usize, f64) {
        let mut count = 0;
        let mut ratio: f64 = 0.0;
        for (i, &x) in kg.x_grid.iter().enumerate() {
            let Some(ti) = kg.t_index(x) else { continue };
            let ix = ((x - half0) / step).round() as usize;
            for j in ti..kg.t_grid.len() {
                let m = ix + j;
                if m >= nh {
                    continue;
                }
                let bound = 0.5 * hp[m] * (h1x[i] - h1m[m]).exp();
                let v = kg.values[(i, j)].abs();
                if v > (1.0 + slack) * bound + floor {
                    count += 1;
                }
                if bound > floor {
                    ratio = ratio.max(v / bound);
                }
            }
        }
        (count, ratio)
    };
    let (k_violations, max_ratio_k) = check(k);
    let (h_violations, max_ratio_h) = check(h);
    let mut sigma = Vec::new();
    let mut sigma_integral = 0.0;
    if let Some(f) = f {
        let mut best = vec![0.0f64; nh];
        for (i, &x) in f.x_grid.iter().enumerate() {
            for (j, &t) in f.t_grid.iter().enumerate() {
                let m = ((0.5 * (x + t) - half0) / (0.5 * step)).round();
                if m >= 0.0 && (m as usize) < nh {
                    let m = m as usize;
                    best[m] = best[m].max(f.values[(i, j)].abs());
                }
            }
        }
        for m in (0..nh.saturating_sub(1)).rev() {
            best[m] = best[m].max(best[m + 1]);
        }
        for m in 1..nh {
            sigma_integral += 0.25 * step * (best[m - 1] + best[m]);
        }
        sigma = mids.iter().copied().zip(best).collect();
    }
    Ok(BoundReport { k_violations, h_violations, max_ratio_k, max_ratio_h, sigma, sigma_integral })
}

#[derive(Debug, Clone, Copy)]
pub struct InverseOptions {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub quad: QuadOptions,
    /// Truncation of the Marchenko integral; chosen from the decay of F when `None`.
    pub t_max: Option<f64>,
    pub t_max_tol: f64,
    /// Largest distance of an automatic t_max beyond x_max.
    pub t_max_extent: f64,
    pub f_method: FMethod,
    pub cond_max: f64,
    pub solver_tol: f64,
    /// Combine the solves at h and h/2 as (4K_{h/2} − K_h)/3, removing the
    /// O(h²) term of the trapezoid rule.
    pub extrapolate: bool,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            x_min: -4.0,
            x_max: 4.0,
            h: 0.05,
            quad: QuadOptions::default(),
            t_max: None,
            t_max_tol: 1e-8,
            t_max_extent: 8.0,
            f_method: FMethod::DifferenceQuotient,
            cond_max: 1e8,
            solver_tol: 1e-8,
            extrapolate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub x_grid: Vec<f64>,
    pub q_recovered: Vec<f64>,
    pub a_plus_estimate: f64,
    pub marchenko_residual: f64,
    /// sup |q_recovered − q| against a reference potential, away from its jumps
    pub roundtrip_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub report: RecoveryReport,
    pub f: KernelGrid,
    pub k: KernelGrid,
    pub t_max: f64,
    pub stats: MarchenkoStats,
    /// Raw trapezoid solutions (F, K) at h and, when extrapolating, at h/2.
    pub levels: Vec<(KernelGrid, KernelGrid)>,
}

/// (4·fine − coarse)/3 on the coarse nodes; `fine` lives on the halved grid.
fn richardson(coarse: &DMatrix<f64>, fine: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(coarse.nrows(), coarse.ncols(), |i, j| (4.0 * fine[(2 * i, 2 * j)] - coarse[(i, j)]) / 3.0)
}

impl Reconstruction {
    /// K(x, x) on the report grid.
    pub fn k_diagonal(&self) -> Vec<f64> {
        (0..self.report.x_grid.len()).map(|i| self.k.values[(i, i)]).collect()
    }

    /// H⁺ from the discrete inverse of each raw level, extrapolated like K.
    pub fn h(&self) -> Result<KernelGrid> {
        let hs: Vec<KernelGrid> = self.levels.iter().map(|(_, k)| kernel_inverse_pair(k)).collect::<Result<_>>()?;
        let mut out = hs[0].clone();
        if let [coarse, fine] = hs.as_slice() {
            out.values = richardson(&coarse.values, &fine.values);
        }
        Ok(out)
    }

    /// Factorization residual of the raw levels; with two levels the defect
    /// fields are extrapolated to h → 0 before taking the maximum.
    pub fn factorization_residual(&self) -> Result<f64> {
        let d: Vec<DMatrix<f64>> = self
            .levels
            .iter()
            .map(|(f, k)| factorization_defects(f, &kernel_inverse_pair(k)?))
            .collect::<Result<_>>()?;
        Ok(match d.as_slice() {
            [coarse, fine] => richardson(coarse, fine).amax(),
            _ => d[0].amax(),
        })
    }
}

/// Smallest grid node t ≥ x_max past which |F(x_min, ·)| stays below `tol`
/// over a window of length 2, capped at x_max + extent.
fn choose_t_max(spec: &Spectrum, o: &InverseOptions) -> f64 {
    let cap = o.x_max + o.t_max_extent;
    let ts = uniform_grid(o.x_max, cap + 2.0, o.h);
    let vals: Vec<f64> = ts.iter().map(|&t| spec.f_direct(o.x_min, t).abs()).collect();
    let window = (2.0 / o.h).round() as usize;
    for i in 0..ts.len() {
        if ts[i] > cap {
            break;
        }
        if i + window < vals.len() && vals[i..=i + window].iter().all(|&v| v < o.t_max_tol) {
            return ts[i];
        }
    }
    cap
}

/// sup and L¹ distance between recovered and reference q on `x`, skipping
/// points within `exclude` of a jump of the reference.
pub fn roundtrip_errors(p: &Potential, x: &[f64], q: &[f64], exclude: f64) -> (f64, f64) {
    let jumps: Vec<f64> =
        p.breakpoints().into_iter().filter(|&b| (eval_q(p, b + 1e-9) - eval_q(p, b - 1e-9)).abs() > 1e-6).collect();
    let mut sup: f64 = 0.0;
    let mut l1 = 0.0;
    let h = if x.len() > 1 { x[1] - x[0] } else { 0.0 };
    for (i, (&xi, &qi)) in x.iter().zip(q).enumerate() {
        if jumps.iter().any(|&b| (xi - b).abs() <= exclude + 1e-12) {
            continue;
        }
        let e = (qi - eval_q(p, xi)).abs();
        sup = sup.max(e);
        let w = if i == 0 || i == x.len() - 1 { 0.5 * h } else { h };
        l1 += w * e;
    }
    (sup, l1)
}

/// Full inverse map: F on [x_min, t_max]², Marchenko rows, K(x, x) and q.
pub fn reconstruct(d: &ScatteringData, o: &InverseOptions, reference: Option<&Potential>) -> Result<Reconstruction> {
    if !(o.h > 0.0) || !(o.x_max > o.x_min) {
        return Err(Error::InvalidGrid(format!("bad reconstruction grid [{}, {}] step {}", o.x_min, o.x_max, o.h)));
    }
    let spec = Spectrum::new(d, &o.quad)?;
    let t_end = match o.t_max {
        Some(t) => t,
        None => choose_t_max(&spec, o),
    };
    let n_report = ((o.x_max - o.x_min) / o.h).round() as usize + 1;
    let n_total = ((t_end - o.x_min) / o.h).round() as usize + 1;
    if n_total < n_report {
        return Err(Error::InvalidGrid("t_max must not lie below x_max".into()));
    }
    let g: Vec<f64> = (0..n_total).map(|i| o.x_min + o.h * i as f64).collect();
    let t_max = g[n_total - 1];
    let solve = |g: &[f64]| -> Result<(KernelGrid, KernelGrid, MarchenkoStats)> {
        let f = build_f_from(&spec, g, g, o.f_method)?;
        let (k, stats) = solve_marchenko(&f, o.cond_max)?;
        if !(stats.max_residual <= o.solver_tol) {
            return Err(Error::NoConvergence(format!(
                "Marchenko residual {:.3e} above {:.3e}",
                stats.max_residual, o.solver_tol
            )));
        }
        Ok((f, k, stats))
    };
    let (f, k0, mut stats) = solve(&g)?;
    let mut k = k0.clone();
    let mut levels = vec![(f.clone(), k0)];
    if o.extrapolate {
        let fine: Vec<f64> = (0..2 * n_total - 1).map(|i| o.x_min + 0.5 * o.h * i as f64).collect();
        let (ff, kf, sf) = solve(&fine)?;
        k.values = richardson(&k.values, &kf.values);
        stats.max_residual = stats.max_residual.max(sf.max_residual);
        stats.max_cond = stats.max_cond.max(sf.max_cond);
        levels.push((ff, kf));
    }
    let x_grid = g[..n_report].to_vec();
    let diag: Vec<f64> = (0..n_report).map(|i| k.values[(i, i)]).collect();
    let a_plus_estimate = estimate_a_plus(d);
    let q_recovered = recover_q(&diag, o.h, a_plus_estimate);
    let roundtrip_error = reference.map(|p| roundtrip_errors(p, &x_grid, &q_recovered, 2.0 * o.h).0);
    Ok(Reconstruction {
        report: RecoveryReport { x_grid, q_recovered, a_plus_estimate, marchenko_residual: stats.max_residual, roundtrip_error },
        f,
        k,
        t_max,
        stats,
        levels,
    })
}
