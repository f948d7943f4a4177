//! Inverse problem: the kernel F⁺ assembled from scattering data, the
//! Marchenko equation for K⁺, the Volterra pair (K⁺, H⁺) and recovery of q.

mod recover;
mod solve;
mod spectrum;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fmt_real, ScatteringData};

pub use recover::{
    estimate_a_plus, kernel_bound_check, reconstruct, recover_q, roundtrip_errors, BoundReport, InverseOptions,
    Reconstruction, RecoveryReport,
};
pub use solve::{
    composition_defect, condition_estimate, factorization_defects, factorization_residual, kernel_inverse_pair, solve_marchenko,
    solve_marchenko_row, solve_marchenko_row_with, MarchenkoRow, MarchenkoStats,
};
pub use spectrum::{omega, QuadOptions, Spectrum, TailModel, TailTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelRole {
    F,
    K,
    H,
}

/// A real kernel sampled on a product grid. For roles K and H only entries
/// with t ≥ x carry meaning; the rest are stored as zero.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub role: KernelRole,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: DMatrix<f64>,
}

fn check_increasing(g: &[f64], what: &str) -> Result<()> {
    if g.is_empty() || g.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!("{what} must be a nonempty increasing grid")));
    }
    Ok(())
}

/// Step of a uniform grid, or an error if the grid is not uniform.
pub fn uniform_step(g: &[f64]) -> Result<f64> {
    check_increasing(g, "grid")?;
    if g.len() < 2 {
        return Err(Error::InvalidGrid("uniform grid needs at least two nodes".into()));
    }
    let h = (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64;
    for (i, &v) in g.iter().enumerate() {
        if (v - g[0] - i as f64 * h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::InvalidGrid(format!("grid is not uniform near index {i}")));
        }
    }
    Ok(h)
}

impl KernelGrid {
    pub fn new(role: KernelRole, x_grid: Vec<f64>, t_grid: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        check_increasing(&x_grid, "x_grid")?;
        check_increasing(&t_grid, "t_grid")?;
        if values.shape() != (x_grid.len(), t_grid.len()) {
            return Err(Error::InvalidGrid(format!(
                "kernel values are {:?}, grids are {}x{}",
                values.shape(),
                x_grid.len(),
                t_grid.len()
            )));
        }
        Ok(KernelGrid { role, x_grid, t_grid, values })
    }

    /// Index of `v` in the t-grid, if it is a node.
    pub fn t_index(&self, v: f64) -> Option<usize> {
        locate(&self.t_grid, v)
    }

    pub fn x_index(&self, v: f64) -> Option<usize> {
        locate(&self.x_grid, v)
    }

    /// max |F(x, t) − F(t, x)| over node pairs present in both orders.
    pub fn symmetry_defect(&self) -> f64 {
        let cols: Vec<Option<usize>> = self.x_grid.iter().map(|&x| self.t_index(x)).collect();
        let rows: Vec<Option<usize>> = self.t_grid.iter().map(|&t| self.x_index(t)).collect();
        let mut worst: f64 = 0.0;
        for (i, ci) in cols.iter().enumerate() {
            let Some(ci) = *ci else { continue };
            for (j, rj) in rows.iter().enumerate() {
                let Some(rj) = *rj else { continue };
                worst = worst.max((self.values[(i, j)] - self.values[(rj, ci)]).abs());
            }
        }
        worst
    }

    /// The rows with x in [lo, hi], all t kept.
    pub fn rows_within(&self, lo: f64, hi: f64) -> KernelGrid {
        let idx: Vec<usize> = (0..self.x_grid.len()).filter(|&i| self.x_grid[i] >= lo && self.x_grid[i] <= hi).collect();
        KernelGrid {
            role: self.role,
            x_grid: idx.iter().map(|&i| self.x_grid[i]).collect(),
            t_grid: self.t_grid.clone(),
            values: self.values.select_rows(idx.iter()),
        }
    }

    /// CSV `x,t,value`, row-major; K and H dumps skip the t < x half.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,t,value\n");
        for (i, &x) in self.x_grid.iter().enumerate() {
            for (j, &t) in self.t_grid.iter().enumerate() {
                if self.role != KernelRole::F && t < x - 1e-12 {
                    continue;
                }
                let _ = writeln!(s, "{},{},{}", fmt_real(x), fmt_real(t), fmt_real(self.values[(i, j)]));
            }
        }
        s
    }
}

fn locate(g: &[f64], v: f64) -> Option<usize> {
    let tol = 1e-9 * g.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min).min(1.0);
    let k = g.partition_point(|&u| u < v - tol);
    (k < g.len() && (g[k] - v).abs() <= tol).then_some(k)
}

/// F̃⁺(x, t) from scattering data. The μ-quadrature runs to the end of the
/// sampled upper band; beyond it the tail model of [`Spectrum`] takes over.
pub fn build_f_tilde(d: &ScatteringData, x: f64, t: f64, opts: &QuadOptions) -> Result<f64> {
    Ok(Spectrum::new(d, opts)?.f_tilde(x, t))
}

/// How F⁺ is obtained from F̃⁺.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FMethod {
    /// Method A: mixed difference quotient of F̃⁺.
    #[default]
    DifferenceQuotient,
    /// Method B: direct quadrature of the differentiated integrand.
    Direct,
    /// Both; B is returned and must agree with A to `tol`. A is only
    /// first-order accurate on the kink of F along x + t = 0 of a potential
    /// with a jump, so agreement needs a small step there.
    CrossChecked { tol: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub quad: QuadOptions,
    pub method: FMethod,
}

pub fn build_f(d: &ScatteringData, x_grid: &[f64], t_grid: &[f64], opts: &BuildOptions) -> Result<KernelGrid> {
    build_f_from(&Spectrum::new(d, &opts.quad)?, x_grid, t_grid, opts.method)
}

fn staggered(g: &[f64], h: f64) -> Vec<f64> {
    let mut out: Vec<f64> = g.iter().map(|&v| v - 0.5 * h).collect();
    out.push(g[g.len() - 1] + 0.5 * h);
    out
}

/// F⁺ on a uniform product grid as the mixed central difference of F̃⁺ with
/// half-steps, i.e. from F̃⁺ on the twice refined staggered grid, or by the
/// direct quadrature, or both (see [`FMethod`]).
pub fn build_f_from(spec: &Spectrum, x_grid: &[f64], t_grid: &[f64], method: FMethod) -> Result<KernelGrid> {
    let hx = uniform_step(x_grid)?;
    let ht = uniform_step(t_grid)?;
    if (hx - ht).abs() > 1e-9 * hx {
        return Err(Error::InvalidGrid(format!("x step {hx} and t step {ht} differ")));
    }
    let method_a = || {
        let ft = spec.grid(&staggered(x_grid, hx), &staggered(t_grid, hx), false);
        let inv = 1.0 / (hx * hx);
        DMatrix::from_fn(x_grid.len(), t_grid.len(), |i, j| {
            (ft[(i + 1, j + 1)] - ft[(i + 1, j)] - ft[(i, j + 1)] + ft[(i, j)]) * inv
        })
    };
    let values = match method {
        FMethod::DifferenceQuotient => method_a(),
        FMethod::Direct => spec.grid(x_grid, t_grid, true),
        FMethod::CrossChecked { tol } => {
            let b = spec.grid(x_grid, t_grid, true);
            let diff = (&method_a() - &b).amax();
            if !(diff <= tol) {
                return Err(Error::MethodMismatch { diff, tol });
            }
            b
        }
    };
    KernelGrid::new(KernelRole::F, x_grid.to_vec(), t_grid.to_vec(), values)
}

/// Method A at a single point with an arbitrary difference step.
pub fn f_difference_quotient(spec: &Spectrum, x: f64, t: f64, h: f64) -> f64 {
    let e = 0.5 * h;
    (spec.f_tilde(x + e, t + e) - spec.f_tilde(x + e, t - e) - spec.f_tilde(x - e, t + e) + spec.f_tilde(x - e, t - e))
        / (h * h)
}
