//! Nyström solution of the Marchenko equation and the Volterra pair.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{uniform_step, KernelGrid, KernelRole};
use crate::error::{Error, Result};
use crate::quad::trapezoid_weights;

#[derive(Debug, Clone)]
pub struct MarchenkoRow {
    pub x: f64,
    pub t: Vec<f64>,
    pub k: Vec<f64>,
    /// max-norm residual of the discrete equation relative to max(1, |F(x, ·)|)
    pub residual: f64,
    /// 1-norm condition estimate of the discrete operator
    pub cond: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MarchenkoStats {
    pub max_residual: f64,
    pub max_cond: f64,
}

/// Hager's estimate of ‖A⁻¹‖₁ from an LU factorization, times ‖A‖₁.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let lu = a.clone().lu();
    let (l, u) = (lu.l(), lu.u());
    let p = lu.p();
    let solve = |b: &DVector<f64>| lu.solve(b);
    // Aᵀz = b with PA = LU: Uᵀw = b, Lᵀv = w, z = Pᵀv.
    let solve_t = |b: &DVector<f64>| -> Option<DVector<f64>> {
        let w = u.tr_solve_upper_triangular(b)?;
        let mut v = l.tr_solve_lower_triangular(&w)?;
        p.inv_permute_rows(&mut v);
        Some(v)
    };
    let norm_a = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = solve(&x) else { return f64::INFINITY };
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = solve_t(&xi) else { return f64::INFINITY };
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[jmax] = 1.0;
    }
    norm_a * est
}

pub fn solve_marchenko_row(f: &KernelGrid, x: f64, t_max: f64) -> Result<Vec<f64>> {
    Ok(solve_marchenko_row_with(f, x, t_max, 1e8)?.k)
}

/// K(x, t) + F(x, t) + ∫ₓ^{t_max} K(x, ξ)F(ξ, t)dξ = 0 on the grid nodes in
/// [x, t_max], trapezoid weights, dense LU.
pub fn solve_marchenko_row_with(f: &KernelGrid, x: f64, t_max: f64, cond_max: f64) -> Result<MarchenkoRow> {
    if f.role != KernelRole::F {
        return Err(Error::InvalidGrid("Marchenko rows need an F kernel".into()));
    }
    let h = uniform_step(&f.t_grid)?;
    let i0 = f.t_index(x).ok_or_else(|| Error::InvalidGrid(format!("x = {x} is not a t-grid node")))?;
    let i1 = f.t_index(t_max).ok_or_else(|| Error::InvalidGrid(format!("t_max = {t_max} is not a t-grid node")))?;
    if i1 < i0 {
        return Err(Error::InvalidGrid("t_max below x".into()));
    }
    let rows: Vec<usize> = (i0..=i1)
        .map(|j| f.x_index(f.t_grid[j]).ok_or_else(|| Error::InvalidGrid("F must cover [x, t_max] in both arguments".into())))
        .collect::<Result<_>>()?;
    let n = i1 - i0 + 1;
    let w = trapezoid_weights(n, h);
    let xi = rows[0];
    // Row a is the equation at t = t_{i0+a}; column b the unknown K(x, t_{i0+b}).
    let a = DMatrix::from_fn(n, n, |r, c| f64::from(r == c) + w[c] * f.values[(rows[c], i0 + r)]);
    let rhs = DVector::from_fn(n, |r, _| -f.values[(xi, i0 + r)]);
    let cond = condition_estimate(&a);
    if !(cond <= cond_max) {
        return Err(Error::IllConditioned { x, cond });
    }
    let k = a.clone().lu().solve(&rhs).ok_or(Error::IllConditioned { x, cond: f64::INFINITY })?;
    let residual = (&a * &k - &rhs).amax() / rhs.amax().max(1.0);
    Ok(MarchenkoRow { x, t: f.t_grid[i0..=i1].to_vec(), k: k.iter().copied().collect(), residual, cond })
}

/// All rows of K on the square grid of `f`, truncated at its last node.
pub fn solve_marchenko(f: &KernelGrid, cond_max: f64) -> Result<(KernelGrid, MarchenkoStats)> {
    let g = &f.t_grid;
    if f.x_grid.len() != g.len() || f.x_grid.iter().zip(g).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidGrid("Marchenko solve needs F on a square grid".into()));
    }
    let t_max = g[g.len() - 1];
    let rows: Vec<MarchenkoRow> =
        g.par_iter().map(|&x| solve_marchenko_row_with(f, x, t_max, cond_max)).collect::<Result<_>>()?;
    let n = g.len();
    let mut values = DMatrix::zeros(n, n);
    let mut stats = MarchenkoStats::default();
    for (i, r) in rows.iter().enumerate() {
        for (b, &v) in r.k.iter().enumerate() {
            values[(i, i + b)] = v;
        }
        stats.max_residual = stats.max_residual.max(r.residual);
        stats.max_cond = stats.max_cond.max(r.cond);
    }
    Ok((KernelGrid::new(KernelRole::K, g.clone(), g.clone(), values)?, stats))
}

fn square_step(k: &KernelGrid) -> Result<f64> {
    if k.x_grid.len() != k.t_grid.len() || k.x_grid.iter().zip(&k.t_grid).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidGrid("Volterra kernels live on a square grid".into()));
    }
    uniform_step(&k.t_grid)
}

/// Discrete Volterra operator (K_h)_{ij} = ω⁽ⁱ⁾_j K_ij, ω⁽ⁱ⁾ the trapezoid
/// weights on [x_i, t_N]. The last row keeps the end weight h/2 so that
/// every entry of (I + K_h)(I + H_h) = I is the trapezoid form of the
/// continuous relation, the diagonal included.
fn weights_row(n: usize, i: usize, h: f64) -> Vec<f64> {
    if n - i == 1 {
        vec![0.5 * h]
    } else {
        trapezoid_weights(n - i, h)
    }
}

fn discrete_operator(k: &KernelGrid, h: f64) -> DMatrix<f64> {
    let n = k.x_grid.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = weights_row(n, i, h);
        for j in i..n {
            m[(i, j)] = w[j - i] * k.values[(i, j)];
        }
    }
    m
}

/// Given K (or H) solve H + K + ∫ₓᵗ K(x, ξ)H(ξ, t)dξ = 0 for the partner
/// kernel: the discrete operator I + K_h is inverted exactly by back
/// substitution, so (I + K_h)(I + H_h) = I holds to rounding.
pub fn kernel_inverse_pair(src: &KernelGrid) -> Result<KernelGrid> {
    let role = match src.role {
        KernelRole::K => KernelRole::H,
        KernelRole::H => KernelRole::K,
        KernelRole::F => return Err(Error::InvalidGrid("F has no Volterra partner".into())),
    };
    let h = square_step(src)?;
    let n = src.x_grid.len();
    let kh = discrete_operator(src, h);
    // Columns of X = (I + K_h)⁻¹ are independent upper-triangular solves.
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut x = vec![0.0; j + 1];
            x[j] = 1.0 / (1.0 + kh[(j, j)]);
            for i in (0..j).rev() {
                let mut s = 0.0;
                for m in i + 1..=j {
                    s += kh[(i, m)] * x[m];
                }
                x[i] = -s / (1.0 + kh[(i, i)]);
            }
            x
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            let w = weights_row(n, i, h)[j - i];
            let hij = v - f64::from(i == j);
            values[(i, j)] = hij / w;
        }
    }
    KernelGrid::new(role, src.x_grid.clone(), src.t_grid.clone(), values)
}

/// max |(I + K_h)(I + H_h)v − v| for a probe vector v.
pub fn composition_defect(k: &KernelGrid, hk: &KernelGrid, probe: &[f64]) -> Result<f64> {
    let h = square_step(k)?;
    if square_step(hk)? != h || probe.len() != k.x_grid.len() {
        return Err(Error::InvalidGrid("kernels and probe must share one grid".into()));
    }
    let v = DVector::from_column_slice(probe);
    let a = discrete_operator(k, h);
    let b = discrete_operator(hk, h);
    let u = &v + &b * &v;
    let w = &u + &a * &u;
    Ok((w - v).amax())
}

/// Defects of F(x, t) = H(x, t) + ∫ₜ^∞ H(x, ξ)H(t, ξ)dξ at node pairs x < t
/// (stored at (i, j), i < j) and of the mirrored identity for t < x (stored at
/// (j, i)). The diagonal is left out: the discrete inverse carries its O(h)
/// error there.
pub fn factorization_defects(f: &KernelGrid, hk: &KernelGrid) -> Result<DMatrix<f64>> {
    let h = square_step(hk)?;
    if f.x_grid.len() != hk.x_grid.len() || f.t_grid.len() != hk.t_grid.len() {
        return Err(Error::InvalidGrid("F and H must share one square grid".into()));
    }
    let n = hk.x_grid.len();
    let hv = &hk.values;
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let w = trapezoid_weights(n - j, h);
                    let mut s = 0.0;
                    for m in j..n {
                        s += w[m - j] * hv[(i, m)] * hv[(j, m)];
                    }
                    (f.values[(i, j)] - hv[(i, j)] - s, f.values[(j, i)] - hv[(i, j)] - s)
                })
                .collect()
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (b, &(upper, lower)) in row.iter().enumerate() {
            out[(i, i + 1 + b)] = upper;
            out[(i + 1 + b, i)] = lower;
        }
    }
    Ok(out)
}

pub fn factorization_residual(f: &KernelGrid, hk: &KernelGrid) -> Result<f64> {
    Ok(factorization_defects(f, hk)?.amax())
}
