//! Bounded eigenfunctions per band, connection matrices A±, B, C, the
//! scattering matrix S⁺(μ), bound states with norming constants, the
//! forward map to scattering data and the Parseval check.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jost::{jost_at, propagate, wronskian, JostOptions, Side};
use crate::potentials::Potential;

mod bound;
mod data;
mod parseval;

pub use bound::{
    default_mu_floor, find_bound_states, find_bound_states_with, node_count, norming_constant, norming_constant_with,
    BoundState,
};
pub use data::{fmt_real, forward_scatter, forward_scatter_with, Band, BandGrids, SMatrixSample, ScatteringData, StructureReport};
pub use parseval::{parseval_report, parseval_residual, ParsevalOptions, ParsevalReport, SampledFunction};

type C = Complex64;
pub type CMat = DMatrix<C>;

/// μ₁ = min(a⁺, a⁻), μ₂ = max(a⁺, a⁻).
pub fn band_edges(p: &Potential) -> (f64, f64) {
    (p.a_minus.min(p.a_plus), p.a_minus.max(p.a_plus))
}

/// Channel velocity weight |λ′(μ)| = 1/(2√|μ − a|).
pub fn channel_weight(mu: f64, a: f64) -> f64 {
    0.5 / (mu - a).abs().sqrt()
}

/// How the bounded solutions of a band look at ±∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    /// μ > μ₂: two open channels on both sides.
    Upper,
    /// μ₁ < μ < μ₂ with a⁺ > a⁻: closed on the right, open on the left.
    LowerClosedRight,
    /// μ₁ < μ < μ₂ with a⁺ < a⁻: open on the right, closed on the left.
    LowerClosedLeft,
}

impl BandKind {
    pub fn k(self) -> usize {
        match self {
            BandKind::Upper => 2,
            _ => 1,
        }
    }
    pub fn r_plus(self) -> usize {
        usize::from(self != BandKind::LowerClosedRight)
    }
    pub fn r_minus(self) -> usize {
        usize::from(self != BandKind::LowerClosedLeft)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    pub jost: JostOptions,
    /// Minimum distance of μ from μ₁ and μ₂; `None` means 1e−4·(1 + |μ₂ − μ₁|).
    pub edge_eps: Option<f64>,
    /// Point at which Jost solutions are matched.
    pub x_match: f64,
    /// Allowed defect of B·B* = C·C* before and of C·C* = I after normalization.
    pub unitary_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { jost: JostOptions::default(), edge_eps: None, x_match: 0.0, unitary_tol: 1e-8 }
    }
}

impl SpectralOptions {
    pub fn edge_eps_for(&self, p: &Potential) -> f64 {
        let (m1, m2) = band_edges(p);
        self.edge_eps.unwrap_or(1e-4 * (1.0 + (m2 - m1).abs()))
    }
}

pub fn band_kind(p: &Potential, mu: f64, opts: &SpectralOptions) -> Result<BandKind> {
    let (m1, m2) = band_edges(p);
    let eps = opts.edge_eps_for(p);
    for edge in [m1, m2] {
        if (mu - edge).abs() < eps {
            return Err(Error::BandEdge { mu, edge, eps });
        }
    }
    if mu > m2 {
        Ok(BandKind::Upper)
    } else if mu > m1 {
        Ok(if p.a_plus > p.a_minus { BandKind::LowerClosedRight } else { BandKind::LowerClosedLeft })
    } else {
        Err(Error::InvalidData(format!("mu={mu} lies below the continuous spectrum (mu1={m1})")))
    }
}

/// Connection matrices of the normalized system at one μ.
///
/// `a_plus` has columns ν = 1..1+r⁺ and `a_minus` columns ν = 2−r⁻..2, so in
/// the closed-left lower band `a_minus` is the single column ν = 2.
#[derive(Debug, Clone)]
pub struct ConnectionMatrices {
    pub mu: f64,
    pub kind: BandKind,
    pub a_plus: CMat,
    pub a_minus: CMat,
    pub b: CMat,
    pub c: CMat,
}

impl ConnectionMatrices {
    pub fn k(&self) -> usize {
        self.kind.k()
    }

    fn pack(kind: BandKind, a_plus: &CMat, a_minus: &CMat) -> (CMat, CMat) {
        match kind {
            BandKind::Upper => {
                let b = CMat::from_columns(&[a_plus.column(0).into_owned(), a_minus.column(1).into_owned()]);
                let c = CMat::from_columns(&[a_minus.column(0).into_owned(), a_plus.column(1).into_owned()]);
                (b, c)
            }
            BandKind::LowerClosedRight => (a_minus.columns(1, 1).into_owned(), a_minus.columns(0, 1).into_owned()),
            BandKind::LowerClosedLeft => (a_plus.columns(0, 1).into_owned(), a_plus.columns(1, 1).into_owned()),
        }
    }
}

/// Coefficients (c₁, c₂) of `y = c₁u₁ + c₂u₂` from values and derivatives at one point.
fn expand(y: (C, C), u1: (C, C), u2: (C, C)) -> Result<(C, C)> {
    let w12 = wronskian(u1.0, u1.1, u2.0, u2.1);
    let scale = (u1.0.norm() + u1.1.norm()) * (u2.0.norm() + u2.1.norm());
    if w12.norm() <= 1e-13 * scale {
        return Err(Error::DegenerateConnection { mu: f64::NAN, det: w12.norm() });
    }
    Ok((wronskian(y.0, y.1, u2.0, u2.1) / w12, wronskian(u1.0, u1.1, y.0, y.1) / w12))
}

pub fn connection_matrices(p: &Potential, mu: f64) -> Result<ConnectionMatrices> {
    connection_matrices_with(p, mu, &SpectralOptions::default())
}

pub fn connection_matrices_with(p: &Potential, mu: f64, opts: &SpectralOptions) -> Result<ConnectionMatrices> {
    let kind = band_kind(p, mu, opts)?;
    let xm = opts.x_match;
    let jo = &opts.jost;
    let wp = channel_weight(mu, p.a_plus);
    let wm = channel_weight(mu, p.a_minus);
    let fix = |e: Error| match e {
        Error::DegenerateConnection { det, .. } => Error::DegenerateConnection { mu, det },
        other => other,
    };
    let (a_plus, a_minus) = match kind {
        BandKind::Upper => {
            let yp1 = jost_at(p, mu, Side::Plus, 1, xm, jo)?;
            let yp2 = jost_at(p, mu, Side::Plus, 2, xm, jo)?;
            let ym1 = jost_at(p, mu, Side::Minus, 1, xm, jo)?;
            let ym2 = jost_at(p, mu, Side::Minus, 2, xm, jo)?;
            let t1 = expand(yp1, ym1, ym2).map_err(fix)?;
            let t2 = expand(yp2, ym1, ym2).map_err(fix)?;
            let r = (wp / wm).sqrt();
            let am = CMat::from_row_slice(2, 2, &[t1.0 * r, t1.1 * r, t2.0 * r, t2.1 * r]);
            (CMat::identity(2, 2), am)
        }
        BandKind::LowerClosedRight => {
            let yp1 = jost_at(p, mu, Side::Plus, 1, xm, jo)?;
            let ym1 = jost_at(p, mu, Side::Minus, 1, xm, jo)?;
            let ym2 = jost_at(p, mu, Side::Minus, 2, xm, jo)?;
            let t = expand(yp1, ym1, ym2).map_err(fix)?;
            let r = (wp / wm).sqrt();
            (CMat::identity(1, 1), CMat::from_row_slice(1, 2, &[t.0 * r, t.1 * r]))
        }
        BandKind::LowerClosedLeft => {
            let ym2 = jost_at(p, mu, Side::Minus, 2, xm, jo)?;
            let yp1 = jost_at(p, mu, Side::Plus, 1, xm, jo)?;
            let yp2 = jost_at(p, mu, Side::Plus, 2, xm, jo)?;
            let t = expand(ym2, yp1, yp2).map_err(fix)?;
            let r = (wm / wp).sqrt();
            (CMat::from_row_slice(1, 2, &[t.0 * r, t.1 * r]), CMat::identity(1, 1))
        }
    };
    let (b, c) = ConnectionMatrices::pack(kind, &a_plus, &a_minus);
    let bb = &b * b.adjoint();
    let cc = &c * c.adjoint();
    let scale = bb.norm().max(1e-300);
    let det = b.determinant().norm();
    if det <= 1e-12 * scale.powf(b.nrows() as f64 / 2.0) {
        return Err(Error::DegenerateConnection { mu, det });
    }
    let flux_defect = (&bb - &cc).norm() / scale;
    if flux_defect > opts.unitary_tol {
        return Err(Error::NotUnitary { defect: flux_defect });
    }
    // Left polar factor U = (B·B*)^{-1/2} makes B unitary.
    let u = inverse_sqrt_hpd(&bb);
    let out = ConnectionMatrices {
        mu,
        kind,
        a_plus: &u * &a_plus,
        a_minus: &u * &a_minus,
        b: &u * &b,
        c: &u * &c,
    };
    let k = out.k();
    let defect = (&out.c * out.c.adjoint() - CMat::identity(k, k)).norm();
    if defect > opts.unitary_tol {
        return Err(Error::NotUnitary { defect });
    }
    Ok(out)
}

fn inverse_sqrt_hpd(m: &CMat) -> CMat {
    let eig = SymmetricEigen::new(m.clone());
    let v = &eig.eigenvectors;
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| C::new(1.0 / l.sqrt(), 0.0)));
    v * d * v.adjoint()
}

/// S⁺ = M*·M with M_{lν} = √|λ′_ν⁺|·A⁺_{lν}.
pub fn scattering_from_connection(c: &ConnectionMatrices, a_plus: f64) -> CMat {
    let w = channel_weight(c.mu, a_plus).sqrt();
    let m = c.a_plus.map(|z| z * w);
    let s = m.adjoint() * &m;
    // Symmetrize away rounding so the Hermitian defect is exactly zero.
    (&s + s.adjoint()).map(|z| z * 0.5)
}

pub fn scattering_matrix(p: &Potential, mu: f64) -> Result<CMat> {
    scattering_matrix_with(p, mu, &SpectralOptions::default())
}

pub fn scattering_matrix_with(p: &Potential, mu: f64, opts: &SpectralOptions) -> Result<CMat> {
    let c = connection_matrices_with(p, mu, opts)?;
    Ok(scattering_from_connection(&c, p.a_plus))
}

/// Lemma-2 style change of normalized system: A± → U·A±, B → U·B, C → U·C.
pub fn unitary_mix(c: &ConnectionMatrices, u: &CMat) -> Result<ConnectionMatrices> {
    let k = c.k();
    if u.nrows() != k || u.ncols() != k {
        return Err(Error::InvalidData(format!("mixing matrix must be {k}x{k}")));
    }
    let defect = (u * u.adjoint() - CMat::identity(k, k)).norm();
    if defect > 1e-10 {
        return Err(Error::NotUnitary { defect });
    }
    Ok(ConnectionMatrices {
        mu: c.mu,
        kind: c.kind,
        a_plus: u * &c.a_plus,
        a_minus: u * &c.a_minus,
        b: u * &c.b,
        c: u * &c.c,
    })
}

/// Hermitian defect, smallest eigenvalue and numerical rank of a sample.
pub fn matrix_structure(s: &CMat) -> (f64, f64, usize) {
    let herm = (s - s.adjoint()).norm();
    let eig = SymmetricEigen::new((s + s.adjoint()).map(|z| z * 0.5)).eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let rank = eig.iter().filter(|&&l| l > 1e-8 * max.max(1.0)).count();
    (herm, min, rank)
}

/// Compute S⁺ at many μ concurrently, keeping input order.
pub fn scattering_samples(p: &Potential, mus: &[f64], opts: &SpectralOptions) -> Result<Vec<SMatrixSample>> {
    mus.par_iter()
        .map(|&mu| scattering_matrix_with(p, mu, opts).map(|s| SMatrixSample { mu, s }))
        .collect()
}

/// Values of a real-μ solution below the continuous spectrum along a grid, used
/// by node counting and eigenfunction quadrature.
pub(crate) fn real_solution_on(p: &Potential, mu: f64, side: Side, xs: &[f64], opts: &JostOptions) -> Result<Vec<(f64, f64)>> {
    let ch = crate::jost::Channel::new(p, mu, side, if side == Side::Plus { 1 } else { 2 }, opts.band_edge_eps)?;
    let x_far = crate::jost::far_point(p, side, xs, opts);
    let e = (C::new(0.0, 1.0) * ch.lambda * x_far).exp();
    let start = [e, C::new(0.0, 1.0) * ch.lambda * e];
    let states = propagate(p, mu, x_far, start, xs, opts.rtol)?;
    Ok(states.into_iter().map(|s| (s[0].re, s[1].re)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Deviation;

    /// S⁺ from analytic plane-wave matching for a pure step at 0:
    /// S = M*·(B·B*)^{-1}·M for the raw (unnormalized) coefficients.
    pub(crate) fn step_oracle(am: f64, ap: f64, mu: f64) -> CMat {
        let i = C::new(0.0, 1.0);
        let root = |z: f64| if z >= 0.0 { C::new(z.sqrt(), 0.0) } else { C::new(0.0, (-z).sqrt()) };
        let lp = root(mu - ap);
        let lm = root(mu - am);
        let wp = 0.5 / lp.norm();
        let wm = 0.5 / lm.norm();
        // e^{iλx} continues to (1 + λ/λ₋)/2·e^{iλ₋x} + (1 − λ/λ₋)/2·e^{−iλ₋x} across the step.
        let coef = |l: C| ((C::new(1.0, 0.0) + l / lm) * 0.5, (C::new(1.0, 0.0) - l / lm) * 0.5);
        let _ = i;
        if mu > ap.max(am) {
            let t1 = coef(lp);
            let t2 = coef(-lp);
            let r = (wp / wm).sqrt();
            let b = CMat::from_row_slice(2, 2, &[C::new(1.0, 0.0), t1.1 * r, C::new(0.0, 0.0), t2.1 * r]);
            let m = CMat::from_row_slice(2, 2, &[C::new(wp.sqrt(), 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(wp.sqrt(), 0.0)]);
            let g = (&b * b.adjoint()).try_inverse().unwrap();
            m.adjoint() * g * m
        } else if ap > am {
            let t = coef(lp);
            let r = (wp / wm).sqrt();
            let b = (t.1 * r).norm_sqr();
            CMat::from_element(1, 1, C::new(wp / b, 0.0))
        } else {
            // Decaying e^{κ₋x} on the left continues as a combination of e^{±iλ⁺x} on the right.
            let lm2 = -lm;
            let a1 = (C::new(1.0, 0.0) + lm2 / lp) * 0.5;
            let a2 = (C::new(1.0, 0.0) - lm2 / lp) * 0.5;
            let r = (wm / wp).sqrt();
            let row = [a1 * r * wp.sqrt(), a2 * r * wp.sqrt()];
            let b = (a1 * r).norm_sqr();
            let m = CMat::from_row_slice(1, 2, &row);
            m.adjoint() * m / C::new(b, 0.0)
        }
    }

    #[test]
    fn free_connection_is_identity() {
        let p = Potential::free(0.0);
        let c = connection_matrices(&p, 4.0).unwrap();
        let id = CMat::identity(2, 2);
        assert!((&c.a_plus - &id).norm() < 1e-12);
        assert!((&c.a_minus - &id).norm() < 1e-12);
        assert!((&c.b - &id).norm() < 1e-12);
        assert!((&c.c - &id).norm() < 1e-12);
        let s = scattering_matrix(&p, 4.0).unwrap();
        assert!((s - id.map(|z| z * 0.25)).norm() < 1e-12);
    }

    #[test]
    fn step_connection_is_unitary_and_matches_matching_coefficients() {
        let p = Potential::step(0.0, 3.0);
        let c = connection_matrices(&p, 4.0).unwrap();
        let id = CMat::identity(2, 2);
        assert!((&c.b * c.b.adjoint() - &id).norm() <= 1e-10);
        assert!((&c.c * c.c.adjoint() - &id).norm() <= 1e-10);
        // Raw coefficients of e^{ix} on the left are (3/4, 1/4); normalization mixes rows
        // only, so the ratio within the first row of U^{-1}·A⁻ survives.
        let u_inv = c.a_plus.clone().try_inverse().unwrap();
        let raw = u_inv * &c.a_minus;
        let ratio = raw[(0, 1)] / raw[(0, 0)];
        assert!((ratio - C::new(1.0 / 3.0, 0.0)).norm() < 1e-10);
        let r = (channel_weight(4.0, 3.0) / channel_weight(4.0, 0.0)).sqrt();
        assert!((raw[(0, 0)] - C::new(0.75 * r, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn step_scattering_matches_plane_wave_oracle_on_both_bands() {
        let p = Potential::step(0.0, 3.0);
        for &mu in &[0.3, 1.7, 2.9, 3.2, 4.0, 12.0, 80.0] {
            let s = scattering_matrix(&p, mu).unwrap();
            let o = step_oracle(0.0, 3.0, mu);
            assert!((&s - &o).norm() < 1e-8, "mu={mu}: {s} vs {o}");
        }
        assert!((scattering_matrix(&p, 4.0).unwrap()[(0, 0)].re - 0.5).abs() < 1e-12);
        let q = Potential::step(2.0, -1.0);
        for &mu in &[-0.5, 1.0, 1.9, 2.5, 9.0] {
            let s = scattering_matrix(&q, mu).unwrap();
            let o = step_oracle(2.0, -1.0, mu);
            assert!((&s - &o).norm() < 1e-8, "mu={mu}: {s} vs {o}");
        }
    }

    #[test]
    fn matching_point_does_not_matter() {
        let p = Potential::step(0.0, 2.0).with_deviation(Deviation::Gaussian { amplitude: -3.0, center: 0.5, width: 1.0 });
        for &mu in &[0.7, 5.0] {
            let a = scattering_matrix(&p, mu).unwrap();
            let opts = SpectralOptions { x_match: 1.3, ..Default::default() };
            let b = scattering_matrix_with(&p, mu, &opts).unwrap();
            assert!((&a - &b).norm() < 1e-9 * a.norm());
        }
    }

    #[test]
    fn band_edges_are_refused() {
        let p = Potential::step(0.0, 3.0);
        assert!(matches!(connection_matrices(&p, 3.0), Err(Error::BandEdge { .. })));
        assert!(matches!(connection_matrices(&p, 1e-6), Err(Error::BandEdge { .. })));
    }

    #[test]
    fn unitary_mix_leaves_s_invariant() {
        let p = Potential::step(0.0, 3.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -8.0 });
        let c = connection_matrices(&p, 6.0).unwrap();
        let s0 = scattering_from_connection(&c, p.a_plus);
        let th = 0.7f64;
        let u = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C::from_polar(1.0, th), C::from_polar(1.0, -2.0)]));
        let s1 = scattering_from_connection(&unitary_mix(&c, &u).unwrap(), p.a_plus);
        assert!((&s0 - &s1).norm() < 1e-12);
        let bad = CMat::from_element(2, 2, C::new(1.0, 0.0));
        assert!(matches!(unitary_mix(&c, &bad), Err(Error::NotUnitary { .. })));
        let same = unitary_mix(&c, &CMat::identity(2, 2)).unwrap();
        assert!((same.a_plus - &c.a_plus).norm() == 0.0);
    }
}
