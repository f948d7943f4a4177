//! Right scattering data: sampling grids, assembly and serialization.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    band_edges, channel_weight, find_bound_states_with, matrix_structure, norming_constant_with, scattering_samples,
    BoundState, CMat, SpectralOptions,
};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quad::GaussLegendre;

#[derive(Debug, Clone)]
pub struct SMatrixSample {
    pub mu: f64,
    pub s: CMat,
}

#[derive(Debug, Clone)]
pub struct Band {
    pub interval: [f64; 2],
    pub samples: Vec<SMatrixSample>,
}

#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub a_minus: f64,
    pub a_plus: f64,
    pub bound_states: Vec<BoundState>,
    /// Lower band (μ₁, μ₂), possibly empty, then the upper band (μ₂, μ_max].
    pub bands: Vec<Band>,
}

/// μ samples of the two bands.
#[derive(Debug, Clone, Default)]
pub struct BandGrids {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandGrids {
    /// Gauss-Legendre nodes in θ with μ = μ₁ + Δ·sin²θ on the lower band and
    /// in u = √(μ − μ₂) on the upper band. Both maps cluster samples at the
    /// thresholds where S⁺ behaves like a square root.
    pub fn standard(p: &Potential, per_band: usize, mu_max: f64, edge_eps: f64) -> Result<Self> {
        let (m1, m2) = band_edges(p);
        if per_band == 0 {
            return Err(Error::InvalidGrid("need at least one sample per band".into()));
        }
        if mu_max <= m2 + 2.0 * edge_eps {
            return Err(Error::InvalidGrid(format!("mu_max {mu_max} must exceed mu2 {m2}")));
        }
        let rule = GaussLegendre::new(per_band);
        let mut lower = Vec::new();
        let span = m2 - m1 - 2.0 * edge_eps;
        if span > 0.0 {
            lower = rule.on(0.0, FRAC_PI_2).map(|(t, _)| m1 + edge_eps + span * t.sin().powi(2)).collect();
        }
        let umax = (mu_max - m2).sqrt();
        let umin = edge_eps.sqrt();
        let upper = rule.on(umin, umax).map(|(u, _)| m2 + u * u).collect();
        Ok(BandGrids { lower, upper })
    }

    /// `standard` with the default threshold offset.
    pub fn with_samples(p: &Potential, per_band: usize, mu_max: f64) -> Result<Self> {
        Self::standard(p, per_band, mu_max, SpectralOptions::default().edge_eps_for(p))
    }

    pub fn default_for(p: &Potential) -> Result<Self> {
        let (_, m2) = band_edges(p);
        Self::with_samples(p, 200, m2 + 100.0)
    }
}

pub fn forward_scatter(p: &Potential, grids: &BandGrids, mu_floor: f64) -> Result<ScatteringData> {
    forward_scatter_with(p, grids, mu_floor, 0.05, &SpectralOptions::default())
}

/// Bound states, norming constants and S⁺ on both band grids. A scan that
/// proves too coarse is retried with the step halved a few times.
pub fn forward_scatter_with(
    p: &Potential,
    grids: &BandGrids,
    mu_floor: f64,
    scan_step: f64,
    opts: &SpectralOptions,
) -> Result<ScatteringData> {
    p.validate()?;
    let (m1, m2) = band_edges(p);
    let mut step = scan_step;
    let mut mus = None;
    for _ in 0..6 {
        match find_bound_states_with(p, mu_floor, step, opts) {
            Ok(v) => {
                mus = Some(v);
                break;
            }
            Err(Error::ScanTooCoarse { lo, hi }) => {
                step *= 0.5;
                mus = None;
                let _ = (lo, hi);
            }
            Err(e) => return Err(e),
        }
    }
    let mus = mus.ok_or(Error::ScanTooCoarse { lo: mu_floor, hi: m1 })?;
    let bound_states = mus
        .iter()
        .map(|&mu| norming_constant_with(p, mu, 1, opts).map(|n| BoundState { mu, n }))
        .collect::<Result<Vec<_>>>()?;

    let mut lower = grids.lower.clone();
    let mut upper = grids.upper.clone();
    lower.sort_by(|a, b| a.partial_cmp(b).unwrap());
    upper.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if lower.iter().any(|&m| m <= m1 || m >= m2) || upper.iter().any(|&m| m <= m2) {
        return Err(Error::InvalidGrid("band grid sample outside its band".into()));
    }
    let mu_max = upper.last().copied().unwrap_or(m2);
    let bands = vec![
        Band { interval: [m1, m2], samples: scattering_samples(p, &lower, opts)? },
        Band { interval: [m2, mu_max], samples: scattering_samples(p, &upper, opts)? },
    ];
    Ok(ScatteringData { a_minus: p.a_minus, a_plus: p.a_plus, bound_states, bands })
}

/// Worst-case structural defects over all samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructureReport {
    pub hermitian_defect: f64,
    pub min_eigenvalue: f64,
    /// Samples whose numerical rank exceeds the channel count of their band.
    pub rank_violations: usize,
    /// max |2√(μ − a⁺)·S₁₁ − 1| over samples with μ > a⁺.
    pub unitarity_defect: f64,
    pub samples: usize,
}

impl ScatteringData {
    pub fn mu1(&self) -> f64 {
        self.a_minus.min(self.a_plus)
    }

    pub fn mu2(&self) -> f64 {
        self.a_minus.max(self.a_plus)
    }

    pub fn all_samples(&self) -> impl Iterator<Item = (usize, &SMatrixSample)> {
        self.bands.iter().enumerate().flat_map(|(b, band)| band.samples.iter().map(move |s| (b, s)))
    }

    pub fn mu_max(&self) -> f64 {
        self.bands.last().and_then(|b| b.samples.last()).map(|s| s.mu).unwrap_or(self.mu2())
    }

    pub fn structure(&self) -> StructureReport {
        let mut r = StructureReport { min_eigenvalue: f64::INFINITY, ..Default::default() };
        for (b, s) in self.all_samples() {
            let (herm, min, rank) = matrix_structure(&s.s);
            r.hermitian_defect = r.hermitian_defect.max(herm);
            r.min_eigenvalue = r.min_eigenvalue.min(min);
            let k = if b == 0 { 1 } else { 2 };
            if rank > k {
                r.rank_violations += 1;
            }
            if s.mu > self.a_plus {
                let d = (2.0 * (s.mu - self.a_plus).sqrt() * s.s[(0, 0)].re - 1.0).abs();
                r.unitarity_defect = r.unitarity_defect.max(d);
            }
            r.samples += 1;
        }
        if r.samples == 0 {
            r.min_eigenvalue = 0.0;
        }
        r
    }

    /// Reject data that cannot come from a step-like operator.
    pub fn validate(&self) -> Result<()> {
        if !self.a_minus.is_finite() || !self.a_plus.is_finite() {
            return Err(Error::InvalidData("asymptotes must be finite".into()));
        }
        let (m1, m2) = (self.mu1(), self.mu2());
        for b in &self.bound_states {
            if !(b.mu < m1) || !(b.n > 0.0) || !b.n.is_finite() {
                return Err(Error::InvalidData(format!("bound state ({}, {}) invalid", b.mu, b.n)));
            }
        }
        if self.bands.len() != 2 {
            return Err(Error::InvalidData("expected a lower and an upper band".into()));
        }
        for (b, band) in self.bands.iter().enumerate() {
            let mut prev = f64::NEG_INFINITY;
            for s in &band.samples {
                let order = if b == 1 || self.a_plus < self.a_minus { 2 } else { 1 };
                if s.s.nrows() != order || s.s.ncols() != order {
                    return Err(Error::InvalidData(format!("sample at mu={} has wrong order", s.mu)));
                }
                let inside = if b == 0 { s.mu > m1 && s.mu < m2 } else { s.mu > m2 };
                if !inside || s.mu <= prev {
                    return Err(Error::InvalidData(format!("sample mu={} misplaced or unsorted", s.mu)));
                }
                if s.s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidData(format!("non-finite S at mu={}", s.mu)));
                }
                let herm = (&s.s - s.s.adjoint()).norm();
                if herm > 1e-8 * s.s.norm().max(1.0) {
                    return Err(Error::InvalidData(format!("S at mu={} is not Hermitian", s.mu)));
                }
                prev = s.mu;
            }
        }
        Ok(())
    }

    /// Background value |λ′|·I of S⁺ for the pure step with the same asymptotes.
    pub fn background_weight(&self, mu: f64) -> f64 {
        channel_weight(mu, self.a_plus)
    }

    pub fn to_json(&self) -> String {
        let file = DataFile {
            a_minus: self.a_minus,
            a_plus: self.a_plus,
            bound_states: self.bound_states.clone(),
            bands: self
                .bands
                .iter()
                .map(|b| BandFile {
                    interval: b.interval,
                    samples: b
                        .samples
                        .iter()
                        .map(|s| SampleFile {
                            mu: s.mu,
                            s_re: rows(&s.s, |z| z.re),
                            s_im: rows(&s.s, |z| z.im),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scattering data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DataFile = serde_json::from_str(text).map_err(|e| Error::InvalidData(e.to_string()))?;
        let mut bands = Vec::new();
        for b in file.bands {
            let mut samples = Vec::new();
            for s in b.samples {
                let n = s.s_re.len();
                if s.s_im.len() != n || s.s_re.iter().chain(&s.s_im).any(|r| r.len() != n) {
                    return Err(Error::InvalidData(format!("S at mu={} is not square", s.mu)));
                }
                let m = CMat::from_fn(n, n, |i, j| Complex64::new(s.s_re[i][j], s.s_im[i][j]));
                samples.push(SMatrixSample { mu: s.mu, s: m });
            }
            bands.push(Band { interval: b.interval, samples });
        }
        let d = ScatteringData { a_minus: file.a_minus, a_plus: file.a_plus, bound_states: file.bound_states, bands };
        d.validate()?;
        Ok(d)
    }

    /// `mu,band,S_re_11,S_im_11,...` with entries of 1×1 samples left blank beyond the first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,band,S_re_11,S_im_11,S_re_12,S_im_12,S_re_21,S_im_21,S_re_22,S_im_22\n");
        for (b, s) in self.all_samples() {
            write!(out, "{},{}", fmt_real(s.mu), b + 1).unwrap();
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                if i < s.s.nrows() && j < s.s.ncols() {
                    let z = s.s[(i, j)];
                    write!(out, ",{},{}", fmt_real(z.re), fmt_real(z.im)).unwrap();
                } else {
                    out.push_str(",,");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed 15-significant-digit scientific notation used by all CSV output.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.14e}")
}

fn rows(m: &CMat, f: impl Fn(&Complex64) -> f64) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
}

#[derive(Serialize, Deserialize)]
struct DataFile {
    a_minus: f64,
    a_plus: f64,
    bound_states: Vec<BoundState>,
    bands: Vec<BandFile>,
}

#[derive(Serialize, Deserialize)]
struct BandFile {
    interval: [f64; 2],
    samples: Vec<SampleFile>,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    mu: f64,
    #[serde(rename = "S_re")]
    s_re: Vec<Vec<f64>>,
    #[serde(rename = "S_im")]
    s_im: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Deviation;

    #[test]
    fn free_data_is_the_weight_times_identity() {
        let p = Potential::free(0.0);
        let g = BandGrids::standard(&p, 40, 100.0, 1e-4).unwrap();
        assert!(g.lower.is_empty());
        let d = forward_scatter(&p, &g, -1.0).unwrap();
        assert!(d.bound_states.is_empty());
        for (_, s) in d.all_samples() {
            let w = 0.5 / s.mu.sqrt();
            assert!((&s.s - CMat::identity(2, 2).map(|z| z * w)).norm() < 1e-12);
        }
    }

    #[test]
    fn step_data_satisfies_the_unitarity_identity_and_structure() {
        let p = Potential::step(0.0, 3.0);
        let g = BandGrids::standard(&p, 30, 103.0, 4e-4).unwrap();
        let d = forward_scatter(&p, &g, -1.0).unwrap();
        let r = d.structure();
        assert!(r.unitarity_defect < 1e-10, "{r:?}");
        assert!(r.hermitian_defect <= 1e-12 && r.min_eigenvalue >= -1e-12 && r.rank_violations == 0);
        assert_eq!(r.samples, 60);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let p = Potential::step(0.0, 2.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -8.0 });
        let g = BandGrids::standard(&p, 6, 20.0, 3e-4).unwrap();
        let d = forward_scatter(&p, &g, -7.0).unwrap();
        assert!(!d.bound_states.is_empty());
        let text = d.to_json();
        assert!(text.contains("\"S_re\"") && text.contains("\"N\""));
        let back = ScatteringData::from_json(&text).unwrap();
        assert_eq!(back.bound_states, d.bound_states);
        for ((_, a), (_, b)) in d.all_samples().zip(back.all_samples()) {
            assert_eq!(a.mu, b.mu);
            assert_eq!(a.s, b.s);
        }
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,,,,"));
    }

    #[test]
    fn malformed_data_is_rejected() {
        let bad = r#"{"a_minus":0,"a_plus":1,"bound_states":[{"mu":0.5,"N":1}],"bands":[]}"#;
        assert!(matches!(ScatteringData::from_json(bad), Err(Error::InvalidData(_))));
        assert!(matches!(ScatteringData::from_json("{"), Err(Error::InvalidData(_))));
    }
}
