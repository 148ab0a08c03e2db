//! Offline density estimation and the factorized novelty log density.
//!
//! The latent coordinates are modeled as independent generalized Gaussians
//! fitted by moment matching; the perpendicular residual norm is modeled by
//! an equal-width histogram. Everything is computed and combined strictly in
//! the log domain, since the ambient dimension puts linear-domain products
//! far below `f64` underflow.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Lanczos approximation, g = 7, 9 coefficients. Absolute error of
/// `log_gamma` stays below 1e-10 on (0, 100].
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn log_gamma_positive(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: ln G(x) = ln(pi / sin(pi x)) - ln G(1 - x).
        (PI / (PI * x).sin()).ln() - log_gamma_positive(1.0 - x)
    } else {
        let y = x - 1.0;
        let mut a = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            a += c / (y + i as f64);
        }
        let t = y + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + a.ln()
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument("log_gamma requires x > 0"));
    }
    Ok(log_gamma_positive(x))
}

/// Parameters of one generalized Gaussian: density proportional to
/// `exp(-(|x - mu| / alpha)^beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgParams {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Fit result; `beta_clamped` reports that the moment ratio fell outside the
/// range achievable on the bisection interval and the bound was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgFit {
    pub params: GgParams,
    pub beta_clamped: bool,
}

const GG_BETA_LO: f64 = 0.1;
const GG_BETA_HI: f64 = 10.0;

/// Moment ratio `E|x - mu| / sqrt(E (x - mu)^2)` of a generalized Gaussian
/// with shape `beta`; strictly increasing in `beta`.
fn gg_moment_ratio(beta: f64) -> f64 {
    (log_gamma_positive(2.0 / beta)
        - 0.5 * (log_gamma_positive(1.0 / beta) + log_gamma_positive(3.0 / beta)))
    .exp()
}

/// Fits a generalized Gaussian by moment matching: `mu` is the sample mean,
/// `beta` solves the absolute-to-quadratic moment ratio by bisection on
/// [0.1, 10], and `alpha` comes from the second moment.
pub fn fit_generalized_gaussian(samples: &[f64]) -> Result<GgFit> {
    if samples.len() < 30 {
        return Err(Error::InvalidArgument(
            "generalized Gaussian fit needs at least 30 samples",
        ));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let mut abs_moment = 0.0;
    let mut sq_moment = 0.0;
    for &x in samples {
        let d = x - mu;
        abs_moment += d.abs();
        sq_moment += d * d;
    }
    abs_moment /= n;
    sq_moment /= n;
    // Constant inputs leave only rounding noise around the mean; the mean
    // itself carries summation error that grows with the sample count, so
    // the floor scales with n.
    let noise_floor = f64::EPSILON * (1.0 + mu.abs()) * n;
    if sq_moment <= noise_floor * noise_floor {
        return Err(Error::DegenerateSamples);
    }
    let target = abs_moment / sq_moment.sqrt();
    let (beta, clamped) = if target <= gg_moment_ratio(GG_BETA_LO) {
        (GG_BETA_LO, true)
    } else if target >= gg_moment_ratio(GG_BETA_HI) {
        (GG_BETA_HI, true)
    } else {
        let mut lo = GG_BETA_LO;
        let mut hi = GG_BETA_HI;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if gg_moment_ratio(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };
    let alpha = (sq_moment
        * (log_gamma_positive(1.0 / beta) - log_gamma_positive(3.0 / beta)).exp())
    .sqrt();
    Ok(GgFit {
        params: GgParams { mu, alpha, beta },
        beta_clamped: clamped,
    })
}

/// Per-dimension generalized Gaussian model of the latent density; the
/// dimensions are treated as independent, so the log density is a sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDensityModel {
    params: Vec<GgParams>,
}

impl LatentDensityModel {
    pub fn new(params: Vec<GgParams>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidArgument("latent density needs >= 1 dimension"));
        }
        for p in &params {
            let ok = p.mu.is_finite()
                && p.alpha.is_finite()
                && p.beta.is_finite()
                && p.alpha > 0.0
                && p.beta > 0.0;
            if !ok {
                return Err(Error::InvalidArgument(
                    "latent density parameters must be finite with positive alpha, beta",
                ));
            }
        }
        Ok(Self { params })
    }

    pub fn dims(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[GgParams] {
        &self.params
    }

    /// Log density at `z`: sum over dimensions of
    /// `ln beta - ln(2 alpha) - ln G(1/beta) - (|z - mu| / alpha)^beta`.
    pub fn log_pdf(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: z.len(),
            });
        }
        let mut acc = 0.0;
        for (p, &zj) in self.params.iter().zip(z) {
            acc += p.beta.ln()
                - (2.0 * p.alpha).ln()
                - log_gamma_positive(1.0 / p.beta)
                - ((zj - p.mu).abs() / p.alpha).powf(p.beta);
        }
        Ok(acc)
    }
}

/// Binned density estimate of the perpendicular residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNormHistogram {
    bin_edges: Vec<f64>,
    densities: Vec<f64>,
    floor_density: f64,
    r_min: f64,
}

/// Builds the histogram on `[0, max * (1 + 1e-6)]` with equal-width bins.
pub fn build_residual_histogram(norms: &[f64], bins: usize) -> Result<ResidualNormHistogram> {
    let max = norms
        .iter()
        .fold(0.0f64, |acc, &r| acc.max(r));
    let upper = if max > 0.0 { max * (1.0 + 1e-6) } else { 1e-12 };
    build_residual_histogram_on(norms, bins, upper)
}

/// Builds the histogram on an explicit support `[0, upper)`; norms at or
/// beyond `upper` are rejected.
pub fn build_residual_histogram_on(
    norms: &[f64],
    bins: usize,
    upper: f64,
) -> Result<ResidualNormHistogram> {
    if norms.is_empty() {
        return Err(Error::InvalidArgument("histogram needs at least one norm"));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin"));
    }
    if !(upper > 0.0) || !upper.is_finite() {
        return Err(Error::InvalidArgument("histogram upper edge must be positive"));
    }
    let b = bins;
    let edges: Vec<f64> = (0..=b).map(|k| upper * k as f64 / b as f64).collect();
    let width = upper / b as f64;
    let mut counts = vec![0u64; b];
    let mut min_positive = f64::INFINITY;
    for &r in norms {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::InvalidArgument("residual norms must be finite and >= 0"));
        }
        if r >= upper {
            return Err(Error::InvalidArgument("residual norm at or beyond upper edge"));
        }
        if r > 0.0 && r < min_positive {
            min_positive = r;
        }
        let mut idx = ((r / width) as usize).min(b - 1);
        while idx + 1 < b && r >= edges[idx + 1] {
            idx += 1;
        }
        while idx > 0 && r < edges[idx] {
            idx -= 1;
        }
        counts[idx] += 1;
    }
    let n = norms.len() as f64;
    let densities: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    // Evaluating the log density at a residual of zero must stay finite: a
    // sample exactly on the tangent plane scores high, it does not crash.
    let r_min = if min_positive.is_finite() {
        min_positive * 1e-3
    } else {
        1e-12
    };
    Ok(ResidualNormHistogram {
        bin_edges: edges,
        densities,
        floor_density: 1.0 / (n * width * 10.0),
        r_min,
    })
}

impl ResidualNormHistogram {
    /// Rebuilds a histogram from persisted parts.
    pub fn from_parts(
        bin_edges: Vec<f64>,
        densities: Vec<f64>,
        floor_density: f64,
        r_min: f64,
    ) -> Result<Self> {
        if bin_edges.len() != densities.len() + 1 || densities.is_empty() {
            return Err(Error::Codec("histogram edge/density lengths inconsistent"));
        }
        if !bin_edges.windows(2).all(|w| w[1] > w[0]) || bin_edges[0] != 0.0 {
            return Err(Error::Codec("histogram edges must start at 0 and increase"));
        }
        if !(floor_density > 0.0) || !(r_min > 0.0) {
            return Err(Error::Codec("histogram floor and r_min must be positive"));
        }
        if densities.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::Codec("histogram densities must be finite and >= 0"));
        }
        Ok(Self {
            bin_edges,
            densities,
            floor_density,
            r_min,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn floor_density(&self) -> f64 {
        self.floor_density
    }

    /// Lower clamp for the `ln r` term of the perpendicular density.
    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Index of the half-open bin `[lo, hi)` containing `r`, if any.
    fn bin_index(&self, r: f64) -> Option<usize> {
        let b = self.densities.len();
        let upper = self.bin_edges[b];
        if r < 0.0 || r >= upper {
            return None;
        }
        let width = upper / b as f64;
        let mut idx = ((r / width) as usize).min(b - 1);
        while idx + 1 < b && r >= self.bin_edges[idx + 1] {
            idx += 1;
        }
        while idx > 0 && r < self.bin_edges[idx] {
            idx -= 1;
        }
        Some(idx)
    }

    /// Log density of the containing bin; the floor density substitutes for
    /// empty bins and out-of-support queries.
    pub fn eval_log(&self, r: f64) -> f64 {
        match self.bin_index(r) {
            Some(i) if self.densities[i] > 0.0 => self.densities[i].ln(),
            _ => self.floor_density.ln(),
        }
    }
}

/// Which power of the residual norm divides the sphere-average density: the
/// full codimension `d = m - n`, or `d - 1` matching the surface area of the
/// `(d-1)`-sphere of radius `r`. Neither is asserted as ground truth; the
/// default is `Codimension`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerpExponent {
    #[default]
    Codimension,
    SurfaceArea,
}

/// Log density of the parallel coordinates: `-sum(ln s_i) + log_pz`. The
/// singular values rescale the latent volume element, `log_pz` is the latent
/// log density at the encoded point.
pub fn log_parallel_density(s: &[f64], log_pz: f64) -> f64 {
    let mut acc = log_pz;
    for &si in s {
        debug_assert!(si > 0.0, "singular values must be positive after flooring");
        acc -= si.ln();
    }
    acc
}

/// Log density of the perpendicular component: the radial histogram density
/// averaged over the sphere of radius `r` in the `(m - n)`-dimensional
/// orthogonal complement. Residuals below the histogram's `r_min` use
/// `r_min` in the `ln r` term so on-manifold samples stay finite.
pub fn log_perpendicular_density(
    r: f64,
    m: usize,
    n: usize,
    hist: &ResidualNormHistogram,
    exponent: PerpExponent,
) -> Result<f64> {
    if m <= n {
        return Err(Error::InvalidArgument(
            "perpendicular density needs ambient dim above latent dim",
        ));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument("residual norm must be >= 0"));
    }
    let d = (m - n) as f64;
    let power = match exponent {
        PerpExponent::Codimension => d,
        PerpExponent::SurfaceArea => d - 1.0,
    };
    let r_clamped = r.max(hist.r_min);
    Ok(log_gamma_positive(d / 2.0) - 2.0f64.ln() - (d / 2.0) * PI.ln()
        - power * r_clamped.ln()
        + hist.eval_log(r))
}

/// Factorized novelty score of one sample, in the log domain. The decision
/// value of the complete score is `log_p_x`; the component fields support
/// the ablation scoring modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyScore {
    /// Log density of the tangent-space coordinates.
    pub log_p_par: f64,
    /// Log density of the orthogonal residual.
    pub log_p_perp: f64,
    /// Complete factorized log density; exactly `log_p_par + log_p_perp`.
    pub log_p_x: f64,
    /// Latent log density alone, without the volume-element term.
    pub log_pz: f64,
    /// `-sum(ln s_i)`, the log determinant of the inverse singular values.
    pub log_det_s_inv: f64,
    /// Perpendicular residual norm of the sample.
    pub residual_norm: f64,
    /// True when the decoder Jacobian was rank deficient at this sample and
    /// floored singular values were used.
    pub degenerate: bool,
}

impl NoveltyScore {
    /// Assembles the score from its components. `log_p_par` is exactly
    /// `log_det_s_inv + log_pz` and `log_p_x` exactly the factor sum.
    pub fn assemble(
        log_pz: f64,
        log_det_s_inv: f64,
        log_p_perp: f64,
        residual_norm: f64,
        degenerate: bool,
    ) -> Self {
        let log_p_par = log_det_s_inv + log_pz;
        Self {
            log_p_par,
            log_p_perp,
            log_p_x: log_p_par + log_p_perp,
            log_pz,
            log_det_s_inv,
            residual_norm,
            degenerate,
        }
    }
}
