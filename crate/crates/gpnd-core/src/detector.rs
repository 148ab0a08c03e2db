//! End-to-end novelty detector: density fitting over a trained autoencoder,
//! per-sample scoring through the tangent-space factorization, threshold
//! selection by F1 search, and the inlier/outlier decision.
//!
//! Decision values live entirely in the log domain; the threshold is a
//! log-probability. The factorized density underflows in linear domain once
//! the ambient dimension reaches the hundreds.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::aae::AaeModel;
use crate::density::{
    build_residual_histogram, fit_generalized_gaussian, log_gamma, log_perpendicular_density,
    GgParams, LatentDensityModel, NoveltyScore, PerpExponent, ResidualNormHistogram,
};
use crate::error::{Error, Result};
use crate::geometry::{
    local_coordinates, network_jacobian, numerical_jacobian, thin_svd, TangentDecomposition,
};
use crate::linalg::{all_finite, Mat};
use crate::metrics::{f1, ScoredSet};

/// Minimum inlier count for density fitting; below this the per-dimension
/// tail fits and the residual histogram are too noisy to threshold on.
pub const MIN_FIT_SAMPLES: usize = 100;

/// Which score components feed the decision value. `Complete` uses the full
/// factorized log density; the others ablate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    #[default]
    Complete,
    ParallelOnly,
    PerpendicularOnly,
    PzOnly,
}

impl ScoringMode {
    pub const ALL: [ScoringMode; 4] = [
        ScoringMode::Complete,
        ScoringMode::ParallelOnly,
        ScoringMode::PerpendicularOnly,
        ScoringMode::PzOnly,
    ];

    /// Decision value of a score under this mode. `PzOnly` drops the
    /// singular-value volume term, keeping the latent density alone.
    pub fn decision_value(self, score: &NoveltyScore) -> f64 {
        match self {
            ScoringMode::Complete => score.log_p_x,
            ScoringMode::ParallelOnly => score.log_p_par,
            ScoringMode::PerpendicularOnly => score.log_p_perp,
            ScoringMode::PzOnly => score.log_pz,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoringMode::Complete => "complete",
            ScoringMode::ParallelOnly => "parallel_only",
            ScoringMode::PerpendicularOnly => "perpendicular_only",
            ScoringMode::PzOnly => "pz_only",
        }
    }
}

/// Decision of the boxed test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Inlier,
    Outlier,
}

/// Trained autoencoder plus the fitted densities and decision policy.
/// Immutable during scoring; `score` and `classify` are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    aae: AaeModel,
    latent_density: LatentDensityModel,
    residual_hist: ResidualNormHistogram,
    /// Log-domain decision threshold; NaN while unset.
    threshold: f64,
    scoring_mode: ScoringMode,
    jacobian_step: f64,
    perp_exponent: PerpExponent,
}

impl DetectorModel {
    pub fn new(
        aae: AaeModel,
        latent_density: LatentDensityModel,
        residual_hist: ResidualNormHistogram,
        scoring_mode: ScoringMode,
        jacobian_step: f64,
        perp_exponent: PerpExponent,
    ) -> Result<Self> {
        if latent_density.dims() != aae.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: aae.latent_dim(),
                got: latent_density.dims(),
            });
        }
        if !(jacobian_step > 0.0 && jacobian_step.is_finite()) {
            return Err(Error::InvalidArgument(
                "jacobian step must be positive and finite",
            ));
        }
        Ok(Self {
            aae,
            latent_density,
            residual_hist,
            threshold: f64::NAN,
            scoring_mode,
            jacobian_step,
            perp_exponent,
        })
    }

    pub fn aae(&self) -> &AaeModel {
        &self.aae
    }

    pub fn latent_density(&self) -> &LatentDensityModel {
        &self.latent_density
    }

    pub fn residual_hist(&self) -> &ResidualNormHistogram {
        &self.residual_hist
    }

    pub fn ambient_dim(&self) -> usize {
        self.aae.ambient_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.aae.latent_dim()
    }

    pub fn scoring_mode(&self) -> ScoringMode {
        self.scoring_mode
    }

    pub fn set_scoring_mode(&mut self, mode: ScoringMode) {
        self.scoring_mode = mode;
    }

    pub fn jacobian_step(&self) -> f64 {
        self.jacobian_step
    }

    pub fn perp_exponent(&self) -> PerpExponent {
        self.perp_exponent
    }

    /// Selected threshold, if one has been set. May be infinite (degenerate
    /// predict-all decisions are legitimate F1 optima).
    pub fn threshold(&self) -> Option<f64> {
        if self.threshold.is_nan() {
            None
        } else {
            Some(self.threshold)
        }
    }

    pub fn set_threshold(&mut self, gamma: f64) -> Result<()> {
        if gamma.is_nan() {
            return Err(Error::InvalidArgument("threshold must not be NaN"));
        }
        self.threshold = gamma;
        Ok(())
    }

    pub fn clear_threshold(&mut self) {
        self.threshold = f64::NAN;
    }
}

/// Linearization of the decoder at the encoding of one point: reconstruction
/// plus thin SVD of the numerical Jacobian.
fn tangent_at(aae: &AaeModel, z_bar: &[f64], h: f64) -> Result<TangentDecomposition> {
    let x_par = aae.decode(z_bar)?;
    let j = network_jacobian(aae.decoder(), z_bar, h)?;
    let svd = thin_svd(&j)?;
    TangentDecomposition::new(svd, z_bar.to_vec(), x_par)
}

/// Fits the two density factors on training inliers: a per-dimension
/// generalized Gaussian over the encodings, and a histogram over the
/// perpendicular residual norms taken at each sample's own tangent space.
pub fn fit_densities(
    aae: &AaeModel,
    samples: &Mat,
    jacobian_step: f64,
    bins: usize,
) -> Result<(LatentDensityModel, ResidualNormHistogram)> {
    if samples.rows() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidArgument(
            "density fitting needs at least 100 inlier samples",
        ));
    }
    if samples.cols() != aae.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: aae.ambient_dim(),
            got: samples.cols(),
        });
    }
    let n = aae.latent_dim();
    let mut encodings: Vec<Vec<f64>> = Vec::with_capacity(samples.rows());
    for i in 0..samples.rows() {
        encodings.push(aae.encode(samples.row(i))?);
    }
    let mut params: Vec<GgParams> = Vec::with_capacity(n);
    let mut constant_dims: Vec<usize> = Vec::new();
    for j in 0..n {
        let column: Vec<f64> = encodings.iter().map(|z| z[j]).collect();
        match fit_generalized_gaussian(&column) {
            Ok(fit) => params.push(fit.params),
            Err(Error::DegenerateSamples) => constant_dims.push(j),
            Err(e) => return Err(e),
        }
    }
    if !constant_dims.is_empty() {
        return Err(Error::DegenerateLatentDims {
            dims: constant_dims,
        });
    }
    let mut norms: Vec<f64> = Vec::with_capacity(samples.rows());
    for (i, z_bar) in encodings.iter().enumerate() {
        let tangent = tangent_at(aae, z_bar, jacobian_step)?;
        let coords = local_coordinates(samples.row(i), &tangent)?;
        norms.push(coords.w_perp_norm);
    }
    let hist = build_residual_histogram(&norms, bins)?;
    Ok((LatentDensityModel::new(params)?, hist))
}

fn validate_sample(model: &DetectorModel, x: &[f64]) -> Result<()> {
    if x.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: x.len(),
        });
    }
    if !all_finite(x) {
        return Err(Error::NonFinite {
            context: "sample to score",
        });
    }
    Ok(())
}

/// Shared scoring chain up to the density terms.
struct ChainPoint {
    z_bar: Vec<f64>,
    singular: Vec<f64>,
    residual_norm: f64,
    degenerate: bool,
}

fn score_chain(model: &DetectorModel, x: &[f64]) -> Result<ChainPoint> {
    let z_bar = model.aae.encode(x)?;
    let tangent = tangent_at(&model.aae, &z_bar, model.jacobian_step)?;
    let coords = local_coordinates(x, &tangent)?;
    Ok(ChainPoint {
        z_bar,
        singular: tangent.svd.s,
        residual_norm: coords.w_perp_norm,
        degenerate: tangent.svd.degenerate,
    })
}

/// Factorized novelty score of one sample: encode, linearize the decoder,
/// split into tangent and orthogonal coordinates, and evaluate both density
/// factors. Rank-deficient Jacobians still score, on floored singular
/// values, with the degenerate flag set.
pub fn score(model: &DetectorModel, x: &[f64]) -> Result<NoveltyScore> {
    validate_sample(model, x)?;
    let chain = score_chain(model, x)?;
    let log_pz = model.latent_density.log_pdf(&chain.z_bar)?;
    let mut log_det_s_inv = 0.0;
    for &si in &chain.singular {
        log_det_s_inv -= si.ln();
    }
    let log_p_perp = log_perpendicular_density(
        chain.residual_norm,
        model.ambient_dim(),
        model.latent_dim(),
        &model.residual_hist,
        model.perp_exponent,
    )?;
    Ok(NoveltyScore::assemble(
        log_pz,
        log_det_s_inv,
        log_p_perp,
        chain.residual_norm,
        chain.degenerate,
    ))
}

/// Scores with an exact radial log density in place of the histogram: the
/// perpendicular factor becomes the sphere average of `radial_log_pdf` at
/// the sample's raw residual norm (no lower clamp). Supports calibration
/// studies where the residual distribution is known in closed form.
pub fn score_with_radial_density<F: Fn(f64) -> f64>(
    model: &DetectorModel,
    x: &[f64],
    radial_log_pdf: F,
) -> Result<NoveltyScore> {
    validate_sample(model, x)?;
    let chain = score_chain(model, x)?;
    let r = chain.residual_norm;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(
            "exact radial scoring needs a positive residual norm",
        ));
    }
    let log_pz = model.latent_density.log_pdf(&chain.z_bar)?;
    let mut log_det_s_inv = 0.0;
    for &si in &chain.singular {
        log_det_s_inv -= si.ln();
    }
    let d = (model.ambient_dim() - model.latent_dim()) as f64;
    let power = match model.perp_exponent {
        PerpExponent::Codimension => d,
        PerpExponent::SurfaceArea => d - 1.0,
    };
    let log_p_perp = log_gamma(d / 2.0)? - 2.0f64.ln() - (d / 2.0) * core::f64::consts::PI.ln()
        - power * r.ln()
        + radial_log_pdf(r);
    Ok(NoveltyScore::assemble(
        log_pz,
        log_det_s_inv,
        log_p_perp,
        r,
        chain.degenerate,
    ))
}

/// Threshold maximizing F1 with inliers positive and `value >= gamma`
/// predicting inlier. Candidates are the midpoints of consecutive distinct
/// sorted scores plus both infinities (the degenerate predict-all
/// decisions); ties break toward the larger, stricter threshold.
pub fn select_threshold(scores: &[f64], is_outlier: &[bool]) -> Result<f64> {
    let set = ScoredSet::new(scores.to_vec(), is_outlier.to_vec())?;
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| a == b);
    let mut candidates: Vec<f64> = Vec::with_capacity(distinct.len() + 1);
    candidates.push(f64::INFINITY);
    for pair in distinct.windows(2).rev() {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(f64::NEG_INFINITY);
    let mut best_gamma = f64::INFINITY;
    let mut best_f1 = -1.0;
    for &gamma in &candidates {
        let value = f1(&set, gamma)?;
        if value > best_f1 {
            best_f1 = value;
            best_gamma = gamma;
        }
    }
    Ok(best_gamma)
}

/// The boxed test: decision value at or above the threshold means inlier.
pub fn classify(model: &DetectorModel, x: &[f64]) -> Result<Classification> {
    let Some(gamma) = model.threshold() else {
        return Err(Error::ThresholdUnset);
    };
    let s = score(model, x)?;
    if model.scoring_mode.decision_value(&s) >= gamma {
        Ok(Classification::Inlier)
    } else {
        Ok(Classification::Outlier)
    }
}
