//! Per-class evaluation protocol: seeded fold assignment over the inlier
//! class, training and density fitting per fold, threshold selection on an
//! outlier-injected validation split, and metrics on outlier-injected test
//! splits across a sweep of contamination ratios and scoring modes.
//!
//! All randomness derives from one master seed through tagged sub-streams,
//! so a full run is reproducible bit for bit. Report assembly is an ordered
//! merge over (mode, ratio, fold), independent of execution order.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::aae::{train, AaeModel, HiddenSpec, TrainingConfig};
use crate::dataset::{inject_outliers, outlier_count, Dataset};
use crate::density::{NoveltyScore, PerpExponent};
use crate::detector::{fit_densities, score, select_threshold, DetectorModel, ScoringMode};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_JACOBIAN_STEP;
use crate::linalg::Mat;
use crate::metrics::{compute_report, MetricsReport, ScoredSet};
use crate::rng::{tag, Seed};

/// Upper bound on the ratio sweep length; injection sub-seeds are laid out
/// in strides of this many indices per fold.
pub const MAX_RATIOS: usize = 64;

/// How the validation split is contaminated for threshold selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationRatio {
    /// Use the same outlier ratio as the test split under evaluation.
    MatchTest,
    /// Use one fixed ratio for every evaluation ratio.
    Fixed(f64),
}

/// Full protocol configuration. The training seed is overridden per fold;
/// only the master `seed` matters for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub folds: usize,
    pub ratios: Vec<f64>,
    pub training: TrainingConfig,
    pub hidden: HiddenSpec,
    pub latent_dim: usize,
    pub bins: usize,
    pub jacobian_step: f64,
    pub perp_exponent: PerpExponent,
    pub modes: Vec<ScoringMode>,
    /// Cap on training samples per fold; the fold's train block is already
    /// shuffled, so the cap keeps its leading entries.
    pub train_cap: Option<usize>,
    pub val_ratio: ValidationRatio,
    pub seed: Seed,
}

impl ProtocolConfig {
    pub fn new(latent_dim: usize, seed: Seed) -> Self {
        Self {
            folds: 5,
            ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            training: TrainingConfig::new(80, 128, seed),
            hidden: HiddenSpec::default(),
            latent_dim,
            bins: 100,
            jacobian_step: DEFAULT_JACOBIAN_STEP,
            perp_exponent: PerpExponent::Codimension,
            modes: vec![ScoringMode::Complete],
            train_cap: None,
            val_ratio: ValidationRatio::MatchTest,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 3 {
            return Err(Error::InvalidArgument(
                "fold rotation needs at least 3 folds",
            ));
        }
        if self.ratios.is_empty() || self.ratios.len() > MAX_RATIOS {
            return Err(Error::InvalidArgument(
                "ratio sweep must hold between 1 and 64 entries",
            ));
        }
        if self.ratios.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::InvalidArgument(
                "outlier ratios must lie strictly between 0 and 1",
            ));
        }
        if let ValidationRatio::Fixed(r) = self.val_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidArgument(
                    "fixed validation ratio must lie strictly between 0 and 1",
                ));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument("at least one scoring mode"));
        }
        if self.latent_dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin"));
        }
        self.training.validate()?;
        Ok(())
    }
}

/// One fold's index assignment, in the index space handed to
/// `fold_assignments` (positions of the shuffled population).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Rotated cross-validation assignment: one seeded shuffle of `0..n`, cut
/// into `folds` contiguous blocks; fold `k` tests on block `k`, validates
/// on block `k+1` (cyclically), and trains on the rest. Five folds give the
/// 60/20/20 split per fold.
pub fn fold_assignments(n: usize, folds: usize, seed: Seed) -> Result<Vec<FoldSplit>> {
    if folds < 3 {
        return Err(Error::InvalidArgument(
            "fold rotation needs at least 3 folds",
        ));
    }
    if n < folds {
        return Err(Error::InfeasibleSplit("fewer samples than folds"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    // Contiguous blocks, the first n % folds of them one longer.
    let base = n / folds;
    let extra = n % folds;
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(folds);
    let mut at = 0usize;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        blocks.push(order[at..at + len].to_vec());
        at += len;
    }
    let mut out = Vec::with_capacity(folds);
    for k in 0..folds {
        let val_block = (k + 1) % folds;
        let mut train = Vec::with_capacity(n - blocks[k].len() - blocks[val_block].len());
        for (b, block) in blocks.iter().enumerate() {
            if b != k && b != val_block {
                train.extend_from_slice(block);
            }
        }
        out.push(FoldSplit {
            train,
            validation: blocks[val_block].clone(),
            test: blocks[k].clone(),
        });
    }
    Ok(out)
}

/// Corpus indices of the inlier class and of every other class (the outlier
/// donor pool). Errors when either side is empty.
pub fn inlier_and_donor_indices(
    corpus: &Dataset,
    inlier_class: u32,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut inliers = Vec::new();
    let mut donors = Vec::new();
    for (i, &label) in corpus.labels().iter().enumerate() {
        if label == inlier_class {
            inliers.push(i);
        } else {
            donors.push(i);
        }
    }
    if inliers.is_empty() {
        return Err(Error::InvalidArgument(
            "inlier class absent from the corpus",
        ));
    }
    if donors.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok((inliers, donors))
}

/// Metrics of one (fold, ratio) evaluation under one scoring mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRatioReport {
    pub fold: usize,
    pub ratio: f64,
    /// Threshold selected on the contaminated validation split.
    pub threshold: f64,
    pub metrics: MetricsReport,
}

/// Per-metric aggregate over folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAggregate {
    pub f1: f64,
    pub auroc: f64,
    pub fpr_at_95tpr: f64,
    pub detection_error: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
}

/// All folds of one ratio plus their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub ratio: f64,
    pub per_fold: Vec<FoldRatioReport>,
    pub mean: MetricAggregate,
    pub stddev: MetricAggregate,
}

/// Ratio sweep under one scoring mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub mode: ScoringMode,
    pub ratios: Vec<RatioSummary>,
}

/// Full protocol result for one inlier class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub inlier_class: u32,
    pub folds: usize,
    pub modes: Vec<ModeReport>,
}

fn metric_values(r: &MetricsReport) -> [f64; 6] {
    [
        r.f1,
        r.auroc,
        r.fpr_at_95tpr,
        r.detection_error,
        r.aupr_in,
        r.aupr_out,
    ]
}

fn aggregate(reports: &[FoldRatioReport]) -> (MetricAggregate, MetricAggregate) {
    let k = reports.len() as f64;
    let mut mean = [0.0; 6];
    for r in reports {
        let v = metric_values(&r.metrics);
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= k;
    }
    let mut var = [0.0; 6];
    for r in reports {
        let v = metric_values(&r.metrics);
        for (s, (x, m)) in var.iter_mut().zip(v.into_iter().zip(mean)) {
            *s += (x - m) * (x - m);
        }
    }
    let denom = if reports.len() > 1 { k - 1.0 } else { 1.0 };
    let std = var.map(|s| (s / denom).sqrt());
    let pack = |a: [f64; 6]| MetricAggregate {
        f1: a[0],
        auroc: a[1],
        fpr_at_95tpr: a[2],
        detection_error: a[3],
        aupr_in: a[4],
        aupr_out: a[5],
    };
    (pack(mean), pack(std))
}

fn cached_score(
    detector: &DetectorModel,
    corpus: &Dataset,
    cache: &mut [Option<NoveltyScore>],
    idx: usize,
) -> Result<NoveltyScore> {
    if cache[idx].is_none() {
        cache[idx] = Some(score(detector, corpus.sample(idx))?);
    }
    Ok(cache[idx].expect("just filled"))
}

/// Runs the full per-class protocol: for every fold, train an autoencoder
/// on the fold's train block, fit the densities on the same block, then for
/// every ratio select a threshold on the contaminated validation block and
/// evaluate on the contaminated test block under every configured mode.
pub fn run_protocol(
    corpus: &Dataset,
    inlier_class: u32,
    config: &ProtocolConfig,
) -> Result<ProtocolReport> {
    config.validate()?;
    if config.latent_dim >= corpus.ambient_dim() {
        return Err(Error::InvalidArgument(
            "latent dimension must be below the ambient dimension",
        ));
    }
    let (inliers, donors) = inlier_and_donor_indices(corpus, inlier_class)?;
    let assignments = fold_assignments(
        inliers.len(),
        config.folds,
        config.seed.derive(tag::SPLIT, 0),
    )?;
    // Positions from fold_assignments index the inlier list; map to corpus.
    let to_corpus =
        |positions: &[usize]| -> Vec<usize> { positions.iter().map(|&p| inliers[p]).collect() };
    let mut per_mode_ratio: Vec<Vec<Vec<FoldRatioReport>>> =
        vec![vec![Vec::with_capacity(config.folds); config.ratios.len()]; config.modes.len()];
    for (fold_idx, split) in assignments.iter().enumerate() {
        let mut train_idx = to_corpus(&split.train);
        if let Some(cap) = config.train_cap {
            train_idx.truncate(cap);
        }
        let m = corpus.ambient_dim();
        let mut train_mat = Mat::zeros(train_idx.len(), m);
        for (row, &i) in train_idx.iter().enumerate() {
            train_mat.row_mut(row).copy_from_slice(corpus.sample(i));
        }
        let mut aae = AaeModel::new(
            m,
            config.latent_dim,
            &config.hidden,
            config.seed.derive(tag::NET_INIT, fold_idx as u64),
        )?;
        let mut training = config.training.clone();
        training.seed = config.seed.derive(tag::TRAIN, fold_idx as u64);
        train(&mut aae, &train_mat, &training)?;
        let (latent, hist) = fit_densities(&aae, &train_mat, config.jacobian_step, config.bins)?;
        let detector = DetectorModel::new(
            aae,
            latent,
            hist,
            ScoringMode::Complete,
            config.jacobian_step,
            config.perp_exponent,
        )?;
        let mut cache: Vec<Option<NoveltyScore>> = vec![None; corpus.len()];
        let validation_idx = to_corpus(&split.validation);
        let test_idx = to_corpus(&split.test);
        for (ratio_idx, &ratio) in config.ratios.iter().enumerate() {
            let val_ratio = match config.val_ratio {
                ValidationRatio::MatchTest => ratio,
                ValidationRatio::Fixed(r) => r,
            };
            if outlier_count(validation_idx.len(), val_ratio) == 0
                || outlier_count(test_idx.len(), ratio) == 0
            {
                return Err(Error::InfeasibleSplit(
                    "ratio too small to inject a single outlier",
                ));
            }
            let stride = (fold_idx * MAX_RATIOS + ratio_idx) as u64;
            let val_set = inject_outliers(
                &validation_idx,
                &donors,
                val_ratio,
                config.seed.derive(tag::INJECT_VAL, stride),
            )?;
            let test_set = inject_outliers(
                &test_idx,
                &donors,
                ratio,
                config.seed.derive(tag::INJECT_TEST, stride),
            )?;
            let mut val_scores = Vec::with_capacity(val_set.indices.len());
            for &i in &val_set.indices {
                val_scores.push(cached_score(&detector, corpus, &mut cache, i)?);
            }
            let mut test_scores = Vec::with_capacity(test_set.indices.len());
            for &i in &test_set.indices {
                test_scores.push(cached_score(&detector, corpus, &mut cache, i)?);
            }
            for (mode_idx, &mode) in config.modes.iter().enumerate() {
                let val_values: Vec<f64> =
                    val_scores.iter().map(|s| mode.decision_value(s)).collect();
                let gamma = select_threshold(&val_values, &val_set.is_outlier)?;
                let test_values: Vec<f64> =
                    test_scores.iter().map(|s| mode.decision_value(s)).collect();
                let set = ScoredSet::new(test_values, test_set.is_outlier.clone())?;
                let metrics = compute_report(&set, gamma)?;
                per_mode_ratio[mode_idx][ratio_idx].push(FoldRatioReport {
                    fold: fold_idx,
                    ratio,
                    threshold: gamma,
                    metrics,
                });
            }
        }
    }
    let mut modes = Vec::with_capacity(config.modes.len());
    for (mode_idx, &mode) in config.modes.iter().enumerate() {
        let mut ratios = Vec::with_capacity(config.ratios.len());
        for (ratio_idx, &ratio) in config.ratios.iter().enumerate() {
            let per_fold = core::mem::take(&mut per_mode_ratio[mode_idx][ratio_idx]);
            let (mean, stddev) = aggregate(&per_fold);
            ratios.push(RatioSummary {
                ratio,
                per_fold,
                mean,
                stddev,
            });
        }
        modes.push(ModeReport { mode, ratios });
    }
    Ok(ProtocolReport {
        inlier_class,
        folds: config.folds,
        modes,
    })
}
