//! Labeled sample collections, synthetic manifold generation, seeded splits,
//! and outlier injection.
//!
//! Synthetic data follows the manifold-plus-noise model: latents drawn from a
//! standard normal are pushed through a smooth generator into `[0,1]^m`, then
//! perturbed by isotropic Gaussian noise and clipped. Ground-truth latents
//! and the generator itself are returned so tests can score against the
//! closed-form density.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nn::{Activation, DenseNetwork, LayerSpec};
use crate::rng::Seed;

/// Labeled samples with values in `[0,1]`; rows of `samples` are points in
/// ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Mat,
    labels: Vec<u32>,
}

impl Dataset {
    pub fn new(samples: Mat, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != samples.rows() {
            return Err(Error::DimensionMismatch {
                expected: samples.rows(),
                got: labels.len(),
            });
        }
        for &v in samples.data() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument("sample values must lie in [0,1]"));
            }
        }
        Ok(Self { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn samples(&self) -> &Mat {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Indices of all samples carrying `class`, in corpus order.
    pub fn class_indices(&self, class: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding the rows of `indices` in the given order.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        let m = self.ambient_dim();
        let mut data = Vec::with_capacity(indices.len() * m);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument("gather index out of range"));
            }
            data.extend_from_slice(self.samples.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            samples: Mat::from_vec(indices.len(), m, data)?,
            labels,
        })
    }
}

/// Smooth map from latent space into `[0,1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `x = A z + offset`, no squashing; the caller chooses `A` and `offset`
    /// so the data stays inside the unit cube. Keeps the pushforward density
    /// exactly Gaussian for closed-form oracles.
    Affine { a: Mat, offset: Vec<f64> },
    /// Two tanh layers with unit-norm weight rows, output rescaled from
    /// `[-1,1]` to `[0,1]`.
    Tanh2 { net: DenseNetwork },
}

impl Generator {
    pub fn latent_dim(&self) -> usize {
        match self {
            Generator::Affine { a, .. } => a.cols(),
            Generator::Tanh2 { net } => net.input_dim(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Generator::Affine { a, .. } => a.rows(),
            Generator::Tanh2 { net } => net.output_dim(),
        }
    }

    /// Noise-free image of `z` in ambient space.
    pub fn map(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Generator::Affine { a, offset } => {
                if z.len() != a.cols() {
                    return Err(Error::DimensionMismatch {
                        expected: a.cols(),
                        got: z.len(),
                    });
                }
                let mut x = a.matvec(z);
                for (xi, &o) in x.iter_mut().zip(offset) {
                    *xi += o;
                }
                Ok(x)
            }
            Generator::Tanh2 { net } => {
                let y = net.infer(z)?;
                Ok(y.iter().map(|&v| (v + 1.0) / 2.0).collect())
            }
        }
    }
}

/// Builds the seeded nonlinear generator: `n -> hidden -> m`, tanh
/// throughout, each weight row scaled to unit norm so the map is smooth with
/// full-rank Jacobian almost everywhere.
pub fn random_smooth_generator(
    latent_dim: usize,
    ambient_dim: usize,
    hidden: usize,
    seed: Seed,
) -> Result<Generator> {
    let specs = [
        LayerSpec::new(latent_dim, hidden, Activation::Tanh),
        LayerSpec::new(hidden, ambient_dim, Activation::Tanh),
    ];
    let mut net = DenseNetwork::init(&specs, seed)?;
    for layer in 0..2 {
        let spec = net.specs()[layer];
        let offset = net.layer_offset(layer);
        let params = net.params_mut();
        for row in 0..spec.output {
            let start = offset + row * spec.input;
            let row_norm = {
                let mut acc = 0.0;
                for k in 0..spec.input {
                    acc += params[start + k] * params[start + k];
                }
                acc.sqrt()
            };
            if row_norm > 0.0 {
                for k in 0..spec.input {
                    params[start + k] /= row_norm;
                }
            }
        }
    }
    Ok(Generator::Tanh2 { net })
}

/// Recipe for one synthetic class. `seed` should already be derived for this
/// class; all latent and noise draws flow from it.
#[derive(Debug, Clone)]
pub struct SyntheticManifoldConfig {
    pub generator: Generator,
    pub noise_sigma: f64,
    pub count: usize,
    pub label: u32,
    pub seed: Seed,
}

/// Synthetic samples plus the ground truth that produced them.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    /// Row `i` holds the true latent of sample `i`.
    pub latents: Mat,
    pub generator: Generator,
    /// Number of components clamped to the cube boundary after noise.
    pub clipped_components: usize,
}

/// Draws `count` samples of the manifold-plus-noise model. Per sample, the
/// latent normals are drawn before the noise normals, so the stream layout
/// is part of the determinism contract.
pub fn generate_synthetic(config: &SyntheticManifoldConfig) -> Result<SyntheticDataset> {
    let n = config.generator.latent_dim();
    let m = config.generator.ambient_dim();
    if n >= m {
        return Err(Error::InvalidArgument("latent dim must be below ambient dim"));
    }
    if !(config.noise_sigma >= 0.0) || !config.noise_sigma.is_finite() {
        return Err(Error::InvalidArgument("noise sigma must be finite and >= 0"));
    }
    if config.count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive"));
    }
    let mut rng = config.seed.rng();
    let mut samples = Vec::with_capacity(config.count * m);
    let mut latents = Vec::with_capacity(config.count * n);
    let mut clipped = 0usize;
    for _ in 0..config.count {
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut x = config.generator.map(&z)?;
        for xi in x.iter_mut() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *xi += config.noise_sigma * noise;
            if *xi < 0.0 {
                *xi = 0.0;
                clipped += 1;
            } else if *xi > 1.0 {
                *xi = 1.0;
                clipped += 1;
            }
        }
        samples.extend_from_slice(&x);
        latents.extend_from_slice(&z);
    }
    Ok(SyntheticDataset {
        dataset: Dataset::new(
            Mat::from_vec(config.count, m, samples)?,
            vec![config.label; config.count],
        )?,
        latents: Mat::from_vec(config.count, n, latents)?,
        generator: config.generator.clone(),
        clipped_components: clipped,
    })
}

/// Multi-class synthetic corpus: stacked per-class samples with their true
/// latents and one ground-truth generator per class label.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    /// Row `i` holds the true latent of sample `i`.
    pub latents: Mat,
    /// Ground-truth generator per class label, in class order.
    pub generators: Vec<(u32, Generator)>,
}

impl SyntheticCorpus {
    /// Stacks per-class synthetic datasets in the given order. All parts
    /// must share ambient and latent dimensions and carry distinct labels.
    pub fn from_classes(parts: &[SyntheticDataset]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("corpus needs at least one class"));
        };
        let m = first.dataset.ambient_dim();
        let n = first.latents.cols();
        let total: usize = parts.iter().map(|p| p.dataset.len()).sum();
        let mut samples = Vec::with_capacity(total * m);
        let mut labels = Vec::with_capacity(total);
        let mut latents = Vec::with_capacity(total * n);
        let mut generators = Vec::with_capacity(parts.len());
        for part in parts {
            if part.dataset.ambient_dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: part.dataset.ambient_dim(),
                });
            }
            if part.latents.cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: part.latents.cols(),
                });
            }
            let label = part.dataset.labels()[0];
            if generators.iter().any(|&(l, _)| l == label) {
                return Err(Error::InvalidArgument(
                    "corpus classes must carry distinct labels",
                ));
            }
            samples.extend_from_slice(part.dataset.samples().data());
            labels.extend_from_slice(part.dataset.labels());
            latents.extend_from_slice(part.latents.data());
            generators.push((label, part.generator.clone()));
        }
        Ok(Self {
            dataset: Dataset::new(Mat::from_vec(total, m, samples)?, labels)?,
            latents: Mat::from_vec(total, n, latents)?,
            generators,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latents.cols()
    }
}

/// Train/validation/test fractions; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const DEFAULT: Self = Self {
        train: 0.6,
        validation: 0.2,
        test: 0.2,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InfeasibleSplit("fractions must lie in [0,1]"));
        }
        if ((self.train + self.validation + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::InfeasibleSplit("fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Seeded shuffle of `0..n` followed by a contiguous partition. Each part
/// with a positive fraction must receive at least one element.
pub fn split_indices(
    n: usize,
    fractions: &SplitFractions,
    seed: Seed,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    fractions.validate()?;
    let n_train = (n as f64 * fractions.train).round() as usize;
    let n_val = (n as f64 * fractions.validation).round() as usize;
    if n_train + n_val > n {
        return Err(Error::InfeasibleSplit("parts exceed available samples"));
    }
    let n_test = n - n_train - n_val;
    for (count, frac) in [
        (n_train, fractions.train),
        (n_val, fractions.validation),
        (n_test, fractions.test),
    ] {
        if frac > 0.0 && count == 0 {
            return Err(Error::InfeasibleSplit("a requested part would be empty"));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let val_end = n_train + n_val;
    Ok((
        order[..n_train].to_vec(),
        order[n_train..val_end].to_vec(),
        order[val_end..].to_vec(),
    ))
}

/// Splits a dataset into train/validation/test subsets.
pub fn split(
    dataset: &Dataset,
    fractions: &SplitFractions,
    seed: Seed,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, va, te) = split_indices(dataset.len(), fractions, seed)?;
    Ok((
        dataset.gather(&tr)?,
        dataset.gather(&va)?,
        dataset.gather(&te)?,
    ))
}

/// Index-level evaluation set: inliers first, then injected outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedSet {
    /// Corpus indices of the set members.
    pub indices: Vec<usize>,
    /// Parallel to `indices`; true marks an injected outlier.
    pub is_outlier: Vec<bool>,
}

/// Number of outliers making up fraction `ratio` of the final set when
/// joined with `inlier_count` inliers.
pub fn outlier_count(inlier_count: usize, ratio: f64) -> usize {
    (inlier_count as f64 * ratio / (1.0 - ratio)).round() as usize
}

/// Appends outliers drawn uniformly from `donors` to `inliers` so that the
/// outlier fraction of the result is `ratio`. Sampling is without
/// replacement while the donor pool lasts; an oversized request reuses
/// donors uniformly for the remainder.
pub fn inject_outliers(
    inliers: &[usize],
    donors: &[usize],
    ratio: f64,
    seed: Seed,
) -> Result<InjectedSet> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument("outlier ratio must lie in (0,1)"));
    }
    if donors.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let want = outlier_count(inliers.len(), ratio);
    let mut rng = seed.rng();
    let mut chosen = Vec::with_capacity(want);
    if want <= donors.len() {
        let picks = rand::seq::index::sample(&mut rng, donors.len(), want);
        chosen.extend(picks.iter().map(|i| donors[i]));
    } else {
        chosen.extend_from_slice(donors);
        for _ in donors.len()..want {
            chosen.push(donors[rng.random_range(0..donors.len())]);
        }
    }
    let mut indices = Vec::with_capacity(inliers.len() + want);
    let mut is_outlier = Vec::with_capacity(inliers.len() + want);
    indices.extend_from_slice(inliers);
    is_outlier.extend(core::iter::repeat(false).take(inliers.len()));
    indices.extend_from_slice(&chosen);
    is_outlier.extend(core::iter::repeat(true).take(chosen.len()));
    Ok(InjectedSet { indices, is_outlier })
}
