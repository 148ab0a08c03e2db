//! Flat key=value run configuration. One file holds every tunable; unknown
//! and duplicate keys are errors so a typo cannot silently fall back to a
//! default. Values are validated against module preconditions before any
//! work starts.

use std::fs;
use std::path::Path;

use gpnd_core::aae::{HiddenSpec, TrainingConfig};
use gpnd_core::dataset::SplitFractions;
use gpnd_core::density::PerpExponent;
use gpnd_core::detector::ScoringMode;
use gpnd_core::geometry::DEFAULT_JACOBIAN_STEP;
use gpnd_core::protocol::{ProtocolConfig, ValidationRatio, MAX_RATIOS};
use gpnd_core::rng::Seed;

use crate::error::{io_err, Error, Result};

/// Ground-truth generator family for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthGenerator {
    /// Seeded two-layer tanh network with unit-norm weight rows.
    #[default]
    Smooth,
    /// Seeded linear map plus a constant offset.
    Affine,
}

impl SynthGenerator {
    pub fn name(self) -> &'static str {
        match self {
            SynthGenerator::Smooth => "smooth",
            SynthGenerator::Affine => "affine",
        }
    }
}

/// Every tunable of the pipeline. `Default` holds the documented defaults;
/// a config file overrides individual keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda_recon: f64,
    pub hist_bins: usize,
    pub jacobian_step: f64,
    pub perp_exponent: PerpExponent,
    pub ratios: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub scoring_mode: ScoringMode,
    /// When set, evaluation sweeps all four scoring modes instead of just
    /// `scoring_mode`.
    pub ablation: bool,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub disc_z_hidden: Vec<usize>,
    pub disc_x_hidden: Vec<usize>,
    /// Upper bound on training samples per fold; `None` uses the full block.
    pub train_cap: Option<usize>,
    /// Contamination used when selecting the threshold on validation.
    pub val_outlier_ratio: ValidationRatio,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub synth_classes: u32,
    pub synth_count: usize,
    pub synth_ambient_dim: usize,
    pub synth_latent_dim: usize,
    /// Hidden width of the smooth synthetic generator network.
    pub synth_hidden: usize,
    pub synth_noise_sigma: f64,
    pub synth_generator: SynthGenerator,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hidden = HiddenSpec::default();
        Self {
            latent_dim: 16,
            epochs: 80,
            batch_size: 128,
            learning_rate: 0.002,
            lambda_recon: 2.0,
            hist_bins: 100,
            jacobian_step: DEFAULT_JACOBIAN_STEP,
            perp_exponent: PerpExponent::Codimension,
            ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            folds: 5,
            seed: 7,
            scoring_mode: ScoringMode::Complete,
            ablation: false,
            encoder_hidden: hidden.encoder,
            decoder_hidden: hidden.decoder,
            disc_z_hidden: hidden.disc_z,
            disc_x_hidden: hidden.disc_x,
            train_cap: None,
            val_outlier_ratio: ValidationRatio::MatchTest,
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            synth_classes: 2,
            synth_count: 500,
            synth_ambient_dim: 64,
            synth_latent_dim: 2,
            synth_hidden: 32,
            synth_noise_sigma: 0.02,
            synth_generator: SynthGenerator::Smooth,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Usage(format!("config key {key}: {e}")))
}

/// Comma-separated list; an empty value is an empty list (no hidden layers).
fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| parse_num(key, item.trim()))
        .collect()
}

pub(crate) fn parse_mode(value: &str) -> Result<ScoringMode> {
    ScoringMode::ALL
        .iter()
        .copied()
        .find(|m| m.name() == value)
        .ok_or_else(|| {
            Error::Usage(format!(
                "scoring mode {value:?} is not one of complete, parallel_only, \
                 perpendicular_only, pz_only"
            ))
        })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text)
    }

    /// Parses key=value lines. Blank lines and lines starting with `#` are
    /// skipped; keys may appear at most once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Usage(format!(
                    "config line {}: expected key=value, got {line:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Usage(format!("duplicate config key: {key}")));
            }
            seen.push(key.to_string());
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Applies one key=value pair. Unknown keys are errors naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "latent_dim" => self.latent_dim = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "lambda_recon" => self.lambda_recon = parse_num(key, value)?,
            "hist_bins" => self.hist_bins = parse_num(key, value)?,
            "jacobian_step" => self.jacobian_step = parse_num(key, value)?,
            "perp_exponent" => {
                self.perp_exponent = match value {
                    "codimension" => PerpExponent::Codimension,
                    "surface_area" => PerpExponent::SurfaceArea,
                    _ => {
                        return Err(Error::Usage(format!(
                            "config key perp_exponent: {value:?} is not codimension or \
                             surface_area"
                        )))
                    }
                }
            }
            "ratios" => self.ratios = parse_list(key, value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "scoring_mode" => self.scoring_mode = parse_mode(value)?,
            "ablation" => {
                self.ablation = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(Error::Usage(format!(
                            "config key ablation: {value:?} is not true or false"
                        )))
                    }
                }
            }
            "encoder_hidden" => self.encoder_hidden = parse_list(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse_list(key, value)?,
            "disc_z_hidden" => self.disc_z_hidden = parse_list(key, value)?,
            "disc_x_hidden" => self.disc_x_hidden = parse_list(key, value)?,
            "train_cap" => {
                self.train_cap = match value {
                    "none" | "0" => None,
                    _ => Some(parse_num(key, value)?),
                }
            }
            "val_outlier_ratio" => {
                self.val_outlier_ratio = match value {
                    "match" => ValidationRatio::MatchTest,
                    _ => ValidationRatio::Fixed(parse_num(key, value)?),
                }
            }
            "train_frac" => self.train_frac = parse_num(key, value)?,
            "val_frac" => self.val_frac = parse_num(key, value)?,
            "test_frac" => self.test_frac = parse_num(key, value)?,
            "synth_classes" => self.synth_classes = parse_num(key, value)?,
            "synth_count" => self.synth_count = parse_num(key, value)?,
            "synth_ambient_dim" => self.synth_ambient_dim = parse_num(key, value)?,
            "synth_latent_dim" => self.synth_latent_dim = parse_num(key, value)?,
            "synth_hidden" => self.synth_hidden = parse_num(key, value)?,
            "synth_noise_sigma" => self.synth_noise_sigma = parse_num(key, value)?,
            "synth_generator" => {
                self.synth_generator = match value {
                    "smooth" => SynthGenerator::Smooth,
                    "affine" => SynthGenerator::Affine,
                    _ => {
                        return Err(Error::Usage(format!(
                            "config key synth_generator: {value:?} is not smooth or affine"
                        )))
                    }
                }
            }
            _ => return Err(Error::Usage(format!("unknown config key: {key}"))),
        }
        Ok(())
    }

    /// Cross-field validation, run before any command does work.
    pub fn validate(&self) -> Result<()> {
        fn usage(msg: String) -> Error {
            Error::Usage(msg)
        }
        if self.latent_dim == 0 {
            return Err(usage("latent_dim must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(usage("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(usage("learning_rate must be positive and finite".into()));
        }
        if !(self.lambda_recon >= 0.0) || !self.lambda_recon.is_finite() {
            return Err(usage("lambda_recon must be finite and >= 0".into()));
        }
        if self.hist_bins == 0 {
            return Err(usage("hist_bins must be >= 1".into()));
        }
        if !(self.jacobian_step > 0.0) || !self.jacobian_step.is_finite() {
            return Err(usage("jacobian_step must be positive and finite".into()));
        }
        if self.ratios.is_empty() || self.ratios.len() > MAX_RATIOS {
            return Err(usage(format!("ratios must list 1 to {MAX_RATIOS} values")));
        }
        for &r in &self.ratios {
            if !(r > 0.0 && r < 1.0) {
                return Err(usage(format!("ratio {r} must lie strictly between 0 and 1")));
            }
        }
        if self.folds < 3 {
            return Err(usage("folds must be >= 3".into()));
        }
        if let ValidationRatio::Fixed(r) = self.val_outlier_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(usage(format!(
                    "val_outlier_ratio {r} must lie strictly between 0 and 1"
                )));
            }
        }
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(usage("split fractions must be positive".into()));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(usage(format!("split fractions sum to {sum}, expected 1")));
        }
        if self.synth_classes == 0 {
            return Err(usage("synth_classes must be >= 1".into()));
        }
        if self.synth_count == 0 {
            return Err(usage("synth_count must be >= 1".into()));
        }
        if self.synth_latent_dim == 0 || self.synth_latent_dim >= self.synth_ambient_dim {
            return Err(usage(
                "synth_latent_dim must be >= 1 and below synth_ambient_dim".into(),
            ));
        }
        if self.synth_hidden == 0 {
            return Err(usage("synth_hidden must be >= 1".into()));
        }
        if !(self.synth_noise_sigma >= 0.0) || !self.synth_noise_sigma.is_finite() {
            return Err(usage("synth_noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        let mut t = TrainingConfig::new(self.epochs, self.batch_size, Seed(self.seed));
        t.learning_rate = self.learning_rate;
        t.lambda_recon = self.lambda_recon;
        t
    }

    pub fn hidden_spec(&self) -> HiddenSpec {
        HiddenSpec {
            encoder: self.encoder_hidden.clone(),
            decoder: self.decoder_hidden.clone(),
            disc_z: self.disc_z_hidden.clone(),
            disc_x: self.disc_x_hidden.clone(),
        }
    }

    pub fn split_fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train_frac,
            validation: self.val_frac,
            test: self.test_frac,
        }
    }

    /// Assembles the evaluation protocol configuration. `ablation=true`
    /// sweeps all four scoring modes.
    pub fn protocol_config(&self) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::new(self.latent_dim, Seed(self.seed));
        cfg.folds = self.folds;
        cfg.ratios = self.ratios.clone();
        cfg.training = self.training_config();
        cfg.hidden = self.hidden_spec();
        cfg.bins = self.hist_bins;
        cfg.jacobian_step = self.jacobian_step;
        cfg.perp_exponent = self.perp_exponent;
        cfg.modes = if self.ablation {
            ScoringMode::ALL.to_vec()
        } else {
            vec![self.scoring_mode]
        };
        cfg.train_cap = self.train_cap;
        cfg.val_ratio = self.val_outlier_ratio;
        cfg
    }
}
