//! Command-line orchestration: generate, train, score, eval. Every command
//! reads one flat config file, derives all randomness from a single seed,
//! and writes outputs atomically, so identical invocations produce
//! byte-identical outputs.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use gpnd_core::aae::{train, AaeModel};
use gpnd_core::dataset::{
    generate_synthetic, inject_outliers, random_smooth_generator, split_indices, Dataset,
    Generator, SyntheticCorpus, SyntheticDataset, SyntheticManifoldConfig,
};
use gpnd_core::detector::{fit_densities, select_threshold, DetectorModel};
use gpnd_core::linalg::Mat;
use gpnd_core::metrics::{compute_report, ScoredSet};
use gpnd_core::protocol::{inlier_and_donor_indices, run_protocol, ValidationRatio};
use gpnd_core::rng::{tag, Seed};
use rand::Rng;

use crate::batch::score_batch;
use crate::config::{parse_mode, RunConfig, SynthGenerator};
use crate::error::{Error, Result};
use crate::format;
use crate::idx;
use crate::report;

#[derive(Debug, Parser)]
#[command(
    name = "gpnd",
    version,
    about = "Generative probabilistic novelty detection pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-class dataset plus a JSON manifest.
    Generate {
        /// Flat key=value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset file to write; the manifest lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a detector on one inlier class and persist it with a threshold
    /// selected on a contaminated validation split.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset file, or an images,labels IDX pair.
        #[arg(long)]
        data: String,
        /// Inlier class label.
        #[arg(long)]
        class: u32,
        /// Model file to write.
        #[arg(long)]
        model: PathBuf,
        /// Optional JSON training report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score samples with a persisted detector.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// Dataset file, or an images,labels IDX pair.
        #[arg(long)]
        data: String,
        /// JSON output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scoring mode stored in the model.
        #[arg(long)]
        mode: Option<String>,
        /// Caps scoring workers; output order is identical at any setting.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the fold/ratio evaluation protocol for one inlier class.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset file, or an images,labels IDX pair.
        #[arg(long)]
        data: String,
        /// Inlier class label.
        #[arg(long)]
        class: u32,
        /// JSON report file to write.
        #[arg(long)]
        out: PathBuf,
        /// Restricts the sweep to one scoring mode.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = load_config(config.as_deref(), seed)?;
            cmd_generate(&cfg, &out)
        }
        Command::Train {
            config,
            data,
            class,
            model,
            out,
            seed,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            cmd_train(&cfg, &data, class, &model, out.as_deref())
        }
        Command::Score {
            model,
            data,
            out,
            mode,
            threads,
        } => cmd_score(&model, &data, out.as_deref(), mode.as_deref(), threads),
        Command::Eval {
            config,
            data,
            class,
            out,
            mode,
            seed,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            cmd_eval(&cfg, &data, class, &out, mode.as_deref())
        }
    }
}

fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `--data` accepts a dataset file path or an `images,labels` IDX pair.
fn load_data(spec: &str) -> Result<Dataset> {
    if let Some((images, labels)) = spec.split_once(',') {
        idx::load_idx(Path::new(images.trim()), Path::new(labels.trim()))
    } else {
        Ok(format::load_dataset(Path::new(spec))?.dataset)
    }
}

/// Seeded linear generator: entries scaled so samples stay mostly inside the
/// unit cube, offset centered at 0.5.
fn affine_generator(latent_dim: usize, ambient_dim: usize, seed: Seed) -> Result<Generator> {
    let mut rng = seed.rng();
    let scale = 0.5 / (latent_dim as f64).sqrt();
    let mut a = Mat::zeros(ambient_dim, latent_dim);
    for i in 0..ambient_dim {
        for j in 0..latent_dim {
            *a.at_mut(i, j) = (rng.random::<f64>() - 0.5) * scale;
        }
    }
    Ok(Generator::Affine {
        a,
        offset: vec![0.5; ambient_dim],
    })
}

fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let seed = Seed(cfg.seed);
    let mut parts: Vec<SyntheticDataset> = Vec::with_capacity(cfg.synth_classes as usize);
    for class in 0..cfg.synth_classes {
        let gen_seed = seed.derive(tag::CLASS, class as u64);
        let generator = match cfg.synth_generator {
            SynthGenerator::Smooth => random_smooth_generator(
                cfg.synth_latent_dim,
                cfg.synth_ambient_dim,
                cfg.synth_hidden,
                gen_seed,
            )?,
            SynthGenerator::Affine => {
                affine_generator(cfg.synth_latent_dim, cfg.synth_ambient_dim, gen_seed)?
            }
        };
        parts.push(generate_synthetic(&SyntheticManifoldConfig {
            generator,
            noise_sigma: cfg.synth_noise_sigma,
            count: cfg.synth_count,
            label: class,
            seed: seed.derive(tag::SYNTH, class as u64),
        })?);
    }
    let corpus = SyntheticCorpus::from_classes(&parts)?;
    format::save_dataset(out, &corpus)?;
    let manifest = report::DatasetManifest {
        count: corpus.dataset.len(),
        ambient_dim: corpus.dataset.ambient_dim(),
        latent_dim: corpus.latent_dim(),
        noise_sigma: cfg.synth_noise_sigma,
        seed: cfg.seed,
        classes: parts
            .iter()
            .map(|p| report::ClassManifest {
                label: p.dataset.labels()[0],
                count: p.dataset.len(),
                generator: cfg.synth_generator.name(),
                clipped_components: p.clipped_components,
            })
            .collect(),
    };
    let manifest_path = format::manifest_path(out);
    format::write_json(&manifest_path, &manifest)?;
    println!(
        "wrote {} samples in {} classes to {} (manifest {})",
        corpus.dataset.len(),
        cfg.synth_classes,
        out.display(),
        manifest_path.display()
    );
    Ok(())
}

fn gather_rows(dataset: &Dataset, indices: &[usize]) -> Result<Mat> {
    let mut mat = Mat::zeros(indices.len(), dataset.ambient_dim());
    for (row, &idx) in indices.iter().enumerate() {
        mat.row_mut(row).copy_from_slice(dataset.sample(idx));
    }
    Ok(mat)
}

fn cmd_train(
    cfg: &RunConfig,
    data: &str,
    class: u32,
    model_out: &Path,
    report_out: Option<&Path>,
) -> Result<()> {
    let dataset = load_data(data)?;
    if cfg.latent_dim >= dataset.ambient_dim() {
        return Err(Error::Usage(format!(
            "latent_dim {} must be below the ambient dimension {}",
            cfg.latent_dim,
            dataset.ambient_dim()
        )));
    }
    let (inliers, donors) = inlier_and_donor_indices(&dataset, class)?;
    let seed = Seed(cfg.seed);
    let (train_local, val_local, _test_local) =
        split_indices(inliers.len(), &cfg.split_fractions(), seed.derive(tag::SPLIT, 0))?;
    let mut train_idx: Vec<usize> = train_local.iter().map(|&i| inliers[i]).collect();
    if let Some(cap) = cfg.train_cap {
        train_idx.truncate(cap);
    }
    let val_idx: Vec<usize> = val_local.iter().map(|&i| inliers[i]).collect();

    let train_mat = gather_rows(&dataset, &train_idx)?;
    let mut aae = AaeModel::new(
        dataset.ambient_dim(),
        cfg.latent_dim,
        &cfg.hidden_spec(),
        seed.derive(tag::NET_INIT, 0),
    )?;
    let mut training = cfg.training_config();
    training.seed = seed.derive(tag::TRAIN, 0);
    let losses = train(&mut aae, &train_mat, &training)?;
    print!("{}", report::loss_table(&losses));

    let (latent_density, residual_hist) =
        fit_densities(&aae, &train_mat, cfg.jacobian_step, cfg.hist_bins)?;
    let mut model = DetectorModel::new(
        aae,
        latent_density,
        residual_hist,
        cfg.scoring_mode,
        cfg.jacobian_step,
        cfg.perp_exponent,
    )?;

    // Threshold selection on a contaminated validation split. Standalone
    // training has no test ratio to match, so `match` means half outliers.
    let val_ratio = match cfg.val_outlier_ratio {
        ValidationRatio::MatchTest => 0.5,
        ValidationRatio::Fixed(r) => r,
    };
    let injected = inject_outliers(&val_idx, &donors, val_ratio, seed.derive(tag::INJECT_VAL, 0))?;
    let mut values = Vec::with_capacity(injected.indices.len());
    for &idx in &injected.indices {
        let s = gpnd_core::detector::score(&model, dataset.sample(idx))?;
        values.push(cfg.scoring_mode.decision_value(&s));
    }
    let gamma = select_threshold(&values, &injected.is_outlier)?;
    model.set_threshold(gamma)?;
    format::save_model(model_out, &model)?;

    let set = ScoredSet::new(values, injected.is_outlier.clone())?;
    let val_metrics = compute_report(&set, gamma)?;
    println!(
        "threshold {gamma:.6} selected on {} validation samples (F1 {:.4})",
        set.len(),
        val_metrics.f1
    );
    println!("model written to {}", model_out.display());

    if let Some(path) = report_out {
        let train_report = report::TrainReport {
            inlier_class: class,
            ambient_dim: dataset.ambient_dim(),
            latent_dim: cfg.latent_dim,
            train_samples: train_idx.len(),
            validation_samples: set.len(),
            threshold: gamma,
            validation_f1: val_metrics.f1,
            losses: report::loss_rows(&losses),
        };
        format::write_json(path, &train_report)?;
    }
    Ok(())
}

fn cmd_score(
    model_path: &Path,
    data: &str,
    out: Option<&Path>,
    mode: Option<&str>,
    threads: usize,
) -> Result<()> {
    let mut model = format::load_model(model_path)?;
    if let Some(name) = mode {
        model.set_scoring_mode(parse_mode(name)?);
    }
    let dataset = load_data(data)?;
    if dataset.ambient_dim() != model.ambient_dim() {
        return Err(Error::Data(format!(
            "data dimension {} does not match the model's ambient dimension {}",
            dataset.ambient_dim(),
            model.ambient_dim()
        )));
    }
    let gamma = model
        .threshold()
        .ok_or_else(|| Error::Data("model has no stored threshold".into()))?;
    let scores = score_batch(&model, dataset.samples(), threads)?;
    let mode_name = model.scoring_mode().name();
    let records: Vec<report::ScoreRecord> = scores
        .iter()
        .enumerate()
        .map(|(index, s)| report::ScoreRecord {
            index,
            log_p_par: s.log_p_par,
            log_p_perp: s.log_p_perp,
            log_p_x: s.log_p_x,
            decision: if model.scoring_mode().decision_value(s) >= gamma {
                "inlier"
            } else {
                "outlier"
            },
        })
        .collect();
    let score_report = report::ScoreReport {
        count: records.len(),
        mode: mode_name,
        threshold: gamma,
        records,
    };
    match out {
        Some(path) => format::write_json(path, &score_report)?,
        None => {
            let mut text = serde_json::to_string_pretty(&score_report)
                .map_err(|e| Error::Data(format!("score report: {e}")))?;
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, data: &str, class: u32, out: &Path, mode: Option<&str>) -> Result<()> {
    let dataset = load_data(data)?;
    let mut pcfg = cfg.protocol_config();
    if let Some(name) = mode {
        pcfg.modes = vec![parse_mode(name)?];
    }
    let protocol_report = run_protocol(&dataset, class, &pcfg)?;
    let eval = report::eval_report(&protocol_report, cfg.seed);
    format::write_json(out, &eval)?;
    for mode_entry in &eval.modes {
        for ratio in &mode_entry.ratios {
            println!(
                "mode={} ratio={:.2} F1={:.4} AUROC={:.4}",
                mode_entry.mode, ratio.ratio, ratio.mean.f1, ratio.mean.auroc
            );
        }
    }
    println!("report written to {}", out.display());
    Ok(())
}
