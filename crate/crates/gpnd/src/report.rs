//! JSON-serializable reports for every command. Field order is fixed by
//! struct declaration and floats serialize shortest-round-trip, so identical
//! runs produce byte-identical report files.

use serde::Serialize;

use gpnd_core::aae::EpochLosses;
use gpnd_core::metrics::MetricsReport;
use gpnd_core::protocol::{MetricAggregate, ProtocolReport};

/// One metric set; used for per-fold values, means, and deviations alike.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricBlock {
    pub f1: f64,
    pub auroc: f64,
    pub fpr_at_95tpr: f64,
    pub detection_error: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
}

impl From<&MetricsReport> for MetricBlock {
    fn from(r: &MetricsReport) -> Self {
        Self {
            f1: r.f1,
            auroc: r.auroc,
            fpr_at_95tpr: r.fpr_at_95tpr,
            detection_error: r.detection_error,
            aupr_in: r.aupr_in,
            aupr_out: r.aupr_out,
        }
    }
}

impl From<&MetricAggregate> for MetricBlock {
    fn from(a: &MetricAggregate) -> Self {
        Self {
            f1: a.f1,
            auroc: a.auroc,
            fpr_at_95tpr: a.fpr_at_95tpr,
            detection_error: a.detection_error,
            aupr_in: a.aupr_in,
            aupr_out: a.aupr_out,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub threshold: f64,
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub metrics: MetricBlock,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioEntry {
    pub ratio: f64,
    pub per_fold: Vec<FoldEntry>,
    pub mean: MetricBlock,
    pub stddev: MetricBlock,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeEntry {
    pub mode: &'static str,
    pub ratios: Vec<RatioEntry>,
}

/// Full evaluation report: folds x ratios entries per scoring mode.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub inlier_class: u32,
    pub folds: usize,
    pub seed: u64,
    pub modes: Vec<ModeEntry>,
}

pub fn eval_report(report: &ProtocolReport, seed: u64) -> EvalReport {
    EvalReport {
        inlier_class: report.inlier_class,
        folds: report.folds,
        seed,
        modes: report
            .modes
            .iter()
            .map(|mode| ModeEntry {
                mode: mode.mode.name(),
                ratios: mode
                    .ratios
                    .iter()
                    .map(|ratio| RatioEntry {
                        ratio: ratio.ratio,
                        per_fold: ratio
                            .per_fold
                            .iter()
                            .map(|fold| FoldEntry {
                                fold: fold.fold,
                                threshold: fold.threshold,
                                n_inliers: fold.metrics.n_inliers,
                                n_outliers: fold.metrics.n_outliers,
                                metrics: MetricBlock::from(&fold.metrics),
                            })
                            .collect(),
                        mean: MetricBlock::from(&ratio.mean),
                        stddev: MetricBlock::from(&ratio.stddev),
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossRow {
    pub epoch: usize,
    pub adv_dz: f64,
    pub adv_dx: f64,
    pub recon: f64,
}

/// Training summary persisted next to the model when requested.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub inlier_class: u32,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub threshold: f64,
    pub validation_f1: f64,
    pub losses: Vec<LossRow>,
}

pub fn loss_rows(losses: &[EpochLosses]) -> Vec<LossRow> {
    losses
        .iter()
        .enumerate()
        .map(|(i, l)| LossRow {
            epoch: i + 1,
            adv_dz: l.adv_dz,
            adv_dx: l.adv_dx,
            recon: l.recon,
        })
        .collect()
}

/// Plain-text loss table, one row per epoch, for stdout.
pub fn loss_table(losses: &[EpochLosses]) -> String {
    let mut out = String::from("epoch      adv_dz      adv_dx       recon\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!(
            "{:>5}  {:>10.6}  {:>10.6}  {:>10.6}\n",
            i + 1,
            l.adv_dz,
            l.adv_dx,
            l.recon
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreRecord {
    pub index: usize,
    pub log_p_par: f64,
    pub log_p_perp: f64,
    pub log_p_x: f64,
    pub decision: &'static str,
}

/// Batch scoring output: one record per input sample, in input order.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub count: usize,
    pub mode: &'static str,
    pub threshold: f64,
    pub records: Vec<ScoreRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassManifest {
    pub label: u32,
    pub count: usize,
    pub generator: &'static str,
    /// Sample components clamped to the unit cube after noise.
    pub clipped_components: usize,
}

/// Companion manifest written next to a generated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetManifest {
    pub count: usize,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub classes: Vec<ClassManifest>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_table_has_one_row_per_epoch() {
        let losses = vec![
            EpochLosses {
                adv_dz: 1.0,
                adv_dx: 2.0,
                recon: 3.0,
            };
            4
        ];
        let table = loss_table(&losses);
        assert_eq!(table.lines().count(), 5);
        assert!(table.lines().nth(2).unwrap().trim_start().starts_with('2'));
        assert_eq!(loss_rows(&losses).len(), 4);
        assert_eq!(loss_rows(&losses)[3].epoch, 4);
    }

    #[test]
    fn json_serialization_is_deterministic() {
        let block = MetricBlock {
            f1: 0.5,
            auroc: 0.75,
            fpr_at_95tpr: 0.1,
            detection_error: 0.2,
            aupr_in: 0.3,
            aupr_out: 0.4,
        };
        let a = serde_json::to_string_pretty(&block).unwrap();
        let b = serde_json::to_string_pretty(&block).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"f1\": 0.5"));
    }
}
