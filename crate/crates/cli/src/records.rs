//! Persistent run records and metric/artifact writers.
//!
//! Every run directory holds `config.json` (the fully resolved config, so
//! a record alone reproduces the run), `metrics.csv`, experiment-specific
//! artifacts, and `record.json`. Numeric CSV fields use Rust's shortest
//! round-trip float formatting, which is byte-stable across reruns.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use vqc_core::classifier::EpochMetrics;
use vqc_core::landscape::PcaModel;
use vqc_core::qas::{QasOutcome, SupernetLog};
use vqc_core::{Result, TrainOutcome64, Trajectory64};

use crate::config::RunConfig;

pub const SCHEMA: &str = "vqc.run/1";

/// Summary of one sweep cell: a `(layers, noise)` pair over all seeds.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub layers: usize,
    pub noise: f64,
    pub hea_median: f64,
    pub qas_median: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub haa_median: Option<f64>,
    pub hea_test: Vec<f64>,
    pub qas_test: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub haa_test: Option<Vec<f64>>,
    pub winner_genotypes: Vec<String>,
    pub winner_cz_counts: Vec<usize>,
}

/// Per-experiment results embedded in the run record.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutcomeRecord {
    Train {
        final_train_loss: f64,
        final_valid_accuracy: f64,
        final_test_accuracy: f64,
    },
    Qas {
        winner_genotype: String,
        winner_cz_count: usize,
        winner_supernet: usize,
        winner_validation_accuracy: f64,
        requested_samples: usize,
        unique_samples: usize,
        final_valid_accuracy: f64,
        final_test_accuracy: f64,
    },
    Landscape {
        ansatz: String,
        explained_variance_ratio: [f64; 2],
        path_linearity: f64,
        max_loading: f64,
        final_test_accuracy: f64,
    },
    Sweep {
        cells: Vec<CellSummary>,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        failed_cells: Vec<String>,
    },
}

/// The persisted run record: config plus outcome plus timing.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    pub config: RunConfig,
    pub duration_seconds: f64,
    pub outcome: OutcomeRecord,
}

impl RunRecord {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("record.json"), json + "\n")?;
        Ok(())
    }
}

pub fn write_config_json(dir: &Path, config: &RunConfig) -> Result<()> {
    let json = serde_json::to_string_pretty(config)?;
    fs::write(dir.join("config.json"), json + "\n")?;
    Ok(())
}

/// `epoch,train_loss,valid_accuracy,test_accuracy` rows.
pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics<f64>]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "epoch,train_loss,valid_accuracy,test_accuracy")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{}",
            m.epoch, m.train_loss, m.valid_accuracy, m.test_accuracy
        )?;
    }
    Ok(())
}

/// `epoch,loss,p0..p{d-1}` rows: the raw material for landscape analysis.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory64) -> Result<()> {
    let mut out = fs::File::create(path)?;
    let dim = trajectory.dim();
    let header: Vec<String> = (0..dim).map(|k| format!("p{k}")).collect();
    writeln!(out, "epoch,loss,{}", header.join(","))?;
    for (epoch, (step, loss)) in trajectory
        .steps()
        .iter()
        .zip(trajectory.losses())
        .enumerate()
    {
        let params: Vec<String> = step.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{epoch},{loss},{}", params.join(","))?;
    }
    Ok(())
}

/// `supernet,epoch,mean_batch_loss` rows for every supernet.
pub fn write_supernet_loss_csv(path: &Path, logs: &[SupernetLog<f64>]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "supernet,epoch,mean_batch_loss")?;
    for log in logs {
        for (epoch, loss) in log.mean_batch_loss.iter().enumerate() {
            writeln!(out, "{},{epoch},{loss}", log.supernet_id)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CandidateDoc<'a> {
    genotype: String,
    supernet_id: usize,
    validation_accuracy: f64,
    cz_count: usize,
    sample_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct FineTuneDoc {
    epochs: usize,
    final_train_loss: f64,
    final_valid_accuracy: f64,
    final_test_accuracy: f64,
}

#[derive(Serialize)]
struct SearchReportDoc<'a> {
    requested_samples: usize,
    unique_samples: usize,
    winner: CandidateDoc<'a>,
    fine_tune: FineTuneDoc,
    candidates: Vec<CandidateDoc<'a>>,
}

/// Search report JSON: every ranked candidate (genotype string, supernet
/// id, validation accuracy, CZ count), the winner with its inherited
/// parameters, and the fine-tuning metrics.
pub fn write_search_report(path: &Path, outcome: &QasOutcome<f64>) -> Result<()> {
    let doc = SearchReportDoc {
        requested_samples: outcome.requested_samples,
        unique_samples: outcome.unique_samples,
        winner: CandidateDoc {
            genotype: outcome.winner.genotype.to_string(),
            supernet_id: outcome.winner.supernet_id,
            validation_accuracy: outcome.winner.validation_accuracy,
            cz_count: outcome.winner.cz_count,
            sample_index: outcome.winner.sample_index,
            params: Some(&outcome.winner.params),
        },
        fine_tune: {
            let m = outcome.fine_tune.final_metrics().expect("metrics recorded");
            FineTuneDoc {
                epochs: outcome.fine_tune.trajectory.len(),
                final_train_loss: m.train_loss,
                final_valid_accuracy: m.valid_accuracy,
                final_test_accuracy: m.test_accuracy,
            }
        },
        candidates: outcome
            .candidates
            .iter()
            .map(|c| CandidateDoc {
                genotype: c.genotype.to_string(),
                supernet_id: c.supernet_id,
                validation_accuracy: c.validation_accuracy,
                cz_count: c.cz_count,
                sample_index: c.sample_index,
                params: None,
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Landscape model JSON (mean, components, ratios, loadings).
pub fn write_model_json(path: &Path, model: &PcaModel<f64>) -> Result<()> {
    fs::write(path, vqc_core::landscape::model_json(model)? + "\n")?;
    Ok(())
}

/// Convenience accessors on a finished training run.
pub fn final_metrics(outcome: &TrainOutcome64) -> (f64, f64, f64) {
    let m = outcome.final_metrics().expect("training ran at least one epoch");
    (m.train_loss, m.valid_accuracy, m.test_accuracy)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median_usize(values: &[usize]) -> f64 {
    let as_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    median(&as_f)
}
