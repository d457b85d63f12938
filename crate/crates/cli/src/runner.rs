//! Experiment orchestration: baseline training, the search pipeline,
//! landscape analysis, and the layer/noise sweep, each writing a
//! self-contained run directory.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use vqc_core::circuits::{build_haa, build_hea, realize, SearchSpace};
use vqc_core::classifier::{ReadoutEffect, TargetMode};
use vqc_core::landscape::{self, ScanRanges};
use vqc_core::qas::{run_pipeline, QasConfig, QasOutcome};
use vqc_core::sim::{DephasingChannel, NoisePlacement, Observable};
use vqc_core::{
    CalibrationMatrix64, CircuitTemplate64, Error, EvalContext64, Result, Sample64, TrainConfig64,
};

use crate::config::{AnsatzKind, ExperimentKind, PlacementOpt, ReadoutOpt, RunConfig, TargetModeOpt};
use crate::dataset;
use crate::records::{
    self, final_metrics, median, CellSummary, OutcomeRecord, RunRecord, SCHEMA,
};

/// Executes the configured experiment end to end and writes its run
/// directory (`config.json`, `metrics.csv`, artifacts, `record.json`).
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    records::write_config_json(&config.out_dir, config)?;

    let started = Instant::now();
    let samples = dataset::load_iris(config.dataset.as_deref())?;
    let outcome = match config.experiment {
        ExperimentKind::TrainHea => run_train(config, &samples, AnsatzKind::Hea)?,
        ExperimentKind::TrainHaa => run_train(config, &samples, AnsatzKind::Haa)?,
        ExperimentKind::Qas => run_qas(config, &samples)?,
        ExperimentKind::Landscape => run_landscape(config, &samples)?,
        ExperimentKind::Sweep => run_sweep(config, &samples)?,
    };
    let record = RunRecord {
        schema: SCHEMA,
        config: config.clone(),
        duration_seconds: started.elapsed().as_secs_f64(),
        outcome,
    };
    record.write(&config.out_dir)?;
    Ok(record)
}

/// Builds the evaluation context (channel, observable, readout stage,
/// target convention) from the resolved config.
pub fn build_context(config: &RunConfig) -> Result<EvalContext64> {
    build_context_with_noise(config, config.noise)
}

fn build_context_with_noise(config: &RunConfig, noise: f64) -> Result<EvalContext64> {
    let placement = match config.placement {
        PlacementOpt::Block => NoisePlacement::AfterEachBlock,
        PlacementOpt::Gate => NoisePlacement::AfterEachGate,
    };
    let readout = match config.readout {
        ReadoutOpt::Off => ReadoutEffect::Off,
        ReadoutOpt::Simulate | ReadoutOpt::Correct => {
            let path = config
                .calibration
                .as_ref()
                .ok_or_else(|| Error::Config("readout enabled but no calibration path".into()))?;
            let matrix = CalibrationMatrix64::from_csv_str(&fs::read_to_string(path)?)?;
            if matrix.num_qubits() != vqc_core::circuits::CHAIN_QUBITS {
                return Err(Error::Config(format!(
                    "calibration matrix covers {} qubits, classifier uses {}",
                    matrix.num_qubits(),
                    vqc_core::circuits::CHAIN_QUBITS
                )));
            }
            if config.readout == ReadoutOpt::Simulate {
                ReadoutEffect::Simulate(matrix)
            } else {
                ReadoutEffect::SimulateAndCorrect(matrix)
            }
        }
    };
    Ok(EvalContext64 {
        noise: DephasingChannel::new(noise, placement)?,
        observable: Observable::ground_projector(0),
        readout,
        target_mode: match config.target_mode {
            TargetModeOpt::Midpoint => TargetMode::BandMidpoint,
            TargetModeOpt::Raw => TargetMode::RawLabel,
        },
    })
}

fn baseline_template(ansatz: AnsatzKind, layers: usize) -> Result<CircuitTemplate64> {
    match ansatz {
        AnsatzKind::Hea => build_hea(layers),
        AnsatzKind::Haa => build_haa(layers),
        AnsatzKind::Qas => Err(Error::Config(
            "searched ansatz has no fixed template; run the qas pipeline".into(),
        )),
    }
}

fn train_config(config: &RunConfig, seed: u64) -> TrainConfig64 {
    TrainConfig64 {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed,
    }
}

fn qas_config(config: &RunConfig, seed: u64) -> QasConfig<f64> {
    QasConfig {
        supernet_count: config.supernets,
        supernet_epochs: config.supernet_epochs,
        search_samples: config.search_samples,
        fine_tune_epochs: config.fine_tune_epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        seed,
    }
}

fn run_train(config: &RunConfig, samples: &[Sample64], ansatz: AnsatzKind) -> Result<OutcomeRecord> {
    let splits = dataset::split(samples, config.seed)?;
    let ctx = build_context(config)?;
    let template = baseline_template(ansatz, config.layers)?;
    let outcome = ctx.train(&template, &splits, &train_config(config, config.seed))?;
    records::write_metrics_csv(&config.out_dir.join("metrics.csv"), &outcome.metrics)?;
    records::write_trajectory_csv(&config.out_dir.join("trajectory.csv"), &outcome.trajectory)?;
    let (loss, valid, test) = final_metrics(&outcome);
    Ok(OutcomeRecord::Train {
        final_train_loss: loss,
        final_valid_accuracy: valid,
        final_test_accuracy: test,
    })
}

fn run_qas_pipeline(config: &RunConfig, samples: &[Sample64], seed: u64) -> Result<QasOutcome<f64>> {
    let splits = dataset::split(samples, seed)?;
    let ctx = build_context(config)?;
    let space = SearchSpace::chain(config.layers)?;
    run_pipeline(&space, &ctx, &splits, &qas_config(config, seed))
}

fn run_qas(config: &RunConfig, samples: &[Sample64]) -> Result<OutcomeRecord> {
    let outcome = run_qas_pipeline(config, samples, config.seed)?;
    records::write_metrics_csv(&config.out_dir.join("metrics.csv"), &outcome.fine_tune.metrics)?;
    records::write_supernet_loss_csv(
        &config.out_dir.join("supernet_loss.csv"),
        &outcome.supernet_logs,
    )?;
    records::write_search_report(&config.out_dir.join("search_report.json"), &outcome)?;
    let (_, valid, test) = final_metrics(&outcome.fine_tune);
    Ok(OutcomeRecord::Qas {
        winner_genotype: outcome.winner.genotype.to_string(),
        winner_cz_count: outcome.winner.cz_count,
        winner_supernet: outcome.winner.supernet_id,
        winner_validation_accuracy: outcome.winner.validation_accuracy,
        requested_samples: outcome.requested_samples,
        unique_samples: outcome.unique_samples,
        final_valid_accuracy: valid,
        final_test_accuracy: test,
    })
}

fn run_landscape(config: &RunConfig, samples: &[Sample64]) -> Result<OutcomeRecord> {
    let splits = dataset::split(samples, config.seed)?;
    let ctx = build_context(config)?;

    // The analyzed trajectory: plain training for the fixed layouts, or the
    // searched winner trained from its inherited parameters.
    let (template, outcome, ansatz_name) = match config.ansatz {
        AnsatzKind::Hea | AnsatzKind::Haa => {
            let template = baseline_template(config.ansatz, config.layers)?;
            let outcome = ctx.train(&template, &splits, &train_config(config, config.seed))?;
            let name = if config.ansatz == AnsatzKind::Hea { "hea" } else { "haa" };
            (template, outcome, name.to_string())
        }
        AnsatzKind::Qas => {
            let pipeline = run_qas_pipeline(config, samples, config.seed)?;
            records::write_search_report(
                &config.out_dir.join("search_report.json"),
                &pipeline,
            )?;
            let space = SearchSpace::chain(config.layers)?;
            let template = realize(&space, &pipeline.winner.genotype)?;
            let outcome = ctx.train_from(
                &template,
                pipeline.winner.params.clone(),
                &splits,
                &train_config(config, config.seed),
            )?;
            (template, outcome, pipeline.winner.genotype.to_string())
        }
    };

    let model = landscape::fit_pca(&outcome.trajectory)?;
    let ranges = ScanRanges::symmetric(config.scan_range);
    let grid = landscape::scan_classifier(
        &ctx,
        &template,
        &splits.train,
        &model,
        &outcome.trajectory,
        &ranges,
        (config.resolution, config.resolution),
    )?;

    records::write_metrics_csv(&config.out_dir.join("metrics.csv"), &outcome.metrics)?;
    records::write_trajectory_csv(&config.out_dir.join("trajectory.csv"), &outcome.trajectory)?;
    records::write_model_json(&config.out_dir.join("landscape_model.json"), &model)?;
    {
        let file = fs::File::create(config.out_dir.join("landscape_grid.csv"))?;
        landscape::write_grid_csv(&grid, file)?;
        let file = fs::File::create(config.out_dir.join("landscape_path.csv"))?;
        landscape::write_overlay_csv(&grid, &outcome.trajectory, file)?;
    }

    let loadings = model.loadings();
    let max_loading = loadings.iter().cloned().fold(0.0f64, f64::max);
    let (_, _, test) = final_metrics(&outcome);
    Ok(OutcomeRecord::Landscape {
        ansatz: ansatz_name,
        explained_variance_ratio: model.explained_variance_ratio,
        path_linearity: landscape::path_linearity(&grid.trajectory),
        max_loading,
        final_test_accuracy: test,
    })
}

/// One `(layers, noise)` sweep cell across all seeds. Pure function of its
/// inputs, so cells can run on worker threads.
fn sweep_cell(config: &RunConfig, samples: &[Sample64], layers: usize, noise: f64) -> Result<CellSummary> {
    let mut hea_test = Vec::with_capacity(config.seeds);
    let mut haa_test = Vec::with_capacity(config.seeds);
    let mut qas_test = Vec::with_capacity(config.seeds);
    let mut winner_genotypes = Vec::with_capacity(config.seeds);
    let mut winner_cz_counts = Vec::with_capacity(config.seeds);

    let ctx = build_context_with_noise(config, noise)?;
    let space = SearchSpace::chain(layers)?;
    for seed_offset in 0..config.seeds {
        let seed = config.seed + seed_offset as u64;
        let splits = dataset::split(samples, seed)?;
        let schedule = TrainConfig64 {
            epochs: config.epochs,
            seed,
            ..train_config(config, seed)
        };

        let hea = ctx.train(&build_hea(layers)?, &splits, &schedule)?;
        hea_test.push(final_metrics(&hea).2);

        if config.include_haa {
            let haa = ctx.train(&build_haa(layers)?, &splits, &schedule)?;
            haa_test.push(final_metrics(&haa).2);
        }

        let qas = run_pipeline(&space, &ctx, &splits, &qas_config(config, seed))?;
        qas_test.push(final_metrics(&qas.fine_tune).2);
        winner_genotypes.push(qas.winner.genotype.to_string());
        winner_cz_counts.push(qas.winner.cz_count);
    }

    Ok(CellSummary {
        layers,
        noise,
        hea_median: median(&hea_test),
        qas_median: median(&qas_test),
        haa_median: if config.include_haa {
            Some(median(&haa_test))
        } else {
            None
        },
        hea_test,
        qas_test,
        haa_test: if config.include_haa { Some(haa_test) } else { None },
        winner_genotypes,
        winner_cz_counts,
    })
}

fn write_cell_artifacts(dir: &Path, config: &RunConfig, cell: &CellSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("cell.json"),
        serde_json::to_string_pretty(cell)? + "\n",
    )?;
    let mut out = fs::File::create(dir.join("cell.csv"))?;
    use std::io::Write;
    if config.include_haa {
        writeln!(out, "seed,hea_test,haa_test,qas_test,winner_genotype,winner_cz")?;
    } else {
        writeln!(out, "seed,hea_test,qas_test,winner_genotype,winner_cz")?;
    }
    for k in 0..cell.hea_test.len() {
        let seed = config.seed + k as u64;
        if let Some(haa) = &cell.haa_test {
            writeln!(
                out,
                "{seed},{},{},{},{},{}",
                cell.hea_test[k], haa[k], cell.qas_test[k], cell.winner_genotypes[k], cell.winner_cz_counts[k]
            )?;
        } else {
            writeln!(
                out,
                "{seed},{},{},{},{}",
                cell.hea_test[k], cell.qas_test[k], cell.winner_genotypes[k], cell.winner_cz_counts[k]
            )?;
        }
    }
    Ok(())
}

fn run_sweep(config: &RunConfig, samples: &[Sample64]) -> Result<OutcomeRecord> {
    let cells: Vec<(usize, f64)> = config
        .layers_list
        .iter()
        .flat_map(|&l| config.noise_list.iter().map(move |&p| (l, p)))
        .collect();
    let results: Mutex<Vec<Option<Result<CellSummary>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let queue: Mutex<Vec<usize>> = Mutex::new((0..cells.len()).rev().collect());

    let workers = config.workers.min(cells.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = match queue.lock().expect("queue lock").pop() {
                    Some(i) => i,
                    None => break,
                };
                let (layers, noise) = cells[index];
                let result = sweep_cell(config, samples, layers, noise).and_then(|cell| {
                    // Flush each cell as soon as it finishes; a later
                    // failure cannot corrupt it.
                    let dir = config
                        .out_dir
                        .join("cells")
                        .join(format!("L{layers}_p{noise}"));
                    write_cell_artifacts(&dir, config, &cell)?;
                    Ok(cell)
                });
                results.lock().expect("results lock")[index] = Some(result);
            });
        }
    });

    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for (index, slot) in results.into_inner().expect("results lock").into_iter().enumerate() {
        let (layers, noise) = cells[index];
        match slot.expect("every cell processed") {
            Ok(cell) => summaries.push(cell),
            Err(e) => failed.push(format!("cell L{layers} p{noise}: {e}")),
        }
    }

    let mut out = fs::File::create(config.out_dir.join("sweep_summary.csv"))?;
    use std::io::Write;
    if config.include_haa {
        writeln!(out, "layers,noise,hea_median,haa_median,qas_median")?;
    } else {
        writeln!(out, "layers,noise,hea_median,qas_median")?;
    }
    for cell in &summaries {
        if let Some(haa) = cell.haa_median {
            writeln!(
                out,
                "{},{},{},{haa},{}",
                cell.layers, cell.noise, cell.hea_median, cell.qas_median
            )?;
        } else {
            writeln!(
                out,
                "{},{},{},{}",
                cell.layers, cell.noise, cell.hea_median, cell.qas_median
            )?;
        }
    }

    Ok(OutcomeRecord::Sweep {
        cells: summaries,
        failed_cells: failed,
    })
}
