//! `vqc` command line: train baseline classifiers, run architecture
//! search, analyze loss landscapes, sweep layer/noise grids, and check
//! calibration matrices.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vqc_cli::config::{
    AnsatzKind, ExperimentKind, PlacementOpt, ReadoutOpt, RunConfig, TargetModeOpt,
};
use vqc_cli::records::OutcomeRecord;
use vqc_core::readout::{
    parse_csv, synthetic_calibration, CalibrationDiagnostics, CalibrationMatrix,
    ProbabilityVector,
};
use vqc_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vqc",
    version,
    about = "Variational quantum classifiers and circuit architecture search on a simulated noisy qubit chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fixed-layout classifier (hardware-efficient or
    /// hardware-agnostic ansatz)
    Train(RunArgs),
    /// Run the full architecture-search pipeline: supernets, ranking,
    /// fine-tuning
    Qas(RunArgs),
    /// Train, then fit PCA to the trajectory and scan the loss landscape
    Landscape(RunArgs),
    /// Sweep layers x noise with several seeds per cell
    Sweep(RunArgs),
    /// Validate a calibration matrix and exercise the correction round trip
    ReadoutCheck(ReadoutCheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file applied before flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Circuit layout (train: hea|haa; landscape: hea|haa|qas)
    #[arg(long)]
    ansatz: Option<AnsatzKind>,
    /// Ansatz blocks L
    #[arg(short = 'L', long)]
    layers: Option<usize>,
    /// Dephasing strength in [0, 0.5]
    #[arg(long)]
    noise: Option<f64>,
    /// Where the channel acts: block | gate
    #[arg(long)]
    placement: Option<PlacementOpt>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Iris-shaped CSV (defaults to the vendored dataset)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Calibration matrix CSV for the readout stage
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Readout error handling: off | simulate | correct
    #[arg(long)]
    readout: Option<ReadoutOpt>,
    /// Regression targets: midpoint | raw
    #[arg(long)]
    target_mode: Option<TargetModeOpt>,
    /// Output directory for the run record and artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    supernets: Option<usize>,
    #[arg(long)]
    supernet_epochs: Option<usize>,
    #[arg(long)]
    search_samples: Option<usize>,
    #[arg(long)]
    fine_tune_epochs: Option<usize>,
    /// Landscape grid resolution per axis
    #[arg(long)]
    resolution: Option<usize>,
    /// Landscape scan half-range in both component coordinates
    #[arg(long)]
    scan_range: Option<f64>,
    /// Seeds per sweep cell
    #[arg(long)]
    seeds: Option<usize>,
    /// Sweep layer values, comma separated
    #[arg(long, value_delimiter = ',')]
    layers_list: Option<Vec<usize>>,
    /// Sweep noise values, comma separated
    #[arg(long, value_delimiter = ',')]
    noise_list: Option<Vec<f64>>,
    /// Also train the hardware-agnostic baseline in each sweep cell
    #[arg(long)]
    include_haa: bool,
    /// Concurrent sweep cells
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn into_config(self, experiment: ExperimentKind) -> Result<RunConfig> {
        let mut config = RunConfig::new(experiment);
        if let Some(path) = &self.config {
            config.apply_config_file(&std::fs::read_to_string(path)?)?;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            layers,
            noise,
            placement,
            seed,
            epochs,
            learning_rate,
            batch_size,
            readout,
            target_mode,
            supernets,
            supernet_epochs,
            search_samples,
            fine_tune_epochs,
            ansatz,
            resolution,
            scan_range,
            seeds,
            layers_list,
            noise_list,
            workers
        );
        if let Some(v) = self.dataset {
            config.dataset = Some(v);
        }
        if let Some(v) = self.calibration {
            config.calibration = Some(v);
        }
        if let Some(v) = self.out {
            config.out_dir = v;
        }
        if self.include_haa {
            config.include_haa = true;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct ReadoutCheckArgs {
    /// Calibration CSV to validate
    #[arg(long, required_unless_present = "synthetic")]
    calibration: Option<PathBuf>,
    /// Generate a synthetic diagonally-dominant matrix on N qubits instead
    #[arg(long, value_name = "QUBITS")]
    synthetic: Option<usize>,
    /// Diagonal dominance of the synthetic matrix
    #[arg(long, default_value_t = 0.9)]
    dominance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round-trip trials with random simplex vectors
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Where to write the synthetic matrix CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => {
            let experiment = match args.ansatz.unwrap_or_default() {
                AnsatzKind::Hea => ExperimentKind::TrainHea,
                AnsatzKind::Haa => ExperimentKind::TrainHaa,
                AnsatzKind::Qas => {
                    eprintln!("error: `train --ansatz qas` is not a thing; run `vqc qas`");
                    return ExitCode::FAILURE;
                }
            };
            args.into_config(experiment).and_then(run_and_report)
        }
        Command::Qas(args) => args.into_config(ExperimentKind::Qas).and_then(run_and_report),
        Command::Landscape(args) => args
            .into_config(ExperimentKind::Landscape)
            .and_then(run_and_report),
        Command::Sweep(args) => args.into_config(ExperimentKind::Sweep).and_then(run_and_report),
        Command::ReadoutCheck(args) => readout_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_and_report(config: RunConfig) -> Result<()> {
    let record = vqc_cli::run(&config)?;
    println!(
        "run complete in {:.1}s; artifacts in {}",
        record.duration_seconds,
        config.out_dir.display()
    );
    match &record.outcome {
        OutcomeRecord::Train {
            final_train_loss,
            final_valid_accuracy,
            final_test_accuracy,
        } => {
            println!(
                "final train loss {final_train_loss:.4}; valid acc {final_valid_accuracy:.4}; test acc {final_test_accuracy:.4}"
            );
        }
        OutcomeRecord::Qas {
            winner_genotype,
            winner_cz_count,
            winner_validation_accuracy,
            final_test_accuracy,
            unique_samples,
            requested_samples,
            ..
        } => {
            println!(
                "winner {winner_genotype} ({winner_cz_count} CZ), valid acc {winner_validation_accuracy:.4}, fine-tuned test acc {final_test_accuracy:.4}"
            );
            println!("ranked {unique_samples} unique of {requested_samples} sampled architectures");
        }
        OutcomeRecord::Landscape {
            ansatz,
            explained_variance_ratio,
            path_linearity,
            max_loading,
            final_test_accuracy,
        } => {
            println!(
                "ansatz {ansatz}: variance split {:.4}/{:.4}, path deviation {path_linearity:.4}, max loading {max_loading:.4}, test acc {final_test_accuracy:.4}",
                explained_variance_ratio[0], explained_variance_ratio[1]
            );
        }
        OutcomeRecord::Sweep { cells, failed_cells } => {
            println!("layers,noise,hea_median,qas_median");
            for cell in cells {
                println!(
                    "{},{},{},{}",
                    cell.layers, cell.noise, cell.hea_median, cell.qas_median
                );
            }
            for failure in failed_cells {
                eprintln!("failed: {failure}");
            }
            if !failed_cells.is_empty() {
                return Err(Error::Config(format!(
                    "{} sweep cell(s) failed",
                    failed_cells.len()
                )));
            }
        }
    }
    Ok(())
}

fn readout_check(args: ReadoutCheckArgs) -> Result<()> {
    let (num_qubits, entries) = match (&args.synthetic, &args.calibration) {
        (&Some(qubits), _) => {
            if qubits < 1 || qubits > vqc_core::sim::MAX_QUBITS {
                return Err(Error::Config(format!(
                    "synthetic qubit count {qubits} outside 1..={}",
                    vqc_core::sim::MAX_QUBITS
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let matrix = synthetic_calibration::<f64, _>(qubits, args.dominance, &mut rng)?;
            if let Some(path) = &args.out {
                std::fs::write(path, matrix.to_csv_string())?;
                println!("synthetic calibration matrix written to {}", path.display());
            }
            (qubits, matrix.entries().to_vec())
        }
        (&None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            parse_csv::<f64>(&text)?
        }
        (&None, None) => unreachable!("clap enforces one of --calibration/--synthetic"),
    };

    let dim = 1usize << num_qubits;
    let diag = CalibrationDiagnostics::inspect(&entries, dim)?;
    println!(
        "{num_qubits}-qubit calibration matrix: max column deviation {:.3e}, {} entry violation(s), condition number {:.4}",
        diag.max_column_deviation(),
        diag.entry_violations,
        diag.condition_number
    );

    // Strict validation, then the correction round trip.
    let matrix = CalibrationMatrix::new(num_qubits, entries)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    let mut worst = 0.0f64;
    let mut clipped_events = 0usize;
    for _ in 0..args.trials {
        let p = random_simplex(dim, &mut rng);
        let measured = matrix.apply(&p)?;
        let outcome = matrix.correct_detailed(&measured)?;
        if outcome.clipped_mass > 0.0 {
            clipped_events += 1;
        }
        for (a, b) in outcome.probabilities.values().iter().zip(p.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    println!(
        "round trip over {} trials: max deviation {worst:.3e}, {clipped_events} clipped",
        args.trials
    );
    if worst > 1e-9 {
        return Err(Error::Calibration(format!(
            "round-trip deviation {worst:.3e} exceeds 1e-9"
        )));
    }
    Ok(())
}

fn random_simplex(dim: usize, rng: &mut ChaCha8Rng) -> ProbabilityVector<f64> {
    use rand::Rng;
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 1e-9).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    ProbabilityVector::new(v).expect("normalized")
}
