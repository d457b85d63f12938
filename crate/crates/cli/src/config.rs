//! Run configuration: defaults, flat key = value config files, and
//! validation mirroring the engine preconditions.
//!
//! Precedence is defaults < config file < command-line flags. Every
//! numeric default mirrors the experiment's training setup: learning rate
//! 0.2, batch size 4, 50 training epochs, 5 supernets for 40 epochs, 100
//! ranked samples, 10 fine-tuning epochs.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use vqc_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrainHea,
    TrainHaa,
    Qas,
    Landscape,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementOpt {
    /// Dephase every qubit after each block (encoding included).
    #[default]
    Block,
    /// Dephase the acted-on qubits after each gate.
    Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutOpt {
    #[default]
    Off,
    /// Corrupt outcome distributions with the calibration matrix.
    Simulate,
    /// Corrupt, then undo via the calibration solve.
    Correct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetModeOpt {
    /// Band midpoints {0, 1/3, 2/3}.
    #[default]
    Midpoint,
    /// Raw labels {0, 1, 2}.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    #[default]
    Hea,
    Haa,
    /// The architecture found by the search pipeline.
    Qas,
}

fn parse_enum<E: clap::ValueEnum>(key: &str, value: &str) -> Result<E> {
    E::from_str(value, true).map_err(|_| Error::Config(format!("{key}: unknown value `{value}`")))
}

/// Full resolved configuration of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub layers: usize,
    /// Dephasing strength, in [0, 0.5].
    pub noise: f64,
    pub placement: PlacementOpt,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dataset: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub readout: ReadoutOpt,
    pub target_mode: TargetModeOpt,
    pub out_dir: PathBuf,
    // Search pipeline.
    pub supernets: usize,
    pub supernet_epochs: usize,
    pub search_samples: usize,
    pub fine_tune_epochs: usize,
    // Landscape analysis.
    pub ansatz: AnsatzKind,
    pub resolution: usize,
    pub scan_range: f64,
    // Sweep.
    pub seeds: usize,
    pub layers_list: Vec<usize>,
    pub noise_list: Vec<f64>,
    pub include_haa: bool,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            layers: 2,
            noise: 0.0,
            placement: PlacementOpt::Block,
            seed: 0,
            epochs: 50,
            learning_rate: 0.2,
            batch_size: 4,
            dataset: None,
            calibration: None,
            readout: ReadoutOpt::Off,
            target_mode: TargetModeOpt::Midpoint,
            out_dir: PathBuf::from("runs/out"),
            supernets: 5,
            supernet_epochs: 40,
            search_samples: 100,
            fine_tune_epochs: 10,
            ansatz: AnsatzKind::Hea,
            resolution: 51,
            scan_range: std::f64::consts::PI,
            seeds: 10,
            layers_list: vec![2, 4, 6],
            noise_list: vec![0.05, 0.1, 0.15],
            include_haa: false,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_config_file(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", idx + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("config line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    /// Sets a single field from its flat text form.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<N: FromStr>(key: &str, value: &str) -> Result<N>
        where
            N::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("{key}: {e}")))
        }
        fn list<N: FromStr>(key: &str, value: &str) -> Result<Vec<N>>
        where
            N::Err: std::fmt::Display,
        {
            value.split(',').map(|v| num(key, v.trim())).collect()
        }
        match key {
            "experiment" => self.experiment = parse_enum(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "placement" => self.placement = parse_enum(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "calibration" => self.calibration = Some(PathBuf::from(value)),
            "readout" => self.readout = parse_enum(key, value)?,
            "target_mode" => self.target_mode = parse_enum(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "supernets" => self.supernets = num(key, value)?,
            "supernet_epochs" => self.supernet_epochs = num(key, value)?,
            "search_samples" => self.search_samples = num(key, value)?,
            "fine_tune_epochs" => self.fine_tune_epochs = num(key, value)?,
            "ansatz" => self.ansatz = parse_enum(key, value)?,
            "resolution" => self.resolution = num(key, value)?,
            "scan_range" => self.scan_range = num(key, value)?,
            "seeds" => self.seeds = num(key, value)?,
            "layers_list" => self.layers_list = list(key, value)?,
            "noise_list" => self.noise_list = list(key, value)?,
            "include_haa" => self.include_haa = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Range checks mirroring the engine preconditions, so bad values fail
    /// before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.layers < 1 {
            return bad("layers must be at least 1".into());
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 0.5]", self.noise));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {} invalid", self.learning_rate));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.supernets < 1 {
            return bad("supernets must be at least 1".into());
        }
        if self.supernet_epochs < 1 {
            return bad("supernet_epochs must be at least 1".into());
        }
        if self.search_samples < 1 {
            return bad("search_samples must be at least 1".into());
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2".into());
        }
        if !(self.scan_range.is_finite() && self.scan_range > 0.0) {
            return bad(format!("scan_range {} invalid", self.scan_range));
        }
        if self.seeds < 1 {
            return bad("seeds must be at least 1".into());
        }
        if self.layers_list.is_empty() || self.layers_list.iter().any(|&l| l < 1) {
            return bad("layers_list must be non-empty positive integers".into());
        }
        if self.noise_list.is_empty() || self.noise_list.iter().any(|p| !(0.0..=0.5).contains(p)) {
            return bad("noise_list entries must lie in [0, 0.5]".into());
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        if self.readout != ReadoutOpt::Off && self.calibration.is_none() {
            return bad("readout enabled but no calibration path given".into());
        }
        Ok(())
    }
}
