use std::collections::BTreeMap;
use std::path::PathBuf;

use annealscape_core::anneal::{AnnealConfig, ScheduleKind};
use annealscape_train::{
    load_idx, synth_blobs, train, Dataset, EpochMetrics, MlpSpec, OptimizerConfig, PerturbationMode,
    TrainConfig, VALIDATION_FRACTION,
};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CliError, Result};
use crate::manifest::{now, output_dir, write_manifest, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    #[default]
    Blobs,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    /// Seeds blob generation and the validation split.
    pub seed: u64,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub validation_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: DataKind::Blobs,
            classes: 10,
            dim: 20,
            per_class: 1000,
            spread: 0.3,
            seed: 0,
            images: None,
            labels: None,
            validation_fraction: VALIDATION_FRACTION,
        }
    }
}

impl DataConfig {
    pub fn load(&self) -> Result<Dataset> {
        let data = match self.kind {
            DataKind::Blobs => synth_blobs(self.classes, self.dim, self.per_class, self.spread, self.seed)?,
            DataKind::Idx => {
                let (Some(images), Some(labels)) = (&self.images, &self.labels) else {
                    return Err(CliError::usage("IDX data needs both data.images and data.labels"));
                };
                load_idx(images, labels)?
            }
        };
        Ok(data.with_validation_split(self.validation_fraction, self.seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub model: MlpSpec,
    pub data: DataConfig,
    pub optimizer: OptimizerConfig,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub perturbation: PerturbationMode,
    pub anneal: AnnealConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: MlpSpec::default(),
            data: DataConfig::default(),
            optimizer: t.optimizer,
            lr: t.lr,
            epochs: 5,
            batch_size: t.batch_size,
            seed: t.seed,
            perturbation: t.perturbation,
            anneal: t.anneal,
        }
    }
}

impl TrainRunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            perturbation: self.perturbation,
            anneal: self.anneal.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerKind {
    Adam,
    /// SGD with Nesterov momentum 0.9.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    None,
    Anneal,
    Resampled,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seeds the batch order and resampled noise.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long, value_enum)]
    pub perturbation: Option<ModeArg>,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub data: Option<DataKind>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long = "anneal.J")]
    pub anneal_coupling: Option<f64>,
    #[arg(long = "anneal.tau0")]
    pub anneal_tau0: Option<f64>,
    #[arg(long = "anneal.schedule")]
    pub anneal_schedule: Option<ScheduleKind>,
    #[arg(long = "anneal.seed")]
    pub anneal_seed: Option<u64>,
    #[arg(long = "anneal.p_est")]
    pub anneal_p_est: Option<usize>,
    #[arg(long = "anneal.n_est")]
    pub anneal_n_est: Option<usize>,
    #[arg(long = "anneal.linear_steps")]
    pub anneal_linear_steps: Option<u64>,
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainRunConfig> {
        let mut c: TrainRunConfig = config::load(self.config.as_deref(), "train")?;
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            lr => lr,
            epochs => epochs,
            batch_size => batch_size,
            seed => seed,
            hidden => model.hidden,
            weight_decay => model.weight_decay,
            init_seed => model.init_seed,
            data => data.kind,
            classes => data.classes,
            dim => data.dim,
            per_class => data.per_class,
            spread => data.spread,
            data_seed => data.seed,
            anneal_coupling => anneal.coupling,
            anneal_tau0 => anneal.tau0,
            anneal_schedule => anneal.schedule,
            anneal_seed => anneal.seed,
            anneal_linear_steps => anneal.linear_steps,
        );
        if let Some(p) = &self.images {
            c.data.images = Some(p.clone());
            c.data.kind = DataKind::Idx;
        }
        if let Some(p) = &self.labels {
            c.data.labels = Some(p.clone());
            c.data.kind = DataKind::Idx;
        }
        if self.anneal_p_est.is_some() {
            c.anneal.p_est = self.anneal_p_est;
        }
        if self.anneal_n_est.is_some() {
            c.anneal.n_est = self.anneal_n_est;
        }
        if let Some(o) = self.optimizer {
            c.optimizer = match o {
                OptimizerKind::Adam => OptimizerConfig::adam(),
                OptimizerKind::Sgd => OptimizerConfig::sgd_nesterov(),
            };
        }
        if let Some(m) = self.perturbation {
            c.perturbation = match m {
                ModeArg::None => PerturbationMode::None,
                ModeArg::Anneal => PerturbationMode::Anneal,
                ModeArg::Resampled => PerturbationMode::Resampled,
            };
        }
        Ok(c)
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    num_params: usize,
    steps: usize,
    p_est: Option<usize>,
    n_est: Option<usize>,
    /// Mean |hᵀw| over the final 10% of steps.
    tail_alignment: f64,
    final_epoch: Option<&'a EpochMetrics>,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let started = now();
    let cfg = args.resolve()?;
    cfg.model.validate()?;
    let data = cfg.data.load()?;
    let metrics = train(&cfg.model, &data, &cfg.train_config())?;

    let mut out = Outputs::new(output_dir()?);
    out.write("train_metrics.csv", |w| metrics.write_csv(w))?;
    out.write_json(
        "train_summary.json",
        &TrainSummary {
            num_params: metrics.num_params,
            steps: metrics.step_alignment.len(),
            p_est: metrics.p_est,
            n_est: metrics.n_est,
            tail_alignment: metrics.tail_alignment(0.1),
            final_epoch: metrics.epochs.last(),
        },
    )?;
    let seeds = BTreeMap::from([
        ("batches".to_string(), cfg.seed),
        ("data".to_string(), cfg.data.seed),
        ("init".to_string(), cfg.model.init_seed),
        ("anneal".to_string(), cfg.anneal.seed),
    ]);
    write_manifest("train", &cfg, seeds, started, &out)?;
    Ok(())
}
