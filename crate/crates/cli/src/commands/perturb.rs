use std::collections::BTreeMap;
use std::path::PathBuf;

use annealscape_core::census::{perturbation_shift_experiment, FieldNormalization, ShiftConfig};
use annealscape_core::descent::{DescentConfig, DEFAULT_BATCH};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::Result;
use crate::manifest::{now, output_dir, write_manifest, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub n_grid: Vec<usize>,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
    pub nu: f64,
    pub trials: usize,
    pub seed: u64,
    pub descent: DescentConfig,
    pub normalization: FieldNormalization,
    pub batch: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![50, 100, 200],
            p: 3,
            coupling: 1.0,
            nu: 0.5,
            trials: 100,
            seed: 1,
            descent: DescentConfig::default(),
            normalization: FieldNormalization::PerComponent,
            batch: DEFAULT_BATCH,
        }
    }
}

impl PerturbConfig {
    pub fn shift_config(&self) -> ShiftConfig {
        ShiftConfig {
            n_grid: self.n_grid.clone(),
            p: self.p,
            coupling_scale: self.coupling,
            nu: self.nu,
            trials: self.trials,
            seed: self.seed,
            descent: self.descent,
            normalization: self.normalization,
            batch: self.batch,
        }
    }
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated system sizes.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "J")]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    /// Scale the field by n^{-1/2} (diagnostic).
    #[arg(long)]
    pub root_n: bool,
    #[arg(long)]
    pub batch: Option<usize>,
}

impl PerturbArgs {
    pub fn resolve(&self) -> Result<PerturbConfig> {
        let mut c: PerturbConfig = config::load(self.config.as_deref(), "perturb-check")?;
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            n_grid => n_grid,
            p => p,
            coupling => coupling,
            nu => nu,
            trials => trials,
            seed => seed,
            step => descent.step,
            grad_tol => descent.grad_tol,
            max_iters => descent.max_iters,
            batch => batch,
        );
        if self.root_n {
            c.normalization = FieldNormalization::RootN;
        }
        Ok(c)
    }
}

pub fn run(args: &PerturbArgs) -> Result<()> {
    let started = now();
    let cfg = args.resolve()?;
    let report = perturbation_shift_experiment(&cfg.shift_config())?;
    let mut out = Outputs::new(output_dir()?);
    out.write_json("perturb_check.json", &report)?;
    let mut seeds = BTreeMap::from([("master".to_string(), cfg.seed)]);
    for s in &report.per_n {
        seeds.insert(format!("disorder.n{}", s.n), s.disorder_seed);
        seeds.insert(format!("field.n{}", s.n), s.field_seed);
    }
    write_manifest("perturb-check", &cfg, seeds, started, &out)?;
    Ok(())
}
