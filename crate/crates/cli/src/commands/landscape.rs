use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use annealscape_core::census::{run_census, CensusConfig, CensusSummary, RegimeSpec};
use annealscape_core::descent::{DescentConfig, DEFAULT_BATCH};
use annealscape_core::regimes::RegimeLabel;
use annealscape_core::seed::{derive_seed, Stream};
use annealscape_core::Disorder;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CliError, Result};
use crate::manifest::{now, output_dir, write_manifest, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
    pub trials: usize,
    pub seed: u64,
    /// Standard labels, or `name=nu` for a custom field strength.
    pub regimes: Vec<String>,
    pub descent: DescentConfig,
    pub cluster_threshold: f64,
    pub compute_index: bool,
    pub batch: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 3,
            coupling: 1.0,
            trials: 2000,
            seed: 1,
            regimes: ["exponential", "polynomial", "trivial"].map(String::from).to_vec(),
            descent: DescentConfig::default(),
            cluster_threshold: 0.05,
            compute_index: true,
            batch: DEFAULT_BATCH,
        }
    }
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "J")]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated regime labels or `name=nu` pairs.
    #[arg(long, value_delimiter = ',')]
    pub regimes: Option<Vec<String>>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub cluster_threshold: Option<f64>,
    #[arg(long)]
    pub no_index: bool,
    #[arg(long)]
    pub batch: Option<usize>,
}

impl LandscapeArgs {
    pub fn resolve(&self) -> Result<LandscapeConfig> {
        let mut c: LandscapeConfig = config::load(self.config.as_deref(), "landscape")?;
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            n => n,
            p => p,
            coupling => coupling,
            trials => trials,
            seed => seed,
            regimes => regimes,
            step => descent.step,
            grad_tol => descent.grad_tol,
            max_iters => descent.max_iters,
            cluster_threshold => cluster_threshold,
            batch => batch,
        );
        if self.no_index {
            c.compute_index = false;
        }
        Ok(c)
    }
}

pub fn parse_regime(entry: &str, coupling: f64, p: usize, n: usize) -> Result<RegimeSpec> {
    match entry.split_once('=') {
        Some((name, nu)) => {
            let nu: f64 = nu
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("regime {entry:?}: ν is not a number")))?;
            Ok(RegimeSpec::new(name.trim(), nu))
        }
        None => {
            let label = RegimeLabel::from_str(entry.trim()).map_err(|e| CliError::usage(e.to_string()))?;
            Ok(RegimeSpec::standard(label, coupling, p, n)?)
        }
    }
}

#[derive(Debug, Serialize)]
struct LandscapeSummary<'a> {
    /// A single trial gives no pairwise statistics.
    degenerate: bool,
    #[serde(flatten)]
    census: &'a CensusSummary,
}

impl LandscapeConfig {
    pub fn disorder_seed(&self) -> u64 {
        derive_seed(self.seed, &[Stream::Disorder as u64])
    }

    pub fn census_config(&self) -> Result<CensusConfig> {
        let regimes = self
            .regimes
            .iter()
            .map(|r| parse_regime(r, self.coupling, self.p, self.n))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = CensusConfig::new(self.trials, regimes, self.seed);
        cfg.descent = self.descent;
        cfg.cluster_threshold = self.cluster_threshold;
        cfg.compute_index = self.compute_index;
        cfg.batch = self.batch;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(args: &LandscapeArgs) -> Result<()> {
    let started = now();
    let cfg = args.resolve()?;
    let census_cfg = cfg.census_config()?;
    let disorder = Disorder::sample(cfg.n, cfg.p, cfg.coupling, cfg.disorder_seed())?;
    let result = run_census(&disorder, &census_cfg)?;

    let mut out = Outputs::new(output_dir()?);
    out.write("landscape_trials.csv", |w| {
        result.write_trials_csv(w).map_err(std::io::Error::other)
    })?;
    let summary = result.summary();
    out.write_json(
        "landscape_summary.json",
        &LandscapeSummary {
            degenerate: cfg.trials < 2,
            census: &summary,
        },
    )?;

    let mut seeds = BTreeMap::from([
        ("master".to_string(), cfg.seed),
        ("disorder".to_string(), cfg.disorder_seed()),
    ]);
    for (i, r) in census_cfg.regimes.iter().enumerate() {
        seeds.insert(format!("field.{}", r.label), census_cfg.field_seed(i));
    }
    write_manifest("landscape", &cfg, seeds, started, &out)?;
    Ok(())
}
