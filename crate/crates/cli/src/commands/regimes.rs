use std::collections::BTreeMap;
use std::path::PathBuf;

use annealscape_core::export::{float, write_row};
use annealscape_core::regimes::{critical_field, nu_for_tau, regime_table, DEFAULT_BAND_CONSTANT};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CliError, Result};
use crate::manifest::{now, output_dir, write_manifest, Outputs};

/// Points in the default ν grid, spanning [0, 2ν_c].
const DEFAULT_GRID_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimesConfig {
    #[serde(rename = "J")]
    pub coupling: f64,
    pub p: usize,
    pub n: usize,
    pub nu_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub band_constant: f64,
}

impl Default for RegimesConfig {
    fn default() -> Self {
        Self {
            coupling: 1.0,
            p: 3,
            n: 100,
            nu_grid: Vec::new(),
            tau_grid: Vec::new(),
            band_constant: DEFAULT_BAND_CONSTANT,
        }
    }
}

#[derive(Debug, Args)]
pub struct RegimesArgs {
    /// TOML config or a previous run manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "J")]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated field strengths.
    #[arg(long, value_delimiter = ',', conflicts_with = "tau_grid")]
    pub nu_grid: Option<Vec<f64>>,
    /// Comma-separated τ values, mapped to ν = ν_c(1 + 2τ/n)^{1/2}.
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub band_constant: Option<f64>,
}

impl RegimesArgs {
    pub fn resolve(&self) -> Result<RegimesConfig> {
        let mut c: RegimesConfig = config::load(self.config.as_deref(), "regimes")?;
        if let Some(v) = self.coupling {
            c.coupling = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = &self.nu_grid {
            c.nu_grid = v.clone();
            c.tau_grid.clear();
        }
        if let Some(v) = &self.tau_grid {
            c.tau_grid = v.clone();
            c.nu_grid.clear();
        }
        if let Some(v) = self.band_constant {
            c.band_constant = v;
        }
        Ok(c)
    }
}

impl RegimesConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        let nu_c = critical_field(self.coupling, self.p);
        match (self.nu_grid.is_empty(), self.tau_grid.is_empty()) {
            (false, false) => Err(CliError::usage("give either nu_grid or tau_grid, not both")),
            (false, true) => Ok(self.nu_grid.clone()),
            (true, false) => self
                .tau_grid
                .iter()
                .map(|&t| nu_for_tau(nu_c, t, self.n).map_err(Into::into))
                .collect(),
            (true, true) => {
                let last = (DEFAULT_GRID_POINTS - 1) as f64;
                Ok((0..DEFAULT_GRID_POINTS)
                    .map(|i| 2.0 * nu_c * i as f64 / last)
                    .collect())
            }
        }
    }
}

pub fn run(args: &RegimesArgs) -> Result<()> {
    let started = now();
    let cfg = args.resolve()?;
    let rows = regime_table(cfg.coupling, cfg.p, cfg.n, &cfg.grid()?, cfg.band_constant)?;
    let mut out = Outputs::new(output_dir()?);
    out.write("regimes.csv", |w| {
        write_row(w, &["nu", "B", "label", "expected_count"])?;
        for r in &rows {
            write_row(
                w,
                &[float(r.nu), float(r.b), r.regime.to_string(), float(r.expected_count)],
            )?;
        }
        Ok(())
    })?;
    write_manifest("regimes", &cfg, BTreeMap::new(), started, &out)?;
    Ok(())
}
