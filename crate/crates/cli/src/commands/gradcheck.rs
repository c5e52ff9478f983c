use std::collections::BTreeMap;
use std::path::PathBuf;

use annealscape_core::descent::random_configuration;
use annealscape_core::hamiltonian::DEFAULT_ENTRY_BUDGET;
use annealscape_core::seed::{derive_seed, stream_rng, Stream};
use annealscape_core::{Disorder, ExternalField, Landscape};
use annealscape_train::{gradient_check, Mlp, MlpSpec};
use clap::Args;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CliError, Result};
use crate::manifest::{now, output_dir, write_manifest, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
    pub nu: f64,
    pub seed: u64,
    pub fd_step: f64,
    pub gradient_tol: f64,
    pub hessian_tol: f64,
    pub network_tol: f64,
    /// Largest tensor or Hessian allowed, in entries.
    pub budget: u64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub inject_sign_flip: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            n: 20,
            p: 3,
            coupling: 1.0,
            nu: 1.0,
            seed: 1,
            fd_step: 1e-5,
            gradient_tol: 1e-6,
            hessian_tol: 1e-5,
            network_tol: 1e-6,
            budget: DEFAULT_ENTRY_BUDGET,
            inject_sign_flip: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "J")]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    /// Negates the analytic gradient so the check must fail.
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

impl GradcheckArgs {
    pub fn resolve(&self) -> Result<GradcheckConfig> {
        let mut c: GradcheckConfig = config::load(self.config.as_deref(), "gradcheck")?;
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(n => n, p => p, coupling => coupling, nu => nu, seed => seed, budget => budget);
        if self.inject_sign_flip {
            c.inject_sign_flip = true;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub n: usize,
    pub p: usize,
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub network_error: f64,
    pub passed: bool,
}

/// max |a − r| / max(max |r|, 1).
fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(1.0f64, |m, r| m.max(r.abs()));
    let diff = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, r)| m.max((a - r).abs()));
    diff / scale
}

fn shifted(sigma: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut s = sigma.to_vec();
    s[i] += delta;
    s
}

pub fn check(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let disorder = Disorder::sample_with_budget(
        cfg.n,
        cfg.p,
        cfg.coupling,
        derive_seed(cfg.seed, &[Stream::Disorder as u64]),
        cfg.budget,
    )?;
    let field = ExternalField::sample(cfg.n, cfg.nu, derive_seed(cfg.seed, &[Stream::Field as u64]))?;
    let l = Landscape::new(&disorder, &field)?;
    let sigma = random_configuration(cfg.n, derive_seed(cfg.seed, &[Stream::Init as u64]))?;
    let hessian = l.hessian_with_budget(&sigma, cfg.budget)?;
    let delta = cfg.fd_step;

    let mut grad = l.gradient(&sigma)?;
    if cfg.inject_sign_flip {
        grad.iter_mut().for_each(|g| *g = -*g);
    }
    let fd_grad = (0..cfg.n)
        .map(|i| {
            let up = l.energy(&shifted(&sigma, i, delta))?;
            let down = l.energy(&shifted(&sigma, i, -delta))?;
            Ok((up - down) / (2.0 * delta))
        })
        .collect::<Result<Vec<f64>>>()?;
    let gradient_error = relative_error(&grad, &fd_grad);

    let mut fd_hess = Vec::with_capacity(cfg.n * cfg.n);
    for j in 0..cfg.n {
        let up = l.gradient(&shifted(&sigma, j, delta))?;
        let down = l.gradient(&shifted(&sigma, j, -delta))?;
        fd_hess.extend(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * delta)));
    }
    // nalgebra stores column-major, matching the column-by-column fill above.
    let hessian_error = relative_error(hessian.as_slice(), &fd_hess);

    let spec = MlpSpec {
        hidden: vec![6, 5, 4],
        init_seed: cfg.seed,
        ..Default::default()
    };
    let (dim, classes, rows) = (5, 3, 7);
    let mlp = Mlp::new(&spec, dim, classes)?;
    let mut rng = stream_rng(cfg.seed, Stream::Data, &[]);
    let x: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y: Vec<usize> = (0..rows).map(|i| i % classes).collect();
    let network_error = gradient_check(&mlp, &x, &y, 1e-6)?;

    Ok(GradcheckReport {
        n: cfg.n,
        p: cfg.p,
        gradient_error,
        hessian_error,
        network_error,
        passed: gradient_error < cfg.gradient_tol
            && hessian_error < cfg.hessian_tol
            && network_error < cfg.network_tol,
    })
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let started = now();
    let cfg = args.resolve()?;
    let report = check(&cfg)?;
    let mut out = Outputs::new(output_dir()?);
    out.write_json("gradcheck.json", &report)?;
    let seeds = BTreeMap::from([("master".to_string(), cfg.seed)]);
    write_manifest("gradcheck", &cfg, seeds, started, &out)?;
    println!(
        "gradient {:.3e}  hessian {:.3e}  network {:.3e}  {}",
        report.gradient_error,
        report.hessian_error,
        report.network_error,
        if report.passed { "PASS" } else { "FAIL" }
    );
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed("finite-difference mismatch".into()))
    }
}
