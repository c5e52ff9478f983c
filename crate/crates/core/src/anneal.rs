//! AnnealSGD: a fixed random direction h added to every gradient with a
//! scale that decays from √2 to 0.
//!
//! The engine only transforms gradients. Any base optimizer consumes the
//! returned vector as if it were the raw gradient.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::hamiltonian::dot;
use crate::regimes::critical_field;
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// τ(i) = n(e^{−i/τ₀} − 1/2), s = (1 + 2τ/n)^{1/2}.
    #[default]
    TauExp,
    /// κ(i) = n^{1/3}(e^{−i/τ₀} − 1/2), s = (1 + κ log n / n^{1/3})^{1/2},
    /// clamped to 0 once the factor is nonpositive.
    Kappa,
    /// s = √2·max(0, 1 − i/i_max).
    Linear,
}

impl ScheduleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScheduleKind::TauExp => "tau_exp",
            ScheduleKind::Kappa => "kappa",
            ScheduleKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau_exp" => Ok(ScheduleKind::TauExp),
            "kappa" => Ok(ScheduleKind::Kappa),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(invalid(format!(
                "unknown schedule {other:?} (expected tau_exp, kappa or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    #[serde(rename = "J")]
    pub coupling: f64,
    pub tau0: f64,
    pub schedule: ScheduleKind,
    /// Layer count p; taken from the model when `None`. Must resolve to ≥ 3.
    pub p_est: Option<usize>,
    /// Effective neuron count; estimated from the weight count when `None`.
    pub n_est: Option<usize>,
    /// Step at which the linear schedule reaches 0.
    pub linear_steps: u64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            coupling: 1e-3,
            tau0: 500.0,
            schedule: ScheduleKind::TauExp,
            p_est: None,
            n_est: None,
            linear_steps: 2_000,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(invalid(format!("anneal J must be finite and ≥ 0, got {}", self.coupling)));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(invalid(format!("τ₀ must be positive, got {}", self.tau0)));
        }
        if let Some(p) = self.p_est {
            check_layers(p)?;
        }
        if self.n_est == Some(0) {
            return Err(invalid("n_est must be ≥ 1"));
        }
        if self.schedule == ScheduleKind::Linear && self.linear_steps == 0 {
            return Err(invalid("linear schedule needs linear_steps ≥ 1"));
        }
        Ok(())
    }
}

fn check_layers(p: usize) -> Result<()> {
    if p < 3 {
        return Err(invalid(format!("layer count p must be ≥ 3, got {p}")));
    }
    Ok(())
}

/// ⌊(num_weights/p)^{1/2}⌋, at least 1.
pub fn estimate_shape(num_weights: usize, p: usize) -> usize {
    if p == 0 {
        return 1;
    }
    let ratio = num_weights / p;
    let mut r = (ratio as f64).sqrt() as usize;
    while r * r > ratio {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= ratio {
        r += 1;
    }
    r.max(1)
}

/// h with iid N(0, J²p(p−2)) components; zero when J = 0 or p ≤ 2.
pub fn sample_perturbation(num_weights: usize, coupling: f64, p: usize, seed: u64) -> Vec<f64> {
    let std = critical_field(coupling, p);
    if std == 0.0 {
        return vec![0.0; num_weights];
    }
    let mut rng = stream_rng(seed, Stream::Perturbation, &[]);
    (0..num_weights)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// τ(i) = n(e^{−i/τ₀} − 1/2).
pub fn tau_schedule(i: u64, tau0: f64, n_est: usize) -> f64 {
    n_est as f64 * ((-(i as f64) / tau0).exp() - 0.5)
}

/// (1 + 2τ/n)^{1/2}.
pub fn scale_factor(tau: f64, n_est: usize) -> Result<f64> {
    let arg = 1.0 + 2.0 * tau / n_est as f64;
    if !(arg > 0.0) {
        return Err(invalid(format!("need τ > −n/2, got τ = {tau} for n = {n_est}")));
    }
    Ok(arg.sqrt())
}

/// (1 + κ log n / n^{1/3})^{1/2}.
pub fn kappa_scale_factor(kappa: f64, n_est: usize) -> Result<f64> {
    let n = n_est as f64;
    let arg = 1.0 + kappa * n.ln() / n.cbrt();
    if !(arg > 0.0) {
        return Err(invalid(format!(
            "need 1 + κ log n / n^(1/3) > 0, got {arg} (κ = {kappa}, n = {n_est})"
        )));
    }
    Ok(arg.sqrt())
}

/// |h·w|.
pub fn alignment(w: &[f64], h: &[f64]) -> Result<f64> {
    check_len(h.len(), w.len())?;
    Ok(dot(w, h).abs())
}

/// The fixed direction h and the iteration counter of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationState {
    h: Vec<f64>,
    iteration: u64,
    p_est: usize,
    n_est: usize,
    config: AnnealConfig,
}

impl PerturbationState {
    /// Samples h once for a model with `num_weights` trainable parameters
    /// arranged in `layers` layers.
    pub fn new(config: &AnnealConfig, num_weights: usize, layers: usize) -> Result<Self> {
        config.validate()?;
        let p_est = config.p_est.unwrap_or(layers);
        check_layers(p_est)?;
        let n_est = config
            .n_est
            .unwrap_or_else(|| estimate_shape(num_weights, p_est));
        Ok(Self {
            h: sample_perturbation(num_weights, config.coupling, p_est, config.seed),
            iteration: 0,
            p_est,
            n_est,
            config: config.clone(),
        })
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn p_est(&self) -> usize {
        self.p_est
    }

    pub fn n_est(&self) -> usize {
        self.n_est
    }

    pub fn config(&self) -> &AnnealConfig {
        &self.config
    }

    /// Scale s_i at iteration `i`.
    ///
    /// Under `TauExp`, 1 + 2τ(i)/n equals 2e^{−i/τ₀}; that form is evaluated
    /// directly so the scale keeps decreasing after τ(i) rounds to −n/2.
    pub fn scale_at(&self, i: u64) -> f64 {
        let c = &self.config;
        let n = self.n_est;
        match c.schedule {
            ScheduleKind::TauExp => (2.0 * (-(i as f64) / c.tau0).exp()).sqrt(),
            ScheduleKind::Kappa => {
                let kappa = (n as f64).cbrt() * ((-(i as f64) / c.tau0).exp() - 0.5);
                kappa_scale_factor(kappa, n).unwrap_or(0.0)
            }
            ScheduleKind::Linear => {
                2f64.sqrt() * (1.0 - i as f64 / c.linear_steps as f64).max(0.0)
            }
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale_at(self.iteration)
    }

    /// s_i·h at the current iteration.
    pub fn current(&self) -> Vec<f64> {
        let s = self.scale();
        self.h.iter().map(|x| s * x).collect()
    }

    /// g + s_i·h, then advances the iteration.
    pub fn perturb_gradient(&mut self, g: &[f64]) -> Result<Vec<f64>> {
        let mut out = g.to_vec();
        self.perturb_in_place(&mut out)?;
        Ok(out)
    }

    pub fn perturb_in_place(&mut self, g: &mut [f64]) -> Result<()> {
        check_len(self.h.len(), g.len())?;
        let s = self.scale();
        for (gi, hi) in g.iter_mut().zip(&self.h) {
            *gi += s * hi;
        }
        self.iteration += 1;
        Ok(())
    }
}
