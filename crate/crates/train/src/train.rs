//! Mini-batch training loop with optional AnnealSGD perturbation or a
//! resampled-noise baseline.

use std::io::Write;
use std::time::Instant;

use annealscape_core::anneal::{alignment, AnnealConfig, PerturbationState};
use annealscape_core::export::{float, write_row};
use annealscape_core::seed::{stream_rng, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{invalid, Result, TrainError};
use crate::mlp::{Mlp, MlpSpec};
use crate::optim::{Optimizer, OptimizerConfig};

/// Rows per forward pass when scoring a whole split.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Plain training; h is still sampled as the alignment reference.
    #[default]
    None,
    /// Every gradient passes through the AnnealSGD perturbation.
    Anneal,
    /// A fresh N(0, (s_i‖h‖)²/dim · I) draw is added each step instead of s_i·h.
    Resampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the batch order and the resampled noise.
    pub seed: u64,
    pub perturbation: PerturbationMode,
    pub anneal: AnnealConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::adam(),
            lr: 1e-3,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            perturbation: PerturbationMode::None,
            anneal: AnnealConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("learning rate must be finite and ≥ 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be ≥ 1"));
        }
        self.optimizer.validate()?;
        self.anneal.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Cross-entropy over the training split after the epoch.
    pub loss: f64,
    pub train_error: f64,
    /// Percent misclassified on the validation split; `None` without one.
    pub val_error: Option<f64>,
    /// Mean over the epoch's steps of min |∂loss/∂w|, before perturbation.
    pub min_abs_grad: f64,
    /// |h·w| after the epoch.
    pub alignment: f64,
    /// Perturbation scale s_i at the end of the epoch.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub epochs: Vec<EpochMetrics>,
    /// |h·w| after every step.
    pub step_alignment: Vec<f64>,
    pub num_params: usize,
    pub p_est: Option<usize>,
    pub n_est: Option<usize>,
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub final_params: Vec<f64>,
}

impl TrainMetrics {
    /// epoch, loss, val_error, min_abs_grad, alignment
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_row(&mut w, &["epoch", "loss", "val_error", "min_abs_grad", "alignment"])?;
        for e in &self.epochs {
            write_row(
                &mut w,
                &[
                    e.epoch.to_string(),
                    float(e.loss),
                    e.val_error.map(float).unwrap_or_default(),
                    float(e.min_abs_grad),
                    float(e.alignment),
                ],
            )?;
        }
        Ok(())
    }

    /// Mean step alignment over the final `fraction` of steps.
    pub fn tail_alignment(&self, fraction: f64) -> f64 {
        let n = self.step_alignment.len();
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1.min(n), n);
        if take == 0 {
            return 0.0;
        }
        self.step_alignment[n - take..].iter().sum::<f64>() / take as f64
    }
}

/// min |g_i| over all parameters; 0 for an empty gradient.
pub fn min_abs_gradient(grad: &[f64]) -> f64 {
    if grad.is_empty() {
        return 0.0;
    }
    grad.iter().fold(f64::INFINITY, |m, g| m.min(g.abs()))
}

fn gather(data: &Dataset, idx: &[usize], x: &mut Vec<f64>, y: &mut Vec<usize>) {
    x.clear();
    y.clear();
    for &i in idx {
        x.extend_from_slice(data.sample(i));
        y.push(data.labels()[i]);
    }
}

/// Mean loss and percent error over the given samples.
pub fn evaluate_split(mlp: &Mlp, data: &Dataset, idx: &[usize]) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let (mut loss, mut wrong) = (0.0, 0usize);
    for chunk in idx.chunks(EVAL_CHUNK) {
        gather(data, chunk, &mut x, &mut y);
        let (l, w) = mlp.evaluate(&x, &y)?;
        loss += l * chunk.len() as f64;
        wrong += w;
    }
    let n = idx.len() as f64;
    Ok((loss / n, 100.0 * wrong as f64 / n))
}

/// Trains a fresh network built from `spec` on the training split of `data`.
///
/// The initialization depends only on `spec.init_seed`, and the batch order
/// only on `cfg.seed` and the epoch, so runs that differ only in their
/// perturbation see identical batches from identical starting weights.
pub fn train(spec: &MlpSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainMetrics> {
    cfg.validate()?;
    let started = Instant::now();
    let mut mlp = Mlp::new(spec, data.dim(), data.classes())?;
    let num_params = mlp.num_params();
    let train_idx = data.indices(Split::Train);
    let val_idx = data.indices(Split::Validation);
    if train_idx.is_empty() {
        return Err(invalid("the dataset has no training samples"));
    }

    let resolved_p = cfg.anneal.p_est.unwrap_or(mlp.depth());
    let state = if cfg.perturbation != PerturbationMode::None || resolved_p >= 3 {
        Some(PerturbationState::new(&cfg.anneal, num_params, mlp.depth())?)
    } else {
        None
    };
    let h_norm = state
        .as_ref()
        .map_or(0.0, |s| s.h().iter().map(|x| x * x).sum::<f64>().sqrt());
    let align = |w: &[f64]| -> Result<f64> {
        match &state {
            Some(s) => Ok(alignment(w, s.h())?),
            None => Ok(0.0),
        }
    };

    let mut opt = Optimizer::new(cfg.optimizer, num_params)?;
    let mut noise_rng = stream_rng(cfg.seed, Stream::Noise, &[]);
    let mut grad = vec![0.0; num_params];
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut step: u64 = 0;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step_alignment = Vec::new();

    for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Batches, &[epoch as u64]));
        let mut min_grad_sum = 0.0;
        let mut steps_this_epoch = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            gather(data, batch, &mut x, &mut y);
            let loss = mlp.loss_and_gradient(&x, &y, &mut grad)?;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, step, loss });
            }
            min_grad_sum += min_abs_gradient(&grad);
            steps_this_epoch += 1;
            match (cfg.perturbation, &state) {
                (PerturbationMode::Anneal, Some(s)) => {
                    let scale = s.scale_at(step);
                    for (g, h) in grad.iter_mut().zip(s.h()) {
                        *g += scale * h;
                    }
                }
                (PerturbationMode::Resampled, Some(s)) => {
                    let std = s.scale_at(step) * h_norm / (num_params as f64).sqrt();
                    for g in grad.iter_mut() {
                        *g += std * noise_rng.sample::<f64, _>(StandardNormal);
                    }
                }
                _ => {}
            }
            opt.step(mlp.params_mut(), &grad, cfg.lr);
            step += 1;
            step_alignment.push(align(mlp.params())?);
        }
        let (loss, train_error) = evaluate_split(&mlp, data, &train_idx)?;
        if !loss.is_finite() || !mlp.params().iter().all(|w| w.is_finite()) {
            return Err(TrainError::Divergence { epoch, step, loss });
        }
        let val_error = if val_idx.is_empty() {
            None
        } else {
            Some(evaluate_split(&mlp, data, &val_idx)?.1)
        };
        epochs.push(EpochMetrics {
            epoch,
            loss,
            train_error,
            val_error,
            min_abs_grad: min_grad_sum / steps_this_epoch as f64,
            alignment: align(mlp.params())?,
            scale: state.as_ref().map_or(0.0, |s| s.scale_at(step)),
        });
    }

    Ok(TrainMetrics {
        epochs,
        step_alignment,
        num_params,
        p_est: state.as_ref().map(|s| s.p_est()),
        n_est: state.as_ref().map(|s| s.n_est()),
        wall_time_secs: started.elapsed().as_secs_f64(),
        final_params: mlp.params().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, VALIDATION_FRACTION};

    fn blobs() -> Dataset {
        synth_blobs(3, 4, 60, 0.2, 5)
            .unwrap()
            .with_validation_split(VALIDATION_FRACTION, 5)
            .unwrap()
    }

    #[test]
    fn min_abs_gradient_values() {
        assert_eq!(min_abs_gradient(&[0.0, 0.0]), 0.0);
        assert_eq!(min_abs_gradient(&[-0.3]), 0.3);
        assert_eq!(min_abs_gradient(&[]), 0.0);
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let data = blobs();
        let spec = MlpSpec { hidden: vec![8, 8], ..Default::default() };
        let cfg = TrainConfig { lr: 0.0, epochs: 3, ..Default::default() };
        let m = train(&spec, &data, &cfg).unwrap();
        let init = Mlp::new(&spec, data.dim(), data.classes()).unwrap();
        assert_eq!(m.final_params, init.params());
        for e in &m.epochs[1..] {
            assert_eq!(e.loss, m.epochs[0].loss);
            assert_eq!(e.val_error, m.epochs[0].val_error);
            assert_eq!(e.alignment, m.epochs[0].alignment);
        }
    }

    #[test]
    fn zero_coupling_matches_plain_training() {
        let data = blobs();
        let spec = MlpSpec { hidden: vec![8, 8, 8], ..Default::default() };
        let base = TrainConfig {
            epochs: 2,
            anneal: AnnealConfig { coupling: 0.0, ..Default::default() },
            ..Default::default()
        };
        let plain = train(&spec, &data, &base).unwrap();
        let annealed = train(
            &spec,
            &data,
            &TrainConfig { perturbation: PerturbationMode::Anneal, ..base.clone() },
        )
        .unwrap();
        assert_eq!(plain.final_params, annealed.final_params);
        assert_eq!(plain.epochs, annealed.epochs);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs();
        let spec = MlpSpec { hidden: vec![6, 6, 6], ..Default::default() };
        let cfg = TrainConfig {
            epochs: 2,
            perturbation: PerturbationMode::Resampled,
            ..Default::default()
        };
        let a = train(&spec, &data, &cfg).unwrap();
        let b = train(&spec, &data, &cfg).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.step_alignment, b.step_alignment);
    }

    #[test]
    fn csv_has_five_columns() {
        let data = blobs();
        let spec = MlpSpec { hidden: vec![4], ..Default::default() };
        let m = train(&spec, &data, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 5));
    }

    #[test]
    fn divergence_is_reported() {
        let data = blobs();
        let spec = MlpSpec { hidden: vec![8, 8, 8], ..Default::default() };
        let cfg = TrainConfig {
            optimizer: OptimizerConfig::SgdMomentum { momentum: 0.0, nesterov: false },
            lr: 1e200,
            epochs: 3,
            ..Default::default()
        };
        assert!(matches!(train(&spec, &data, &cfg), Err(TrainError::Divergence { .. })));
    }
}
