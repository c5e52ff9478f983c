//! Fully connected ReLU network with a softmax cross-entropy head.
//!
//! Parameters live in one flat vector, layer by layer from the input side:
//! the weight matrix W_l (fan_out × fan_in, row-major) followed by its bias
//! b_l. Gradients and the AnnealSGD direction use the same ordering.

use annealscape_core::seed::{stream_rng, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    /// Hidden layer widths, input side first.
    pub hidden: Vec<usize>,
    /// L2 coefficient on weight matrices (biases are not decayed).
    pub weight_decay: f64,
    pub init_seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32; 16],
            weight_decay: 0.0,
            init_seed: 0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(invalid("at least one hidden layer is required"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden widths must be ≥ 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight decay must be finite and ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Offset of W in the flat parameter vector; b follows W.
    offset: usize,
}

impl Layer {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    params: Vec<f64>,
    weight_decay: f64,
}

/// C = A·B for row-major A (m×k) and B (k×n), with B optionally given as
/// the row-major transpose (n×k).
fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], b_transposed: bool, c: &mut [f64]) {
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Weights and biases drawn from U(−1/√fan_in, 1/√fan_in).
    pub fn new(spec: &MlpSpec, input: usize, classes: usize) -> Result<Self> {
        spec.validate()?;
        if input == 0 || classes < 2 {
            return Err(invalid(format!(
                "need input ≥ 1 and ≥ 2 classes, got {input} and {classes}"
            )));
        }
        let mut sizes = vec![input];
        sizes.extend(&spec.hidden);
        sizes.push(classes);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            layers.push(Layer {
                fan_in: w[0],
                fan_out: w[1],
                offset,
            });
            offset += w[0] * w[1] + w[1];
        }
        let mut rng = stream_rng(spec.init_seed, Stream::Weights, &[]);
        let mut params = vec![0.0; offset];
        for layer in &layers {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for p in &mut params[layer.offset..layer.bias().end] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            layers,
            params,
            weight_decay: spec.weight_decay,
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Number of affine layers, hidden and output.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Pre-activations of every layer for a row-major batch.
    fn forward(&self, x: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act: Vec<f64> = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; rows * layer.fan_out];
            matmul(
                rows,
                layer.fan_in,
                layer.fan_out,
                &act,
                &self.params[layer.weights()],
                true,
                &mut z,
            );
            let b = &self.params[layer.bias()];
            for row in z.chunks_exact_mut(layer.fan_out) {
                for (zi, bi) in row.iter_mut().zip(b) {
                    *zi += bi;
                }
            }
            if li + 1 < self.layers.len() {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    fn check_batch(&self, x: &[f64], y: &[usize]) -> Result<usize> {
        let d = self.input_dim();
        if x.len() != y.len() * d {
            return Err(invalid(format!(
                "batch of {} labels needs {} features, got {}",
                y.len(),
                y.len() * d,
                x.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= self.classes()) {
            return Err(invalid(format!("label {bad} outside [0, {})", self.classes())));
        }
        Ok(y.len())
    }

    fn decay_term(&self) -> f64 {
        if self.weight_decay == 0.0 {
            return 0.0;
        }
        let sq: f64 = self
            .layers
            .iter()
            .flat_map(|l| self.params[l.weights()].iter())
            .map(|w| w * w)
            .sum();
        0.5 * self.weight_decay * sq
    }

    /// Mean cross-entropy and the number of misclassified rows, without the
    /// weight-decay term.
    pub fn evaluate(&self, x: &[f64], y: &[usize]) -> Result<(f64, usize)> {
        let rows = self.check_batch(x, y)?;
        if rows == 0 {
            return Ok((0.0, 0));
        }
        let pre = self.forward(x, rows);
        let logits = pre.last().expect("at least one layer");
        let k = self.classes();
        let mut loss = 0.0;
        let mut wrong = 0;
        for (row, &label) in logits.chunks_exact(k).zip(y) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
            let argmax = row
                .iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
            if argmax != label {
                wrong += 1;
            }
        }
        Ok((loss / rows as f64, wrong))
    }

    /// Regularized batch loss.
    pub fn loss(&self, x: &[f64], y: &[usize]) -> Result<f64> {
        Ok(self.evaluate(x, y)?.0 + self.decay_term())
    }

    /// Regularized batch loss; writes ∂loss/∂params into `grad`.
    pub fn loss_and_gradient(&self, x: &[f64], y: &[usize], grad: &mut [f64]) -> Result<f64> {
        let rows = self.check_batch(x, y)?;
        if grad.len() != self.params.len() {
            return Err(invalid(format!(
                "gradient buffer has {} entries, model has {}",
                grad.len(),
                self.params.len()
            )));
        }
        grad.fill(0.0);
        if rows == 0 {
            return Ok(self.decay_term());
        }
        let pre = self.forward(x, rows);
        let k = self.classes();
        let inv = 1.0 / rows as f64;
        let mut loss = 0.0;
        let mut delta = pre.last().expect("at least one layer").clone();
        for (row, &label) in delta.chunks_exact_mut(k).zip(y) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shifted = row[label] - max;
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            loss += sum.ln() - shifted;
            for v in row.iter_mut() {
                *v *= inv / sum;
            }
            row[label] -= inv;
        }
        loss *= inv;

        for li in (0..self.layers.len()).rev() {
            let layer = self.layers[li];
            let input: Vec<f64> = if li == 0 {
                x.to_vec()
            } else {
                pre[li - 1].iter().map(|&v| v.max(0.0)).collect()
            };
            // dW = δᵀ·input; δ is rows × fan_out, input rows × fan_in
            let mut dw = vec![0.0; layer.fan_out * layer.fan_in];
            let mut delta_t = vec![0.0; layer.fan_out * rows];
            for r in 0..rows {
                for o in 0..layer.fan_out {
                    delta_t[o * rows + r] = delta[r * layer.fan_out + o];
                }
            }
            matmul(layer.fan_out, rows, layer.fan_in, &delta_t, &input, false, &mut dw);
            grad[layer.weights()].copy_from_slice(&dw);
            let db = &mut grad[layer.bias()];
            for row in delta.chunks_exact(layer.fan_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if li > 0 {
                let mut back = vec![0.0; rows * layer.fan_in];
                matmul(
                    rows,
                    layer.fan_out,
                    layer.fan_in,
                    &delta,
                    &self.params[layer.weights()],
                    false,
                    &mut back,
                );
                for (b, &z) in back.iter_mut().zip(&pre[li - 1]) {
                    if z <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }

        if self.weight_decay != 0.0 {
            for layer in &self.layers {
                for i in layer.weights() {
                    grad[i] += self.weight_decay * self.params[i];
                }
            }
        }
        Ok(loss + self.decay_term())
    }
}

/// Largest componentwise error between the analytic gradient and central
/// differences of the loss, relative to max(|finite difference|, 1).
pub fn gradient_check(mlp: &Mlp, x: &[f64], y: &[usize], step: f64) -> Result<f64> {
    let mut grad = vec![0.0; mlp.num_params()];
    mlp.loss_and_gradient(x, y, &mut grad)?;
    let mut probe = mlp.clone();
    let mut worst: f64 = 0.0;
    for i in 0..grad.len() {
        let orig = probe.params[i];
        probe.params[i] = orig + step;
        let up = probe.loss(x, y)?;
        probe.params[i] = orig - step;
        let down = probe.loss(x, y)?;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}
