//! The spherical p-spin Hamiltonian with a linear external field.
//!
//! Sign convention: everything here exposes the quantity that descent
//! minimizes,
//!
//! ```text
//! H̃(σ) = −J·n^{−(p−1)/2} Σ_{i1..ip} J_{i1..ip} σ_{i1}···σ_{ip} − hᵀσ
//! ```
//!
//! where the sum runs over all ordered index tuples of the dense,
//! unsymmetrized coupling tensor. Energies and derivatives are ambient
//! (defined on all of ℝⁿ); the sphere only enters through
//! [`SpinConfiguration`] and the descent module.

use std::io::{Read, Write};
use std::ops::Deref;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::seed::{stream_rng, Stream};

/// Default cap on the number of coupling-tensor entries.
pub const DEFAULT_ENTRY_BUDGET: u64 = 100_000_000;

/// Regeneration record for a [`Disorder`]; the raw tensor is never serialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling_scale: f64,
    pub seed: u64,
}

/// Regeneration record for an [`ExternalField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub n: usize,
    pub nu: f64,
    pub seed: u64,
}

/// One Hamiltonian instance: the iid standard normal couplings plus the
/// scalar coupling scale `J`.
///
/// Immutable after construction. The symmetrized gradient kernel is built
/// lazily on first use and cached.
#[derive(Debug)]
pub struct Disorder {
    n: usize,
    p: usize,
    seed: Option<u64>,
    coupling_scale: f64,
    couplings: Vec<f64>,
    kernel: OnceLock<SymmetricKernel>,
}

fn tensor_len(n: usize, p: usize) -> u128 {
    (n as u128).pow(p as u32)
}

fn check_budget(what: &'static str, requested: u128, budget: u64) -> Result<()> {
    if requested > budget as u128 {
        Err(Error::Capacity {
            what,
            requested,
            budget: budget as u128,
        })
    } else {
        Ok(())
    }
}

fn check_shape(n: usize, p: usize, coupling_scale: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("spin count n must be ≥ 2, got {n}")));
    }
    if p < 2 {
        return Err(invalid(format!("interaction order p must be ≥ 2, got {p}")));
    }
    if !(coupling_scale >= 0.0 && coupling_scale.is_finite()) {
        return Err(invalid(format!(
            "coupling scale J must be finite and ≥ 0, got {coupling_scale}"
        )));
    }
    Ok(())
}

/// Samples a disorder under the default entry budget.
pub fn sample_disorder(n: usize, p: usize, coupling_scale: f64, seed: u64) -> Result<Disorder> {
    Disorder::sample(n, p, coupling_scale, seed)
}

impl Disorder {
    pub fn sample(n: usize, p: usize, coupling_scale: f64, seed: u64) -> Result<Self> {
        Self::sample_with_budget(n, p, coupling_scale, seed, DEFAULT_ENTRY_BUDGET)
    }

    pub fn sample_with_budget(
        n: usize,
        p: usize,
        coupling_scale: f64,
        seed: u64,
        budget: u64,
    ) -> Result<Self> {
        check_shape(n, p, coupling_scale)?;
        let len = tensor_len(n, p);
        check_budget("coupling tensor", len, budget)?;
        let mut rng = stream_rng(seed, Stream::Disorder, &[]);
        let couplings = (0..len as usize)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            n,
            p,
            seed: Some(seed),
            coupling_scale,
            couplings,
            kernel: OnceLock::new(),
        })
    }

    pub fn from_spec(spec: &DisorderSpec) -> Result<Self> {
        Self::sample(spec.n, spec.p, spec.coupling_scale, spec.seed)
    }

    /// Wraps an explicit tensor (row-major, last index fastest).
    pub fn from_couplings(
        n: usize,
        p: usize,
        coupling_scale: f64,
        couplings: Vec<f64>,
    ) -> Result<Self> {
        check_shape(n, p, coupling_scale)?;
        let len = tensor_len(n, p);
        check_budget("coupling tensor", len, DEFAULT_ENTRY_BUDGET)?;
        check_len(len as usize, couplings.len())?;
        Ok(Self {
            n,
            p,
            seed: None,
            coupling_scale,
            couplings,
            kernel: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn coupling_scale(&self) -> f64 {
        self.coupling_scale
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `None` for tensors built with [`Disorder::from_couplings`].
    pub fn spec(&self) -> Option<DisorderSpec> {
        self.seed.map(|seed| DisorderSpec {
            n: self.n,
            p: self.p,
            coupling_scale: self.coupling_scale,
            seed,
        })
    }

    /// The prefactor J·n^{−(p−1)/2} in front of the coupling sum.
    pub fn normalization(&self) -> f64 {
        self.coupling_scale * (self.n as f64).powf(-((self.p - 1) as f64) / 2.0)
    }

    /// Dumps the raw couplings as little-endian f64, last index fastest.
    pub fn write_raw<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for x in &self.couplings {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`Disorder::write_raw`].
    pub fn read_raw<R: Read>(n: usize, p: usize, coupling_scale: f64, mut r: R) -> Result<Self> {
        check_shape(n, p, coupling_scale)?;
        let len = tensor_len(n, p);
        check_budget("coupling tensor", len, DEFAULT_ENTRY_BUDGET)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        check_len(len as usize * 8, bytes.len())?;
        let couplings = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::from_couplings(n, p, coupling_scale, couplings)
    }

    pub(crate) fn kernel(&self) -> &SymmetricKernel {
        self.kernel.get_or_init(|| SymmetricKernel::build(self))
    }
}

/// Gradient kernel over multisets of the trailing `p − 1` indices.
///
/// Row `m` column `t` holds the sum of `J` over every ordered tuple that
/// has `m` in one position and the multiset `t` in the others. Contracting
/// row `m` against `∏_{i∈t} σ_i` gives ∂/∂σ_m of the coupling sum. Columns
/// are ranked in colex order of the sorted members.
#[derive(Debug)]
pub(crate) struct SymmetricKernel {
    order: usize,
    count: usize,
    members: Vec<u32>,
    weights: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl SymmetricKernel {
    fn build(d: &Disorder) -> Self {
        let (n, p) = (d.n, d.p);
        let order = p - 1;
        let count = binomial(n + order - 1, order);
        // binom[c][i] = C(c, i) for c < n + order, i ≤ order
        let binom: Vec<Vec<usize>> = (0..n + order)
            .map(|c| (0..=order).map(|i| binomial(c, i)).collect())
            .collect();
        let rank = |sorted: &[usize]| -> usize {
            sorted
                .iter()
                .enumerate()
                .map(|(i, &a)| binom[a + i][i + 1])
                .sum()
        };

        let mut members = vec![0u32; count * order];
        let mut tuple = vec![0usize; order];
        loop {
            let r = rank(&tuple);
            for (slot, &a) in members[r * order..(r + 1) * order].iter_mut().zip(&tuple) {
                *slot = a as u32;
            }
            // next nondecreasing tuple
            let Some(pos) = (0..order).rev().find(|&i| tuple[i] + 1 < n) else {
                break;
            };
            let v = tuple[pos] + 1;
            tuple[pos..].iter_mut().for_each(|x| *x = v);
        }

        let mut weights = vec![0.0; n * count];
        let mut idx = vec![0usize; p];
        let mut rest = vec![0usize; order];
        for &value in &d.couplings {
            for k in 0..p {
                let m = idx[k];
                rest.clear();
                rest.extend(idx[..k].iter().chain(&idx[k + 1..]));
                rest.sort_unstable();
                weights[m * count + rank(&rest)] += value;
            }
            // odometer over all ordered index tuples, last index fastest
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < n {
                    break;
                }
                *slot = 0;
            }
        }
        Self {
            order,
            count,
            members,
            weights,
        }
    }

    /// Writes `∏_{i∈t} σ_i` for every multiset `t`.
    fn monomials(&self, sigma: &[f64], out: &mut [f64]) {
        for (o, set) in out.iter_mut().zip(self.members.chunks_exact(self.order)) {
            *o = set.iter().map(|&i| sigma[i as usize]).product();
        }
    }
}

/// A point on the sphere of radius √n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinConfiguration {
    values: Vec<f64>,
}

impl SpinConfiguration {
    /// Relative tolerance on ‖σ‖² = n.
    pub const TOLERANCE: f64 = 1e-8;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(invalid("empty spin configuration"));
        }
        let deviation = (norm_sq(&values) - n as f64).abs();
        if !(deviation <= Self::TOLERANCE * n as f64) {
            return Err(Error::OffSphere { n, deviation });
        }
        Ok(Self { values })
    }

    /// Rescales `values` onto the sphere.
    pub fn project(values: Vec<f64>) -> Result<Self> {
        let norm = norm_sq(&values).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("cannot project a zero or non-finite vector onto the sphere"));
        }
        let scale = (values.len() as f64).sqrt() / norm;
        Ok(Self {
            values: values.into_iter().map(|x| x * scale).collect(),
        })
    }

    pub(crate) fn from_sphere_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// 1 − a·b/n: 0 for identical points, 2 for antipodal ones.
    pub fn cosine_distance(&self, other: &Self) -> f64 {
        cosine_distance(&self.values, &other.values)
    }
}

impl Deref for SpinConfiguration {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for SpinConfiguration {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// The perturbation vector h with iid N(0, ν²) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalField {
    values: Vec<f64>,
    nu: f64,
    seed: Option<u64>,
}

impl ExternalField {
    pub fn sample(n: usize, nu: f64, seed: u64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(invalid(format!("field strength ν must be finite and ≥ 0, got {nu}")));
        }
        let values = if nu == 0.0 {
            vec![0.0; n]
        } else {
            let mut rng = stream_rng(seed, Stream::Field, &[]);
            (0..n)
                .map(|_| nu * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        Ok(Self {
            values,
            nu,
            seed: Some(seed),
        })
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        Self::sample(spec.n, spec.nu, spec.seed)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            nu: 0.0,
            seed: None,
        }
    }

    /// An explicit field vector; `nu` is recorded as given.
    pub fn from_values(values: Vec<f64>, nu: f64) -> Self {
        Self {
            values,
            nu,
            seed: None,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> Option<FieldSpec> {
        self.seed.map(|seed| FieldSpec {
            n: self.n(),
            nu: self.nu,
            seed,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b) / a.len() as f64
}

/// Contracts the last mode of `t` (rows of length `x.len()`) with `x`.
fn contract_last(t: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(t.chunks_exact(x.len()).map(|row| dot(row, x)));
}

/// Scratch buffers reused across batched gradient evaluations.
#[derive(Debug, Default)]
pub struct GradientWorkspace {
    monomials: Vec<f64>,
}

/// A disorder paired with a field: the perturbed Hamiltonian H̃.
#[derive(Debug, Clone, Copy)]
pub struct Landscape<'a> {
    disorder: &'a Disorder,
    field: &'a ExternalField,
}

impl<'a> Landscape<'a> {
    pub fn new(disorder: &'a Disorder, field: &'a ExternalField) -> Result<Self> {
        check_len(disorder.n(), field.n())?;
        Ok(Self { disorder, field })
    }

    pub fn disorder(&self) -> &'a Disorder {
        self.disorder
    }

    pub fn field(&self) -> &'a ExternalField {
        self.field
    }

    pub fn n(&self) -> usize {
        self.disorder.n
    }

    /// H̃(σ), evaluated directly from the raw tensor.
    pub fn energy(&self, sigma: &[f64]) -> Result<f64> {
        check_len(self.n(), sigma.len())?;
        let d = self.disorder;
        let mut cur = Vec::new();
        contract_last(&d.couplings, sigma, &mut cur);
        let mut next = Vec::new();
        while cur.len() > 1 {
            contract_last(&cur, sigma, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(-d.normalization() * cur[0] - dot(self.field.values(), sigma))
    }

    /// Ambient gradient ∂H̃/∂σ.
    pub fn gradient(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), sigma.len())?;
        let mut out = vec![0.0; self.n()];
        self.gradient_batch(sigma, &mut out, &mut GradientWorkspace::default())?;
        Ok(out)
    }

    /// Gradients of a row-major batch of configurations (`rows × n`).
    ///
    /// All rows are contracted against the kernel in one matrix product.
    pub fn gradient_batch(
        &self,
        configs: &[f64],
        out: &mut [f64],
        ws: &mut GradientWorkspace,
    ) -> Result<()> {
        let n = self.n();
        if configs.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n * configs.len().div_ceil(n),
                found: configs.len(),
            });
        }
        check_len(configs.len(), out.len())?;
        let rows = configs.len() / n;
        if rows == 0 {
            return Ok(());
        }
        let d = self.disorder;
        let kernel = d.kernel();
        let count = kernel.count;
        ws.monomials.resize(rows * count, 0.0);
        for (row, sigma) in ws.monomials.chunks_exact_mut(count).zip(configs.chunks_exact(n)) {
            kernel.monomials(sigma, row);
        }
        // out[b, m] = Σ_t monomials[b, t] · weights[m, t]
        unsafe {
            matrixmultiply::dgemm(
                rows,
                count,
                n,
                1.0,
                ws.monomials.as_ptr(),
                count as isize,
                1,
                kernel.weights.as_ptr(),
                1,
                count as isize,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        let scale = d.normalization();
        let h = self.field.values();
        for row in out.chunks_exact_mut(n) {
            for (o, &hi) in row.iter_mut().zip(h) {
                *o = -scale * *o - hi;
            }
        }
        Ok(())
    }

    /// Ambient Hessian ∂²H̃/∂σ∂σ; independent of the field.
    pub fn hessian(&self, sigma: &[f64]) -> Result<DMatrix<f64>> {
        self.hessian_with_budget(sigma, DEFAULT_ENTRY_BUDGET)
    }

    pub fn hessian_with_budget(&self, sigma: &[f64], budget: u64) -> Result<DMatrix<f64>> {
        let n = self.n();
        check_len(n, sigma.len())?;
        check_budget("dense Hessian", (n as u128) * (n as u128), budget)?;
        let kernel = self.disorder.kernel();
        let order = kernel.order;
        // coef[t, q] = ∂/∂σ_{members[t, q]} of the monomial t, one slot per position
        let mut coef = vec![0.0; kernel.count * order];
        for (c, set) in coef
            .chunks_exact_mut(order)
            .zip(kernel.members.chunks_exact(order))
        {
            for q in 0..order {
                c[q] = set
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != q)
                    .map(|(_, &j)| sigma[j as usize])
                    .product();
            }
        }
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for m in 0..n {
            let row = &kernel.weights[m * kernel.count..(m + 1) * kernel.count];
            for ((&w, set), c) in row
                .iter()
                .zip(kernel.members.chunks_exact(order))
                .zip(coef.chunks_exact(order))
            {
                for (&l, &cq) in set.iter().zip(c) {
                    hess[(m, l as usize)] += w * cq;
                }
            }
        }
        let scale = -self.disorder.normalization();
        Ok((&hess + hess.transpose()) * (0.5 * scale))
    }
}

pub fn energy(d: &Disorder, sigma: &[f64], field: &ExternalField) -> Result<f64> {
    Landscape::new(d, field)?.energy(sigma)
}

pub fn gradient(d: &Disorder, sigma: &[f64], field: &ExternalField) -> Result<Vec<f64>> {
    Landscape::new(d, field)?.gradient(sigma)
}

pub fn hessian(d: &Disorder, sigma: &[f64], field: &ExternalField) -> Result<DMatrix<f64>> {
    Landscape::new(d, field)?.hessian(sigma)
}
