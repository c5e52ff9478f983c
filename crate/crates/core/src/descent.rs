//! Projected gradient descent on the sphere S^{n−1}(√n) and critical-point
//! index classification.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::hamiltonian::{dot, norm_sq, GradientWorkspace, Landscape, SpinConfiguration};
use crate::seed::{stream_rng, Stream};

/// Number of configurations advanced together through one batched gradient.
pub const DEFAULT_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub step: f64,
    pub grad_tol: f64,
    pub max_iters: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            grad_tol: 1e-4,
            max_iters: 1_000_000,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(invalid(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentResult {
    pub endpoint: SpinConfiguration,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// final_energy / n
    pub normalized_energy: f64,
    pub iters: u64,
    /// Norm of the tangent (projected) gradient at the endpoint.
    pub grad_norm: f64,
    /// Norm of the ambient gradient at the endpoint, for comparison.
    pub ambient_grad_norm: f64,
    pub converged: bool,
}

/// Uniform point on the sphere: a normalized isotropic Gaussian.
pub fn random_configuration(n: usize, seed: u64) -> Result<SpinConfiguration> {
    if n < 2 {
        return Err(invalid(format!("n must be ≥ 2, got {n}")));
    }
    let mut rng = stream_rng(seed, Stream::Init, &[]);
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    SpinConfiguration::project(v)
}

/// g − (g·σ/n)σ.
pub fn project_tangent(g: &[f64], sigma: &SpinConfiguration) -> Result<Vec<f64>> {
    check_len(sigma.n(), g.len())?;
    let radial = dot(g, sigma) / sigma.n() as f64;
    Ok(g.iter().zip(sigma.iter()).map(|(gi, si)| gi - radial * si).collect())
}

/// √n·v/‖v‖.
pub fn retract(v: Vec<f64>) -> Result<SpinConfiguration> {
    SpinConfiguration::project(v)
}

/// Descends from a single starting point.
pub fn descend(l: &Landscape, init: &SpinConfiguration, cfg: &DescentConfig) -> Result<DescentResult> {
    let mut out = descend_batch(l, std::slice::from_ref(init), cfg)?;
    Ok(out.pop().expect("one result per start"))
}

struct Finished {
    sigma: Vec<f64>,
    iters: u64,
    grad_norm: f64,
    ambient_grad_norm: f64,
    converged: bool,
}

/// Descends from every starting point, advancing all unfinished runs in
/// lockstep so their gradients share one matrix product.
///
/// Each run's trajectory is the same as if it were descended alone.
pub fn descend_batch(
    l: &Landscape,
    inits: &[SpinConfiguration],
    cfg: &DescentConfig,
) -> Result<Vec<DescentResult>> {
    descend_pooled(l, inits, cfg, inits.len().max(1))
}

/// Like [`descend_batch`], but at most `width` runs are in flight; a slot
/// freed by a finished run is refilled with the next starting point.
pub fn descend_pooled(
    l: &Landscape,
    inits: &[SpinConfiguration],
    cfg: &DescentConfig,
    width: usize,
) -> Result<Vec<DescentResult>> {
    cfg.validate()?;
    if width == 0 {
        return Err(invalid("pool width must be ≥ 1"));
    }
    let n = l.n();
    for init in inits {
        check_len(n, init.n())?;
    }
    let nf = n as f64;
    let root_n = nf.sqrt();
    let width = width.min(inits.len().max(1));
    let mut state = vec![0.0; width * n];
    let mut grads = vec![0.0; width * n];
    // (run, iterations so far) for each occupied row
    let mut slots: Vec<(usize, u64)> = Vec::with_capacity(width);
    let mut pending = 0usize;
    let mut finished: Vec<Option<Finished>> = (0..inits.len()).map(|_| None).collect();
    let mut ws = GradientWorkspace::default();
    let mut next = vec![0.0; n];
    let tol_sq = cfg.grad_tol * cfg.grad_tol;

    loop {
        while slots.len() < width && pending < inits.len() {
            let row = slots.len();
            state[row * n..(row + 1) * n].copy_from_slice(&inits[pending]);
            slots.push((pending, 0));
            pending += 1;
        }
        if slots.is_empty() {
            break;
        }
        let rows = slots.len();
        l.gradient_batch(&state[..rows * n], &mut grads[..rows * n], &mut ws)?;
        let mut keep = 0;
        for r in 0..rows {
            let (run, iter) = slots[r];
            let sigma = &state[r * n..(r + 1) * n];
            let g = &grads[r * n..(r + 1) * n];
            let radial = dot(g, sigma) / nf;
            let mut pnorm_sq = 0.0;
            for ((x, &gi), &si) in next.iter_mut().zip(g).zip(sigma) {
                let pg = gi - radial * si;
                pnorm_sq += pg * pg;
                *x = si - cfg.step * pg;
            }
            let converged = pnorm_sq <= tol_sq;
            if converged || iter == cfg.max_iters {
                finished[run] = Some(Finished {
                    sigma: sigma.to_vec(),
                    iters: iter,
                    grad_norm: pnorm_sq.sqrt(),
                    ambient_grad_norm: norm_sq(g).sqrt(),
                    converged,
                });
                continue;
            }
            let norm = norm_sq(&next).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(invalid("descent left the sphere: non-finite or zero iterate"));
            }
            let scale = root_n / norm;
            for (dst, &x) in state[keep * n..(keep + 1) * n].iter_mut().zip(&next) {
                *dst = x * scale;
            }
            slots[keep] = (run, iter + 1);
            keep += 1;
        }
        slots.truncate(keep);
    }

    inits
        .iter()
        .zip(finished)
        .map(|(init, f)| {
            let f = f.expect("every run finishes");
            let initial_energy = l.energy(init)?;
            let final_energy = l.energy(&f.sigma)?;
            Ok(DescentResult {
                endpoint: SpinConfiguration::from_sphere_unchecked(f.sigma),
                initial_energy,
                final_energy,
                normalized_energy: final_energy / nf,
                iters: f.iters,
                grad_norm: f.grad_norm,
                ambient_grad_norm: f.ambient_grad_norm,
                converged: f.converged,
            })
        })
        .collect()
}

/// Eigenvalues, ascending, of the Riemannian Hessian P∇²H̃P − (σ·∇H̃/n)P
/// restricted to the tangent space at σ.
pub fn tangent_hessian_spectrum(l: &Landscape, sigma: &SpinConfiguration) -> Result<Vec<f64>> {
    let mut eig = tangent_hessian(l, sigma)?.symmetric_eigenvalues().as_slice().to_vec();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn tangent_hessian(l: &Landscape, sigma: &SpinConfiguration) -> Result<DMatrix<f64>> {
    let n = l.n();
    check_len(n, sigma.n())?;
    let hess = l.hessian(sigma)?;
    let g = l.gradient(sigma)?;
    let lambda = dot(&g, sigma) / n as f64;

    // Householder reflector Q = I − βwwᵀ mapping σ/‖σ‖ to a multiple of e₀;
    // columns 1.. of Q span the tangent space.
    let norm = norm_sq(sigma).sqrt();
    let mut w: Vec<f64> = sigma.iter().map(|x| x / norm).collect();
    w[0] += if w[0] >= 0.0 { 1.0 } else { -1.0 };
    let beta = 2.0 / norm_sq(&w);
    let w = nalgebra::DVector::from_vec(w);
    let v = &hess * &w;
    let wv = w.dot(&v);
    // QHQ = H − β(wvᵀ + vwᵀ) + β²(wᵀv)wwᵀ
    let mut qhq = hess;
    qhq.ger(-beta, &w, &v, 1.0);
    qhq.ger(-beta, &v, &w, 1.0);
    qhq.ger(beta * beta * wv, &w, &w, 1.0);
    let mut t = qhq.view((1, 1), (n - 1, n - 1)).into_owned();
    for i in 0..n - 1 {
        t[(i, i)] -= lambda;
    }
    Ok((&t + t.transpose()) * 0.5)
}

/// Number of negative eigenvalues of the tangent Hessian, counting only those
/// below −10⁻⁶·max|entry|. Local minima have index 0.
pub fn critical_index(l: &Landscape, sigma: &SpinConfiguration, grad_tol: f64) -> Result<usize> {
    let g = l.gradient(sigma)?;
    let pg = project_tangent(&g, sigma)?;
    let grad_norm = norm_sq(&pg).sqrt();
    let limit = 10.0 * grad_tol;
    if !(grad_norm <= limit) {
        return Err(Error::NotNearCritical { grad_norm, limit });
    }
    let t = tangent_hessian(l, sigma)?;
    let eig_tol = 1e-6 * t.amax();
    Ok(t.symmetric_eigenvalues()
        .iter()
        .filter(|&&e| e < -eig_tol)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{Disorder, ExternalField};

    fn linear_setup(n: usize, seed: u64) -> (Disorder, ExternalField) {
        let d = Disorder::from_couplings(n, 3, 1.0, vec![0.0; n * n * n]).unwrap();
        let f = ExternalField::sample(n, 1.0, seed).unwrap();
        (d, f)
    }

    #[test]
    fn random_configuration_properties() {
        let a = random_configuration(100, 1).unwrap();
        let b = random_configuration(100, 2).unwrap();
        assert!((norm_sq(&a) - 100.0).abs() <= 1e-8 * 100.0);
        assert!(dot(&a, &b).abs() / 100.0 < 0.5);
        assert_eq!(a, random_configuration(100, 1).unwrap());
        assert!(random_configuration(1, 1).is_err());
    }

    #[test]
    fn tangent_projection() {
        let s = random_configuration(100, 3).unwrap();
        let parallel: Vec<f64> = s.iter().map(|x| 2.5 * x).collect();
        assert!(project_tangent(&parallel, &s).unwrap().iter().all(|x| x.abs() < 1e-12));
        let g: Vec<f64> = random_configuration(100, 4).unwrap().into_vec();
        let pg = project_tangent(&g, &s).unwrap();
        assert!(dot(&pg, &s).abs() <= 1e-8 * norm_sq(&g).sqrt() * 10.0);
        let again = project_tangent(&pg, &s).unwrap();
        for (a, b) in again.iter().zip(&pg) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(project_tangent(&g[..5], &s).is_err());
    }

    #[test]
    fn retraction() {
        let s = random_configuration(10, 5).unwrap();
        let r = retract(s.to_vec()).unwrap();
        for (a, b) in r.iter().zip(s.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let doubled = retract(s.iter().map(|x| 2.0 * x).collect()).unwrap();
        for (a, b) in doubled.iter().zip(s.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(retract(vec![0.0; 4]).is_err());
    }

    #[test]
    fn linear_objective_descends_to_field_direction() {
        let (d, f) = linear_setup(20, 9);
        let l = Landscape::new(&d, &f).unwrap();
        let start = random_configuration(20, 10).unwrap();
        let res = descend(&l, &start, &DescentConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.grad_norm <= 1e-4);
        let target = SpinConfiguration::project(f.values().to_vec()).unwrap();
        assert!(res.endpoint.cosine_distance(&target) < 1e-3);
        assert_eq!(critical_index(&l, &res.endpoint, 1e-4).unwrap(), 0);
        let top = SpinConfiguration::project(f.values().iter().map(|x| -x).collect()).unwrap();
        assert_eq!(critical_index(&l, &top, 1e-4).unwrap(), 19);
    }

    #[test]
    fn flat_objective_returns_immediately() {
        let d = Disorder::from_couplings(6, 2, 1.0, vec![0.0; 36]).unwrap();
        let f = ExternalField::zero(6);
        let l = Landscape::new(&d, &f).unwrap();
        let start = random_configuration(6, 1).unwrap();
        let res = descend(&l, &start, &DescentConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iters, 0);
        assert_eq!(res.endpoint, start);
    }

    #[test]
    fn small_step_linear_energy_never_increases() {
        let (d, f) = linear_setup(15, 2);
        let l = Landscape::new(&d, &f).unwrap();
        let cfg = DescentConfig {
            step: 1e-2,
            max_iters: 1,
            ..Default::default()
        };
        let mut sigma = random_configuration(15, 3).unwrap();
        let mut e = l.energy(&sigma).unwrap();
        for _ in 0..200 {
            let r = descend(&l, &sigma, &cfg).unwrap();
            assert!(r.final_energy <= e + 1e-12);
            assert!((norm_sq(&r.endpoint) - 15.0).abs() <= 1e-8 * 15.0);
            e = r.final_energy;
            sigma = r.endpoint;
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let d = Disorder::sample(30, 3, 1.0, 1).unwrap();
        let f = ExternalField::zero(30);
        let l = Landscape::new(&d, &f).unwrap();
        let cfg = DescentConfig {
            max_iters: 3,
            ..Default::default()
        };
        let r = descend(&l, &random_configuration(30, 2).unwrap(), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iters, 3);
        assert!(matches!(
            critical_index(&l, &r.endpoint, 1e-4),
            Err(Error::NotNearCritical { .. })
        ));
    }

    #[test]
    fn batch_matches_individual_runs() {
        let d = Disorder::sample(25, 3, 1.0, 8).unwrap();
        let f = ExternalField::sample(25, 0.5, 9).unwrap();
        let l = Landscape::new(&d, &f).unwrap();
        let starts: Vec<_> = (0..9).map(|s| random_configuration(25, s).unwrap()).collect();
        let cfg = DescentConfig::default();
        let batch = descend_batch(&l, &starts, &cfg).unwrap();
        for (s, b) in starts.iter().zip(&batch) {
            assert_eq!(&descend(&l, s, &cfg).unwrap(), b);
        }
        assert_eq!(descend_pooled(&l, &starts, &cfg, 4).unwrap(), batch);
        assert_eq!(descend_pooled(&l, &starts, &cfg, 1).unwrap(), batch);
    }

    #[test]
    fn invalid_config_is_rejected() {
        for cfg in [
            DescentConfig { step: 0.0, ..Default::default() },
            DescentConfig { grad_tol: -1.0, ..Default::default() },
            DescentConfig { max_iters: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
