//! Many-descent census of a landscape: endpoint clustering, cosine-distance
//! statistics and the perturbed-minimum shift experiment.

use std::io::Write;

use petgraph::unionfind::UnionFind;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{
    critical_index, descend_pooled, random_configuration, DescentConfig, DescentResult,
    DEFAULT_BATCH,
};
use crate::error::{invalid, Error, Result};
use crate::export::{float, write_row};
use crate::hamiltonian::{dot, Disorder, ExternalField, Landscape, SpinConfiguration};
use crate::regimes::{critical_field, nu_for_tau, RegimeLabel};
use crate::seed::{derive_seed, stream_rng, Stream};

/// Pairs beyond which cosine statistics are estimated from a sample.
pub const MAX_COSINE_PAIRS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub label: String,
    pub nu: f64,
}

impl RegimeSpec {
    pub fn new(label: impl Into<String>, nu: f64) -> Self {
        Self {
            label: label.into(),
            nu,
        }
    }

    /// The named field strengths for a (J, p, n) landscape: ν = 1/n deep in
    /// the exponential regime, ν = ν_c(1 − 1/n)^{1/2} inside the polynomial
    /// band, and ν = 3J√(p(p−2)/3) well into the trivial regime (ν = 3 for
    /// J = 1, p = 3).
    pub fn standard(label: RegimeLabel, coupling_scale: f64, p: usize, n: usize) -> Result<Self> {
        let nu = match label {
            RegimeLabel::Exponential => 1.0 / n as f64,
            RegimeLabel::Polynomial => nu_for_tau(critical_field(coupling_scale, p), -0.5, n)?,
            RegimeLabel::Trivial => {
                let pf = p as f64;
                3.0 * coupling_scale * (pf * (pf - 2.0) / 3.0).max(0.0).sqrt()
            }
        };
        Ok(Self::new(label.as_str(), nu))
    }

    pub fn standard_set(coupling_scale: f64, p: usize, n: usize) -> Result<Vec<Self>> {
        [
            RegimeLabel::Exponential,
            RegimeLabel::Polynomial,
            RegimeLabel::Trivial,
        ]
        .into_iter()
        .map(|l| Self::standard(l, coupling_scale, p, n))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub trials: usize,
    pub regimes: Vec<RegimeSpec>,
    pub descent: DescentConfig,
    pub cluster_threshold: f64,
    pub master_seed: u64,
    /// Classify every converged endpoint by its Hessian index.
    pub compute_index: bool,
    /// Descents advanced together per batched gradient.
    pub batch: usize,
}

impl CensusConfig {
    pub fn new(trials: usize, regimes: Vec<RegimeSpec>, master_seed: u64) -> Self {
        Self {
            trials,
            regimes,
            descent: DescentConfig::default(),
            cluster_threshold: 0.05,
            master_seed,
            compute_index: true,
            batch: DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be ≥ 1"));
        }
        if self.regimes.is_empty() {
            return Err(invalid("at least one regime is required"));
        }
        for r in &self.regimes {
            if !(r.nu >= 0.0 && r.nu.is_finite()) {
                return Err(invalid(format!("regime {:?}: ν must be finite and ≥ 0", r.label)));
            }
        }
        if !(self.cluster_threshold > 0.0 && self.cluster_threshold < 2.0) {
            return Err(invalid(format!(
                "cluster threshold must lie in (0, 2), got {}",
                self.cluster_threshold
            )));
        }
        if self.batch == 0 {
            return Err(invalid("batch must be ≥ 1"));
        }
        self.descent.validate()
    }

    pub fn field_seed(&self, regime: usize) -> u64 {
        derive_seed(self.master_seed, &[Stream::Field as u64, regime as u64])
    }

    pub fn trial_seed(&self, regime: usize, trial: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[Stream::Trial as u64, regime as u64, trial as u64],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed of the uniform starting point.
    pub seed: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub normalized_energy: f64,
    pub iters: u64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Hessian index; `None` for non-converged trials or when not computed.
    pub index: Option<usize>,
    /// Cluster label among converged endpoints.
    pub cluster: Option<usize>,
    #[serde(skip)]
    pub endpoint: SpinConfiguration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub pairs: u64,
    pub subsampled: bool,
    /// False when fewer than two endpoints were available; the statistics
    /// are then reported as 0.
    pub defined: bool,
}

impl CosineStats {
    fn undefined() -> Self {
        Self {
            mean: 0.0,
            min: 0.0,
            max: 0.0,
            pairs: 0,
            subsampled: false,
            defined: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCensus {
    pub label: String,
    pub nu: f64,
    pub field_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub converged: usize,
    pub convergence_rate: f64,
    pub cluster_count: usize,
    pub cosine: CosineStats,
    /// Share of indexed endpoints with index 0.
    pub minima_fraction: Option<f64>,
    /// Share of trials whose final energy does not exceed the initial one.
    pub descent_fraction: f64,
    pub mean_normalized_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusResult {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling_scale: f64,
    pub disorder_seed: Option<u64>,
    pub config: CensusConfig,
    pub regimes: Vec<RegimeCensus>,
}

/// Per-regime statistics without per-trial rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub label: String,
    pub nu: f64,
    pub field_seed: u64,
    pub trials: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    pub cluster_count: usize,
    pub cosine: CosineStats,
    pub minima_fraction: Option<f64>,
    pub descent_fraction: f64,
    pub mean_normalized_energy: f64,
    pub median_iters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusSummary {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling_scale: f64,
    pub disorder_seed: Option<u64>,
    pub config: CensusConfig,
    pub regimes: Vec<RegimeSummary>,
}

/// Single-linkage clustering under cosine distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub count: usize,
    /// Cluster of each endpoint, numbered by first appearance.
    pub labels: Vec<usize>,
}

/// Two endpoints share a cluster iff a chain of links with cosine distance
/// ≤ `eps` joins them. σ and −σ are distinct points.
pub fn cluster_minima<E: AsRef<[f64]> + Sync>(endpoints: &[E], eps: f64) -> Clustering {
    let m = endpoints.len();
    let links: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let a = endpoints[i].as_ref();
            let n = a.len() as f64;
            (i + 1..m)
                .filter(|&j| 1.0 - dot(a, endpoints[j].as_ref()) / n <= eps)
                .collect()
        })
        .collect();
    let mut uf = UnionFind::<usize>::new(m);
    for (i, js) in links.iter().enumerate() {
        for &j in js {
            uf.union(i, j);
        }
    }
    let roots = uf.into_labeling();
    let mut first = std::collections::HashMap::new();
    let labels: Vec<usize> = roots
        .iter()
        .map(|&r| {
            let next = first.len();
            *first.entry(r).or_insert(next)
        })
        .collect();
    Clustering {
        count: first.len(),
        labels,
    }
}

/// Mean, min and max of 1 − a·b/n over unordered pairs. Beyond
/// [`MAX_COSINE_PAIRS`] pairs a fixed-size sample drawn from `seed` is used.
pub fn cosine_distance_stats<E: AsRef<[f64]>>(endpoints: &[E], seed: u64) -> Result<CosineStats> {
    let m = endpoints.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "cosine statistics need at least 2 endpoints, got {m}"
        )));
    }
    let total = (m as u64) * (m as u64 - 1) / 2;
    let dist = |i: usize, j: usize| {
        let a = endpoints[i].as_ref();
        1.0 - dot(a, endpoints[j].as_ref()) / a.len() as f64
    };
    let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    let mut visit = |d: f64| {
        sum += d;
        min = min.min(d);
        max = max.max(d);
    };
    let subsampled = total > MAX_COSINE_PAIRS;
    let pairs = if subsampled {
        let mut rng = stream_rng(seed, Stream::Subsample, &[]);
        for _ in 0..MAX_COSINE_PAIRS {
            let i = rng.random_range(0..m);
            let mut j = rng.random_range(0..m - 1);
            if j >= i {
                j += 1;
            }
            visit(dist(i, j));
        }
        MAX_COSINE_PAIRS
    } else {
        for i in 0..m {
            for j in i + 1..m {
                visit(dist(i, j));
            }
        }
        total
    };
    Ok(CosineStats {
        mean: sum / pairs as f64,
        min,
        max,
        pairs,
        subsampled,
        defined: true,
    })
}

/// Starting points handed to one worker; each worker keeps a pool of
/// `batch` descents in flight.
const WORK_CHUNK: usize = 512;

fn descend_all(
    l: &Landscape,
    inits: &[SpinConfiguration],
    cfg: &DescentConfig,
    batch: usize,
) -> Result<Vec<DescentResult>> {
    let chunks: Vec<Vec<DescentResult>> = inits
        .par_chunks(WORK_CHUNK)
        .map(|c| descend_pooled(l, c, cfg, batch))
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn median_u64(mut v: Vec<u64>) -> u64 {
    if v.is_empty() {
        return 0;
    }
    v.sort_unstable();
    v[v.len() / 2]
}

/// Runs `cfg.trials` descents per regime against one shared disorder.
///
/// Output is a function of the disorder and `cfg` only; thread count and
/// scheduling do not affect it.
pub fn run_census(d: &Disorder, cfg: &CensusConfig) -> Result<CensusResult> {
    cfg.validate()?;
    let n = d.n();
    let mut regimes = Vec::with_capacity(cfg.regimes.len());
    for (r, spec) in cfg.regimes.iter().enumerate() {
        let field_seed = cfg.field_seed(r);
        let field = ExternalField::sample(n, spec.nu, field_seed)?;
        let l = Landscape::new(d, &field)?;
        let seeds: Vec<u64> = (0..cfg.trials).map(|t| cfg.trial_seed(r, t)).collect();
        let inits: Vec<SpinConfiguration> = seeds
            .iter()
            .map(|&s| random_configuration(n, s))
            .collect::<Result<_>>()?;
        let results = descend_all(&l, &inits, &cfg.descent, cfg.batch)?;
        let indices: Vec<Option<usize>> = results
            .par_iter()
            .map(|res| {
                if cfg.compute_index && res.converged {
                    critical_index(&l, &res.endpoint, cfg.descent.grad_tol).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;

        let converged: Vec<usize> = (0..results.len()).filter(|&i| results[i].converged).collect();
        let endpoints: Vec<&[f64]> = converged.iter().map(|&i| results[i].endpoint.as_slice()).collect();
        let clustering = cluster_minima(&endpoints, cfg.cluster_threshold);
        let cosine = if endpoints.len() >= 2 {
            cosine_distance_stats(&endpoints, derive_seed(cfg.master_seed, &[r as u64]))?
        } else {
            CosineStats::undefined()
        };
        let mut cluster = vec![None; results.len()];
        for (&i, &c) in converged.iter().zip(&clustering.labels) {
            cluster[i] = Some(c);
        }
        let indexed: Vec<usize> = indices.iter().flatten().copied().collect();
        let minima_fraction = (!indexed.is_empty())
            .then(|| indexed.iter().filter(|&&k| k == 0).count() as f64 / indexed.len() as f64);
        let descent_fraction = results
            .iter()
            .filter(|r| r.final_energy <= r.initial_energy)
            .count() as f64
            / results.len() as f64;
        let mean_normalized_energy = if converged.is_empty() {
            f64::NAN
        } else {
            converged.iter().map(|&i| results[i].normalized_energy).sum::<f64>() / converged.len() as f64
        };

        let trials: Vec<TrialRecord> = results
            .into_iter()
            .enumerate()
            .map(|(t, res)| TrialRecord {
                trial: t,
                seed: seeds[t],
                initial_energy: res.initial_energy,
                final_energy: res.final_energy,
                normalized_energy: res.normalized_energy,
                iters: res.iters,
                grad_norm: res.grad_norm,
                converged: res.converged,
                index: indices[t],
                cluster: cluster[t],
                endpoint: res.endpoint,
            })
            .collect();
        regimes.push(RegimeCensus {
            label: spec.label.clone(),
            nu: spec.nu,
            field_seed,
            converged: converged.len(),
            convergence_rate: converged.len() as f64 / cfg.trials as f64,
            cluster_count: clustering.count,
            cosine,
            minima_fraction,
            descent_fraction,
            mean_normalized_energy,
            trials,
        });
    }
    Ok(CensusResult {
        n,
        p: d.p(),
        coupling_scale: d.coupling_scale(),
        disorder_seed: d.seed(),
        config: cfg.clone(),
        regimes,
    })
}

impl CensusResult {
    pub fn regime(&self, label: &str) -> Option<&RegimeCensus> {
        self.regimes.iter().find(|r| r.label == label)
    }

    pub fn summary(&self) -> CensusSummary {
        CensusSummary {
            n: self.n,
            p: self.p,
            coupling_scale: self.coupling_scale,
            disorder_seed: self.disorder_seed,
            config: self.config.clone(),
            regimes: self
                .regimes
                .iter()
                .map(|r| RegimeSummary {
                    label: r.label.clone(),
                    nu: r.nu,
                    field_seed: r.field_seed,
                    trials: r.trials.len(),
                    converged: r.converged,
                    convergence_rate: r.convergence_rate,
                    cluster_count: r.cluster_count,
                    cosine: r.cosine,
                    minima_fraction: r.minima_fraction,
                    descent_fraction: r.descent_fraction,
                    mean_normalized_energy: r.mean_normalized_energy,
                    median_iters: median_u64(r.trials.iter().map(|t| t.iters).collect()),
                })
                .collect(),
        }
    }

    /// One row per trial across all regimes.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_row(
            &mut w,
            &[
                "regime",
                "trial",
                "seed",
                "energy_per_n",
                "index",
                "converged",
                "iters",
                "grad_norm",
                "cluster",
            ],
        )?;
        for r in &self.regimes {
            for t in &r.trials {
                let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
                write_row(
                    &mut w,
                    &[
                        r.label.clone(),
                        t.trial.to_string(),
                        t.seed.to_string(),
                        float(t.normalized_energy),
                        opt(t.index),
                        t.converged.to_string(),
                        t.iters.to_string(),
                        float(t.grad_norm),
                        opt(t.cluster),
                    ],
                )?;
            }
        }
        Ok(())
    }

    /// Endpoint matrix of one regime: trial number followed by the n spins.
    pub fn write_endpoints_csv<W: Write>(&self, regime: &str, mut w: W) -> Result<()> {
        let r = self
            .regime(regime)
            .ok_or_else(|| invalid(format!("no regime labelled {regime:?}")))?;
        let mut header = vec!["trial".to_string()];
        header.extend((0..self.n).map(|i| format!("s{i}")));
        write_row(&mut w, &header)?;
        for t in &r.trials {
            let mut row = vec![t.trial.to_string()];
            row.extend(t.endpoint.iter().map(|&x| float(x)));
            write_row(&mut w, &row)?;
        }
        Ok(())
    }
}

/// How the field strength ν is turned into a per-component standard
/// deviation in the shift experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldNormalization {
    /// h_i ~ N(0, ν²), the normalization used everywhere else.
    #[default]
    PerComponent,
    /// h_i ~ N(0, ν²/n); a diagnostic for the n^{−1/2}hᵀσ convention.
    RootN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub n_grid: Vec<usize>,
    pub p: usize,
    #[serde(rename = "J")]
    pub coupling_scale: f64,
    pub nu: f64,
    pub trials: usize,
    pub seed: u64,
    pub descent: DescentConfig,
    pub normalization: FieldNormalization,
    pub batch: usize,
}

impl ShiftConfig {
    pub fn new(n_grid: Vec<usize>, p: usize, coupling_scale: f64, nu: f64, trials: usize, seed: u64) -> Self {
        Self {
            n_grid,
            p,
            coupling_scale,
            nu,
            trials,
            seed,
            descent: DescentConfig::default(),
            normalization: FieldNormalization::PerComponent,
            batch: DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 3 {
            return Err(invalid(format!(
                "the n grid needs at least 3 values, got {}",
                self.n_grid.len()
            )));
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return Err(invalid("every n in the grid must be ≥ 2"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("ν must be finite and ≥ 0, got {}", self.nu)));
        }
        if self.trials == 0 || self.batch == 0 {
            return Err(invalid("trials and batch must be ≥ 1"));
        }
        self.descent.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftTrial {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub base_converged: bool,
    pub perturbed_converged: bool,
    /// ‖σ − σ̃‖₂, for trials where both descents converged.
    pub distance: Option<f64>,
    /// |H(σ) − H̃(σ̃)|/n, for trials where both descents converged.
    pub energy_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSummary {
    pub n: usize,
    pub disorder_seed: u64,
    pub field_seed: u64,
    pub kept: usize,
    pub dropped: usize,
    pub median_distance: f64,
    pub median_energy_diff: f64,
    pub max_energy_diff: f64,
    /// Share of kept trials with energy difference ≤ 2ν.
    pub within_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationShiftReport {
    pub config: ShiftConfig,
    pub per_n: Vec<ShiftSummary>,
    /// Fitted exponent of median distance ∝ n^{−α}; `None` when some
    /// median is zero or missing.
    pub alpha: Option<f64>,
    pub trials: Vec<ShiftTrial>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// For each n, descends on the unperturbed landscape to a minimum σ, then
/// descends on the perturbed landscape starting from σ to reach σ̃.
pub fn perturbation_shift_experiment(cfg: &ShiftConfig) -> Result<PerturbationShiftReport> {
    cfg.validate()?;
    let mut per_n = Vec::with_capacity(cfg.n_grid.len());
    let mut trials = Vec::new();
    for &n in &cfg.n_grid {
        let disorder_seed = derive_seed(cfg.seed, &[Stream::Disorder as u64, n as u64]);
        let field_seed = derive_seed(cfg.seed, &[Stream::Field as u64, n as u64]);
        let d = Disorder::sample(n, cfg.p, cfg.coupling_scale, disorder_seed)?;
        let std = match cfg.normalization {
            FieldNormalization::PerComponent => cfg.nu,
            FieldNormalization::RootN => cfg.nu / (n as f64).sqrt(),
        };
        let field = ExternalField::sample(n, std, field_seed)?;
        let zero = ExternalField::zero(n);
        let base = Landscape::new(&d, &zero)?;
        let perturbed = Landscape::new(&d, &field)?;

        let seeds: Vec<u64> = (0..cfg.trials)
            .map(|t| derive_seed(cfg.seed, &[Stream::Trial as u64, n as u64, t as u64]))
            .collect();
        let inits: Vec<SpinConfiguration> = seeds
            .iter()
            .map(|&s| random_configuration(n, s))
            .collect::<Result<_>>()?;
        let minima = descend_all(&base, &inits, &cfg.descent, cfg.batch)?;
        let starts: Vec<SpinConfiguration> = minima
            .iter()
            .filter(|m| m.converged)
            .map(|m| m.endpoint.clone())
            .collect();
        let mut shifted = descend_all(&perturbed, &starts, &cfg.descent, cfg.batch)?.into_iter();

        let (mut dists, mut diffs) = (Vec::new(), Vec::new());
        let mut within = 0usize;
        for (t, m) in minima.iter().enumerate() {
            let mut rec = ShiftTrial {
                n,
                trial: t,
                seed: seeds[t],
                base_converged: m.converged,
                perturbed_converged: false,
                distance: None,
                energy_diff: None,
            };
            if m.converged {
                let s = shifted.next().expect("one shifted run per converged minimum");
                rec.perturbed_converged = s.converged;
                if s.converged {
                    let dist = m
                        .endpoint
                        .iter()
                        .zip(s.endpoint.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let diff = (m.final_energy - s.final_energy).abs() / n as f64;
                    if diff <= 2.0 * cfg.nu {
                        within += 1;
                    }
                    rec.distance = Some(dist);
                    rec.energy_diff = Some(diff);
                    dists.push(dist);
                    diffs.push(diff);
                }
            }
            trials.push(rec);
        }
        let kept = dists.len();
        per_n.push(ShiftSummary {
            n,
            disorder_seed,
            field_seed,
            kept,
            dropped: cfg.trials - kept,
            median_distance: median(&mut dists),
            median_energy_diff: median(&mut diffs),
            max_energy_diff: diffs.iter().copied().fold(f64::NAN, f64::max),
            within_bound: if kept == 0 { f64::NAN } else { within as f64 / kept as f64 },
        });
    }
    let usable = per_n
        .iter()
        .all(|s| s.median_distance > 0.0 && s.median_distance.is_finite());
    let alpha = if usable {
        let x: Vec<f64> = per_n.iter().map(|s| (s.n as f64).ln()).collect();
        let y: Vec<f64> = per_n.iter().map(|s| s.median_distance.ln()).collect();
        fit_slope(&x, &y).map(|s| -s)
    } else {
        None
    };
    Ok(PerturbationShiftReport {
        config: cfg.clone(),
        per_n,
        alpha,
        trials,
    })
}
