//! Closed-form regime calculus for the perturbed Hamiltonian: the order
//! parameter B, the critical field ν_c, expected critical-point and minima
//! counts, and the field strengths used for annealing.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default width constant of the polynomial band |B| ≤ c/n.
pub const DEFAULT_BAND_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    #[serde(rename = "J")]
    pub coupling_scale: f64,
    pub p: usize,
    pub n: usize,
    pub nu: f64,
}

impl RegimeParams {
    pub fn order_parameter(&self) -> Result<f64> {
        order_parameter(self.coupling_scale, self.p, self.nu)
    }

    pub fn critical_field(&self) -> f64 {
        critical_field(self.coupling_scale, self.p)
    }

    pub fn classify(&self, band_constant: f64) -> Result<RegimeLabel> {
        Ok(classify_regime(self.order_parameter()?, self.n, band_constant))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeLabel {
    Exponential,
    Polynomial,
    Trivial,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Exponential => "exponential",
            RegimeLabel::Polynomial => "polynomial",
            RegimeLabel::Trivial => "trivial",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(RegimeLabel::Exponential),
            "polynomial" => Ok(RegimeLabel::Polynomial),
            "trivial" => Ok(RegimeLabel::Trivial),
            other => Err(invalid(format!("unknown regime label {other:?}"))),
        }
    }
}

/// B = (J²p(p−2) − ν²)/(J²p² + ν²), in (−1, 1 − 2/p].
pub fn order_parameter(coupling_scale: f64, p: usize, nu: f64) -> Result<f64> {
    if coupling_scale == 0.0 && nu == 0.0 {
        return Err(invalid("order parameter is 0/0 when J = ν = 0"));
    }
    let p = p as f64;
    let j2 = coupling_scale * coupling_scale;
    let nu2 = nu * nu;
    Ok((j2 * p * (p - 2.0) - nu2) / (j2 * p * p + nu2))
}

/// ν_c = J√(p(p−2)); zero for p ≤ 2.
pub fn critical_field(coupling_scale: f64, p: usize) -> f64 {
    let p = p as f64;
    coupling_scale * (p * (p - 2.0)).max(0.0).sqrt()
}

/// Which case of the expected critical-point count applies. The caller
/// chooses; the count does not infer it from B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "lowercase")]
pub enum CountBranch {
    /// B = −Ω(1/n): total trivialization.
    Trivial,
    /// B = −τ/n with τ > 0.
    Polynomial { tau: f64 },
    /// B > 0.
    Exponential { b: f64 },
}

/// Expected number of critical points of H̃ for large n.
pub fn expected_critical_points(branch: CountBranch, n: usize) -> Result<f64> {
    let nf = n as f64;
    match branch {
        CountBranch::Trivial => Ok(2.0),
        CountBranch::Polynomial { tau } => {
            if !(tau > 0.0) {
                return Err(invalid(format!("polynomial branch needs τ > 0, got {tau}")));
            }
            Ok(2.0 * nf / PI.sqrt() * tau.powf(-1.5))
        }
        CountBranch::Exponential { b } => {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("exponential branch needs 0 < B < 1, got {b}")));
            }
            let prefactor = 4.0 * nf.sqrt() * ((1.0 + b) / (PI * b)).sqrt();
            Ok(prefactor * (nf / 2.0 * ((1.0 + b) / (1.0 - b)).ln()).exp())
        }
    }
}

/// Edge-scaling count for B = −τ/n, valid for |τ| ≥ 1.
pub fn expected_critical_points_edge(tau: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if tau >= 1.0 {
        Ok(nf * 2.0 / PI.sqrt() * tau.powf(-1.5))
    } else if tau <= -1.0 {
        let a = tau.abs();
        Ok(nf * 2.0 / (PI * a).sqrt() * 2.0 * a.exp())
    } else {
        Err(invalid(format!("edge scaling needs |τ| ≥ 1, got τ = {tau}")))
    }
}

/// Edge-scaling count of local minima for B = −(κ/2)n^{−1/3}, valid for
/// |κ| ≥ 1.
///
/// For κ ≤ −1 the value is returned without the unspecified positive
/// prefactor C, i.e. it is the count modulo C.
pub fn expected_minima_edge(kappa: f64) -> Result<f64> {
    if kappa >= 1.0 {
        Ok(1.0)
    } else if kappa <= -1.0 {
        let a = kappa.abs();
        Ok((kappa * kappa / 24.0 + 4.0 * 2f64.sqrt() * a.powf(1.5) / 3.0).exp())
    } else {
        Err(invalid(format!("edge scaling needs |κ| ≥ 1, got κ = {kappa}")))
    }
}

/// ν = ν_c(1 + 2τ/n)^{1/2}.
pub fn nu_for_tau(nu_c: f64, tau: f64, n: usize) -> Result<f64> {
    let arg = 1.0 + 2.0 * tau / n as f64;
    if !(arg > 0.0) {
        return Err(invalid(format!("need τ > −n/2, got τ = {tau} for n = {n}")));
    }
    Ok(nu_c * arg.sqrt())
}

/// ν = ν_c(1 + κ log n / n^{1/3})^{1/2}.
pub fn nu_for_kappa(nu_c: f64, kappa: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let arg = 1.0 + kappa * nf.ln() / nf.cbrt();
    if !(arg > 0.0) {
        return Err(invalid(format!(
            "need 1 + κ log n / n^(1/3) > 0, got {arg} (κ = {kappa}, n = {n})"
        )));
    }
    Ok(nu_c * arg.sqrt())
}

/// Polynomial if |B| ≤ c/n, exponential above the band, trivial below it.
pub fn classify_regime(b: f64, n: usize, band_constant: f64) -> RegimeLabel {
    let band = band_constant / n as f64;
    if b.abs() <= band {
        RegimeLabel::Polynomial
    } else if b > band {
        RegimeLabel::Exponential
    } else {
        RegimeLabel::Trivial
    }
}

/// Branch of the critical-point count matching B's position relative to
/// the band: trivial below it, B = −τ/n inside it for B < 0, and the B > 0
/// case otherwise. `None` exactly at B = 0, where both finite-n branches
/// diverge.
pub fn branch_for(b: f64, n: usize, band_constant: f64) -> Option<CountBranch> {
    match classify_regime(b, n, band_constant) {
        RegimeLabel::Trivial => Some(CountBranch::Trivial),
        _ if b < 0.0 => Some(CountBranch::Polynomial {
            tau: -b * n as f64,
        }),
        _ if b > 0.0 => Some(CountBranch::Exponential { b }),
        _ => None,
    }
}

/// One row of the regime table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub nu: f64,
    pub b: f64,
    pub regime: RegimeLabel,
    pub branch: Option<CountBranch>,
    /// `f64::INFINITY` when no finite branch applies.
    pub expected_count: f64,
}

pub fn regime_table(
    coupling_scale: f64,
    p: usize,
    n: usize,
    nu_grid: &[f64],
    band_constant: f64,
) -> Result<Vec<RegimeRow>> {
    if n < 2 {
        return Err(invalid(format!("n must be ≥ 2, got {n}")));
    }
    if !(band_constant > 0.0) {
        return Err(invalid(format!("band constant must be > 0, got {band_constant}")));
    }
    nu_grid
        .iter()
        .map(|&nu| {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(invalid(format!("ν must be finite and ≥ 0, got {nu}")));
            }
            let b = order_parameter(coupling_scale, p, nu)?;
            let regime = classify_regime(b, n, band_constant);
            let branch = branch_for(b, n, band_constant);
            let expected_count = match branch {
                Some(br) => expected_critical_points(br, n)?,
                None => f64::INFINITY,
            };
            Ok(RegimeRow {
                nu,
                b,
                regime,
                branch,
                expected_count,
            })
        })
        .collect()
}
