//! The Hamming distribution on categorical vectors: evaluation, sampling,
//! heterogeneity indices and the latent-class scatter map.
//!
//! For a center c and scales σ the probability mass is
//!
//!   p(x | c, σ) = Π_j exp(-(1 - δ(x_j, c_j)) / σ_j) / (1 + (m_j - 1) ω_j),
//!
//! with ω_j = exp(-1/σ_j).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to scales produced by samplers.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Center and per-variable scale of one Hamming kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingParams {
    pub center: Vec<u32>,
    pub scale: Vec<f64>,
}

impl HammingParams {
    pub fn new(center: Vec<u32>, scale: Vec<f64>) -> Result<Self> {
        if center.len() != scale.len() {
            return Err(Error::invalid(format!(
                "center has length {} but scale has length {}",
                center.len(),
                scale.len()
            )));
        }
        if let Some(s) = scale.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::domain(format!("scales must be positive, got {s}")));
        }
        Ok(Self { center, scale })
    }

    pub fn p(&self) -> usize {
        self.center.len()
    }

    /// Checks codes against modality counts.
    pub fn validate(&self, modality_counts: &[usize]) -> Result<()> {
        if modality_counts.len() != self.p() {
            return Err(Error::invalid("modality count vector has the wrong length"));
        }
        for (j, (&c, &m)) in self.center.iter().zip(modality_counts).enumerate() {
            if c as usize >= m {
                return Err(Error::invalid(format!("center code {c} out of range for variable {j} (m={m})")));
            }
        }
        Ok(())
    }
}

/// ω = exp(-1/σ).
pub fn omega(sigma: f64) -> f64 {
    (-1.0 / sigma).exp()
}

/// σ = -1/ln ω.
pub fn sigma_from_omega(omega: f64) -> f64 {
    -1.0 / omega.ln()
}

/// ln(1 + (m - 1) ω), the per-variable log normalizer.
pub fn log_normalizer(sigma: f64, m: usize) -> f64 {
    ((m as f64 - 1.0) * omega(sigma)).ln_1p()
}

/// ln p(x | c, σ).
pub fn log_pmf(x: &[u32], params: &HammingParams, modality_counts: &[usize]) -> Result<f64> {
    if x.len() != params.p() || modality_counts.len() != params.p() {
        return Err(Error::invalid("vector lengths disagree"));
    }
    let mut total = 0.0;
    for j in 0..x.len() {
        let m = modality_counts[j];
        if x[j] as usize >= m {
            return Err(Error::invalid(format!("code {} out of range for variable {j} (m={m})", x[j])));
        }
        let sigma = params.scale[j];
        if x[j] != params.center[j] {
            total -= 1.0 / sigma;
        }
        total -= log_normalizer(sigma, m);
    }
    Ok(total)
}

/// Precomputed per-variable terms of one kernel for repeated evaluation.
#[derive(Debug, Clone)]
pub struct HammingKernel {
    center: Vec<u32>,
    inv_sigma: Vec<f64>,
    log_norm_total: f64,
}

impl HammingKernel {
    pub fn new(params: &HammingParams, modality_counts: &[usize]) -> Self {
        let inv_sigma: Vec<f64> = params.scale.iter().map(|s| 1.0 / s).collect();
        let log_norm_total = params
            .scale
            .iter()
            .zip(modality_counts)
            .map(|(&s, &m)| log_normalizer(s, m))
            .sum();
        Self {
            center: params.center.clone(),
            inv_sigma,
            log_norm_total,
        }
    }

    /// ln p(x | c, σ) without bounds checks.
    pub fn log_pmf(&self, x: &[u32]) -> f64 {
        let mut mismatch = 0.0;
        for ((xj, cj), inv) in x.iter().zip(&self.center).zip(&self.inv_sigma) {
            if xj != cj {
                mismatch += inv;
            }
        }
        -mismatch - self.log_norm_total
    }
}

/// Draws one vector from the kernel.
pub fn sample<R: Rng + ?Sized>(params: &HammingParams, modality_counts: &[usize], rng: &mut R) -> Vec<u32> {
    params
        .center
        .iter()
        .zip(&params.scale)
        .zip(modality_counts)
        .map(|((&c, &sigma), &m)| {
            if m < 2 {
                return c;
            }
            let w = (m as f64 - 1.0) * omega(sigma);
            let p_center = 1.0 / (1.0 + w);
            if rng.random::<f64>() < p_center {
                c
            } else {
                // Uniform over the other m - 1 modalities.
                let r = rng.random_range(0..(m as u32 - 1));
                if r >= c {
                    r + 1
                } else {
                    r
                }
            }
        })
        .collect()
}

fn check_indices(scales: &[f64], modality_counts: &[usize]) -> Result<()> {
    if scales.len() != modality_counts.len() {
        return Err(Error::invalid("scale and modality vectors differ in length"));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::domain(format!("scales must be positive, got {s}")));
    }
    if modality_counts.iter().all(|&m| m < 2) {
        return Err(Error::domain("heterogeneity index undefined when every variable is constant"));
    }
    Ok(())
}

/// Gini index 1 - Σ_x p(x)^2 divided by its maximum 1 - Π 1/m_j.
pub fn gini_normalized(scales: &[f64], modality_counts: &[usize]) -> Result<f64> {
    check_indices(scales, modality_counts)?;
    let mut log_sum_sq = 0.0;
    let mut log_min = 0.0;
    for (&sigma, &m) in scales.iter().zip(modality_counts) {
        let mm1 = m as f64 - 1.0;
        let om = omega(sigma);
        log_sum_sq += (mm1 * om * om).ln_1p() - 2.0 * (mm1 * om).ln_1p();
        log_min -= (m as f64).ln();
    }
    let g = -log_sum_sq.exp_m1();
    let g_max = -log_min.exp_m1();
    Ok((g / g_max).clamp(0.0, 1.0))
}

/// Shannon entropy of the kernel divided by its maximum Σ ln m_j.
pub fn shannon_normalized(scales: &[f64], modality_counts: &[usize]) -> Result<f64> {
    check_indices(scales, modality_counts)?;
    let mut h = 0.0;
    let mut h_max = 0.0;
    for (&sigma, &m) in scales.iter().zip(modality_counts) {
        let w = (m as f64 - 1.0) * omega(sigma);
        let z = 1.0 + w;
        h += w.ln_1p();
        if w > 0.0 {
            h += w / (z * sigma);
        }
        h_max += (m as f64).ln();
    }
    Ok((h / h_max).clamp(0.0, 1.0))
}

/// Direction of [`sigma_epsilon_convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    SigmaToEpsilon,
    EpsilonToSigma,
}

/// ε = (m - 1) / (e^{1/σ} + m - 1), the total non-modal probability.
pub fn sigma_to_epsilon(sigma: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("scatter map requires m >= 2"));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let w = (m as f64 - 1.0) * omega(sigma);
    Ok(w / (1.0 + w))
}

/// σ = 1 / ln[(m - 1)(1 - ε)/ε] for ε in (0, (m - 1)/m).
pub fn epsilon_to_sigma(epsilon: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("scatter map requires m >= 2"));
    }
    let upper = (m as f64 - 1.0) / m as f64;
    if !(epsilon > 0.0 && epsilon < upper) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0, {upper}) so that the center stays modal, got {epsilon}"
        )));
    }
    Ok(1.0 / ((m as f64 - 1.0) * (1.0 - epsilon) / epsilon).ln())
}

pub fn sigma_epsilon_convert(value: f64, m: usize, direction: ScaleDirection) -> Result<f64> {
    match direction {
        ScaleDirection::SigmaToEpsilon => sigma_to_epsilon(value, m),
        ScaleDirection::EpsilonToSigma => epsilon_to_sigma(value, m),
    }
}
