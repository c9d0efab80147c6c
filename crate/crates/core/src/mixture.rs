//! Prior side of the mixture: model configuration, the exchangeable partition
//! probability function, the induced prior on the number of clusters and the
//! generative sampler.
//!
//! The number of components is L = 1 + Poisson(Λ) and the unnormalized
//! weights are independent Gamma(γ, 1) variables.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::hamming::{self, HammingParams};
use crate::hig::{sample_sigma, HIGParams};
use crate::numerics::{log_gamma, log_gen_factorial_row, shifted_poisson_sample, v_integral_log};
use crate::summary::Partition;

/// Inverse-gamma prior (shape, scale) on a shared scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InverseGammaPrior {
    fn default() -> Self {
        Self { shape: 2.0, scale: 1.0 }
    }
}

/// Which scales a shared scale ties together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharedSigmaScope {
    /// One scale per component, common to its variables.
    #[default]
    Component,
    /// One scale common to every component and variable.
    Global,
}

impl std::str::FromStr for SharedSigmaScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "component" => Ok(Self::Component),
            "global" => Ok(Self::Global),
            _ => Err(Error::invalid(format!("unknown shared scale scope '{s}' (component|global)"))),
        }
    }
}

/// Hyperparameters of the mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub hig_priors: Vec<HIGParams>,
    /// Replace the per-variable scales by a shared scale.
    pub shared_sigma: bool,
    #[serde(default)]
    pub shared_sigma_scope: SharedSigmaScope,
    pub shared_sigma_prior: InverseGammaPrior,
    pub mh_proposal_sd: f64,
}

impl ModelConfig {
    pub fn new(gamma: f64, lambda: f64, hig_priors: Vec<HIGParams>) -> Self {
        Self {
            gamma,
            lambda,
            hig_priors,
            shared_sigma: false,
            shared_sigma_scope: SharedSigmaScope::Component,
            shared_sigma_prior: InverseGammaPrior::default(),
            mh_proposal_sd: 0.1,
        }
    }

    /// Configuration with default HIG hyperparameters for each variable.
    pub fn with_defaults(gamma: f64, lambda: f64, modality_counts: &[usize]) -> Self {
        Self::new(gamma, lambda, HIGParams::defaults_for(modality_counts))
    }

    pub fn validate(&self, modality_counts: &[usize]) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.hig_priors.len() != modality_counts.len() {
            return Err(Error::Config(format!(
                "{} HIG priors given for {} variables",
                self.hig_priors.len(),
                modality_counts.len()
            )));
        }
        for (j, (h, &m)) in self.hig_priors.iter().zip(modality_counts).enumerate() {
            if !(h.v > 0.0 && h.w > 0.0) {
                return Err(Error::Config(format!("variable {j}: v and w must be positive")));
            }
            if h.m != m.max(1) {
                return Err(Error::Config(format!(
                    "variable {j}: prior is tied to m={} but the data have m={m}",
                    h.m
                )));
            }
        }
        if self.shared_sigma {
            let ig = self.shared_sigma_prior;
            if !(ig.shape > 0.0 && ig.scale > 0.0) {
                return Err(Error::Config("shared-scale prior needs positive shape and scale".into()));
            }
            if !(self.mh_proposal_sd > 0.0) {
                return Err(Error::Config("proposal sd must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Block sizes n_1..n_K of a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSizes {
    sizes: Vec<usize>,
    n: usize,
}

impl PartitionSizes {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("block sizes must be positive and nonempty"));
        }
        let n = sizes.iter().sum();
        Ok(Self { sizes, n })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }
}

/// ln of the probability of one particular partition with the given block
/// sizes: ln V(n, K) + Σ_k [ln Γ(γ + n_k) - ln Γ(γ)].
pub fn eppf_log(sizes: &PartitionSizes, gamma: f64, lambda: f64) -> Result<f64> {
    let lg = log_gamma(gamma)?;
    let mut s = v_integral_log(sizes.n, sizes.k(), gamma, lambda)?;
    for &nk in &sizes.sizes {
        s += log_gamma(gamma + nk as f64)? - lg;
    }
    Ok(s)
}

/// Prior on the number of clusters among n observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorK {
    /// P(K = k + 1) for k = 0..n.
    pub pmf: Vec<f64>,
    /// |1 - Σ P(K)| before renormalization.
    pub defect: f64,
}

impl PriorK {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum()
    }

    /// Most probable K; ties go to the smaller value.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.pmf.iter().enumerate() {
            if p > self.pmf[best] {
                best = k;
            }
        }
        best + 1
    }
}

/// Terms with ln P(K) below the running maximum by more than this are set to
/// zero without evaluating the integral.
const NEGLIGIBLE_LOG: f64 = -80.0;

/// P(K) = V(n, K) D(n, K) for K = 1..n.
pub fn prior_k_pmf(n: usize, gamma: f64, lambda: f64) -> Result<PriorK> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let log_d = log_gen_factorial_row(n, gamma)?;
    let mut log_p = vec![f64::NEG_INFINITY; n];
    let mut max = f64::NEG_INFINITY;
    let mut past_peak = 0;
    for k in 1..=n {
        let lp = v_integral_log(n, k, gamma, lambda)? + log_d[k];
        log_p[k - 1] = lp;
        if lp > max {
            max = lp;
            past_peak = 0;
        } else {
            past_peak += 1;
        }
        // The sequence is unimodal in practice; stop once it has decayed far
        // below the peak for a while.
        if lp < max + NEGLIGIBLE_LOG && past_peak > 10 {
            break;
        }
    }
    let mut pmf: Vec<f64> = log_p.iter().map(|&l| l.exp()).collect();
    let total: f64 = pmf.iter().sum();
    let defect = (1.0 - total).abs();
    if !(defect <= 1e-4) {
        return Err(Error::Numerics(format!(
            "prior on K sums to {total} (n={n}, gamma={gamma}, lambda={lambda})"
        )));
    }
    for p in &mut pmf {
        *p /= total;
    }
    Ok(PriorK { pmf, defect })
}

/// Summary of the prior on K matched by [`elicit_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KStatistic {
    Mean,
    Mode,
}

impl std::str::FromStr for KStatistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(KStatistic::Mean),
            "mode" => Ok(KStatistic::Mode),
            other => Err(Error::invalid(format!("unknown statistic '{other}' (use mean or mode)"))),
        }
    }
}

const GAMMA_MIN: f64 = 1e-4;
const GAMMA_MAX: f64 = 1e3;

/// γ whose induced prior on K has the requested mean or mode.
///
/// The mean is matched by bisection on ln γ over [1e-4, 1e3] until it is
/// within `mean_tol` of the target. For the mode the smallest γ (to relative
/// precision 1e-6) whose prior mode reaches the target is returned.
pub fn elicit_gamma(n: usize, lambda: f64, k_target: usize, statistic: KStatistic, mean_tol: f64) -> Result<f64> {
    if k_target == 0 || k_target > n {
        return Err(Error::invalid(format!("target K must lie in 1..={n}, got {k_target}")));
    }
    let mut lo = GAMMA_MIN.ln();
    let mut hi = GAMMA_MAX.ln();
    let target = k_target as f64;
    match statistic {
        KStatistic::Mean => {
            // Coarse monotonicity scan of the prior mean.
            let mut prev = f64::NEG_INFINITY;
            let mut range = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=12 {
                let g = (lo + (hi - lo) * i as f64 / 12.0).exp();
                let m = prior_k_pmf(n, g, lambda)?.mean();
                if m < prev - 1e-6 {
                    return Err(Error::Numerics(format!(
                        "prior mean of K is not monotone in gamma near {g}"
                    )));
                }
                prev = m;
                range = (range.0.min(m), range.1.max(m));
            }
            if target < range.0 - mean_tol || target > range.1 + mean_tol {
                return Err(Error::invalid(format!(
                    "prior mean {target} unreachable: achievable range is [{:.4}, {:.4}] for gamma in [{GAMMA_MIN}, {GAMMA_MAX}]",
                    range.0, range.1
                )));
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let m = prior_k_pmf(n, mid.exp(), lambda)?.mean();
                if (m - target).abs() <= mean_tol {
                    return Ok(mid.exp());
                }
                if m < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(Error::RootFinding("gamma bisection did not converge".into()))
        }
        KStatistic::Mode => {
            let mode_hi = prior_k_pmf(n, hi.exp(), lambda)?.mode();
            let mode_lo = prior_k_pmf(n, lo.exp(), lambda)?.mode();
            if mode_hi < k_target || mode_lo > k_target {
                return Err(Error::invalid(format!(
                    "prior mode {k_target} unreachable: achievable modes are {mode_lo}..={mode_hi}"
                )));
            }
            if mode_lo == k_target {
                return Ok(lo.exp());
            }
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                if prior_k_pmf(n, mid.exp(), lambda)?.mode() >= k_target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mode = prior_k_pmf(n, hi.exp(), lambda)?.mode();
            if mode != k_target {
                return Err(Error::invalid(format!(
                    "prior mode jumps past {k_target} (to {mode}) near gamma = {}",
                    hi.exp()
                )));
            }
            Ok(hi.exp())
        }
    }
}

/// Output of [`sample_generative`].
#[derive(Debug, Clone)]
pub struct GenerativeDraw {
    pub dataset: CategoricalDataset,
    /// Canonical partition of the observations.
    pub partition: Partition,
    /// Component label of each observation, in 0..L.
    pub allocations: Vec<usize>,
    pub components: Vec<HammingParams>,
    pub weights: Vec<f64>,
}

impl GenerativeDraw {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }
}

/// Draws component parameters from the prior.
pub fn sample_component_prior<R: Rng + ?Sized>(
    config: &ModelConfig,
    modality_counts: &[usize],
    rng: &mut R,
) -> Result<HammingParams> {
    let center: Vec<u32> = modality_counts
        .iter()
        .map(|&m| rng.random_range(0..m.max(1) as u32))
        .collect();
    let scale = config
        .hig_priors
        .iter()
        .map(|h| sample_sigma(h, rng))
        .collect::<Result<Vec<_>>>()?;
    HammingParams::new(center, scale)
}

/// Draws a dataset from the full hierarchy.
pub fn sample_generative<R: Rng + ?Sized>(
    n: usize,
    modality_counts: &[usize],
    config: &ModelConfig,
    rng: &mut R,
) -> Result<GenerativeDraw> {
    config.validate(modality_counts)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let l = shifted_poisson_sample(1, config.lambda, rng) as usize;
    let gamma = Gamma::new(config.gamma, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let weights: Vec<f64> = (0..l).map(|_| gamma.sample(rng)).collect();
    let components = (0..l)
        .map(|_| sample_component_prior(config, modality_counts, rng))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = weights.iter().sum();
    let mut allocations = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n * modality_counts.len());
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut z = l - 1;
        for (c, &s) in weights.iter().enumerate() {
            if u < s {
                z = c;
                break;
            }
            u -= s;
        }
        allocations.push(z);
        codes.extend(hamming::sample(&components[z], modality_counts, rng));
    }
    let dataset = CategoricalDataset::from_numeric_codes(n, modality_counts, codes)?;
    Ok(GenerativeDraw {
        partition: Partition::from_labels(&allocations),
        dataset,
        allocations,
        components,
        weights,
    })
}
