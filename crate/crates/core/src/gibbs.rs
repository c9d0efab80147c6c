//! Blocked Gibbs sampler for the Hamming mixture with a random number of
//! components.
//!
//! One sweep updates, in order: the auxiliary variable u, the allocations,
//! the number of non-allocated components, the unnormalized weights, and the
//! component parameters (allocated from their full conditionals,
//! non-allocated from the prior).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::hamming::{omega, sigma_from_omega, HammingKernel, HammingParams, SIGMA_FLOOR};
use crate::hig::{omega_mean_and_mode, posterior_params, sample_sigma, HIGParams};
use crate::mixture::{sample_component_prior, ModelConfig, SharedSigmaScope};
use crate::numerics::{log_sum_exp, shifted_poisson_sample};

/// Sampler state. Components 0..k are allocated and ordered by the smallest
/// datum key among their members; components k..L are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    /// Component index of each observation.
    pub z: Vec<u32>,
    pub k: usize,
    /// ln S_l for every component.
    pub log_weights: Vec<f64>,
    pub components: Vec<HammingParams>,
    pub u: f64,
}

impl MixtureState {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &z in &self.z {
            s[z as usize] += 1;
        }
        s
    }

    /// ln T, the log of the total unnormalized weight.
    pub fn log_total_weight(&self) -> f64 {
        log_sum_exp(&self.log_weights)
    }

    /// Builds a state from arbitrary component labels and reorders it so
    /// that allocated components come first.
    pub fn from_parts(
        z: Vec<u32>,
        log_weights: Vec<f64>,
        components: Vec<HammingParams>,
        u: f64,
        keys: &[u64],
    ) -> Result<Self> {
        if log_weights.len() != components.len() || components.is_empty() {
            return Err(Error::invalid("weights and components must have equal nonzero length"));
        }
        if keys.len() != z.len() {
            return Err(Error::invalid("one datum key per observation is required"));
        }
        if z.iter().any(|&l| l as usize >= components.len()) {
            return Err(Error::invalid("allocation label out of range"));
        }
        let mut state = Self {
            z,
            k: 0,
            log_weights,
            components,
            u,
        };
        relabel(&mut state, keys, true);
        Ok(state)
    }

    /// Checks the structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let l = self.components.len();
        if self.log_weights.len() != l || self.k > l || (self.k == 0 && !self.z.is_empty()) {
            return Err(Error::Numerics("inconsistent component counts".into()));
        }
        let sizes = self.cluster_sizes_checked()?;
        if sizes.contains(&0) {
            return Err(Error::Numerics("an allocated component is empty".into()));
        }
        if !(self.u > 0.0 && self.u.is_finite()) {
            return Err(Error::Numerics(format!("auxiliary variable is {}", self.u)));
        }
        if self.log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::Numerics("non-finite weight".into()));
        }
        if self
            .components
            .iter()
            .any(|c| c.scale.iter().any(|s| !(*s > 0.0)))
        {
            return Err(Error::Numerics("non-positive scale".into()));
        }
        Ok(())
    }

    fn cluster_sizes_checked(&self) -> Result<Vec<usize>> {
        let mut s = vec![0; self.k];
        for &z in &self.z {
            let z = z as usize;
            if z >= self.k {
                return Err(Error::Numerics(format!("observation allocated to empty slot {z}")));
            }
            s[z] += 1;
        }
        Ok(s)
    }
}

/// Renumbers allocated components 0..K by the smallest member key. Empty
/// components are kept after them when `keep_empty` is set and dropped
/// otherwise.
fn relabel(state: &mut MixtureState, keys: &[u64], keep_empty: bool) {
    let l = state.components.len();
    let mut min_key = vec![u64::MAX; l];
    let mut used = vec![false; l];
    for (&z, &key) in state.z.iter().zip(keys) {
        let z = z as usize;
        used[z] = true;
        min_key[z] = min_key[z].min(key);
    }
    let mut allocated: Vec<usize> = (0..l).filter(|&c| used[c]).collect();
    allocated.sort_by_key(|&c| (min_key[c], c));
    let mut order = allocated.clone();
    if keep_empty {
        order.extend((0..l).filter(|&c| !used[c]));
    }
    let mut new_index = vec![u32::MAX; l];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new as u32;
    }
    for z in &mut state.z {
        *z = new_index[*z as usize];
    }
    let mut comps: Vec<Option<HammingParams>> = std::mem::take(&mut state.components).into_iter().map(Some).collect();
    state.components = order.iter().map(|&c| comps[c].take().expect("each slot once")).collect();
    state.log_weights = order.iter().map(|&c| state.log_weights[c]).collect();
    state.k = allocated.len();
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform in [0, 1) determined by a sweep key and a datum key.
fn keyed_uniform(sweep_key: u64, datum_key: u64) -> f64 {
    let bits = splitmix64(sweep_key ^ splitmix64(datum_key));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index drawn from log-weights by inverse CDF on `u`.
fn draw_log_categorical(log_w: &[f64], u: f64, buf: &mut Vec<f64>) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    buf.clear();
    let mut total = 0.0;
    for &lw in log_w {
        total += (lw - max).exp();
        buf.push(total);
    }
    let target = u * total;
    buf.iter().position(|&c| target < c).unwrap_or(log_w.len() - 1)
}

/// ln of a Gamma(shape, rate) draw, accurate for small shapes.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        let y: f64 = g.sample(rng);
        let u: f64 = rng.random::<f64>();
        // Gamma(a) = Gamma(a + 1) U^{1/a}
        y.ln() + (1.0 - u).ln() / shape - rate.ln()
    } else {
        let g = Gamma::new(shape, 1.0).expect("positive shape");
        let y: f64 = g.sample(rng);
        y.ln() - rate.ln()
    }
}

/// Step 1: u ~ Gamma(n, T) with T the total weight.
pub fn step_u<R: Rng + ?Sized>(state: &mut MixtureState, rng: &mut R) {
    let n = state.z.len().max(1) as f64;
    let log_g = sample_log_gamma(n, 1.0, rng);
    state.u = (log_g - state.log_total_weight()).exp().max(f64::MIN_POSITIVE);
}

/// Step 2: allocations, then relabeling of allocated components and removal
/// of the empty ones.
///
/// The uniform used for observation i is derived from a per-sweep key drawn
/// from `rng` and the observation's `keys[i]`, so permuting the observations
/// together with their keys permutes the draws.
pub fn step_allocations<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &CategoricalDataset,
    keys: &[u64],
    rng: &mut R,
) {
    let m = data.modality_counts();
    let kernels: Vec<HammingKernel> = state.components.iter().map(|c| HammingKernel::new(c, &m)).collect();
    let sweep_key = rng.next_u64();
    let l = kernels.len();
    let mut log_w = vec![0.0; l];
    let mut buf = Vec::with_capacity(l);
    for i in 0..data.n() {
        let x = data.row(i);
        for c in 0..l {
            log_w[c] = state.log_weights[c] + kernels[c].log_pmf(x);
        }
        let u = keyed_uniform(sweep_key, keys[i]);
        state.z[i] = draw_log_categorical(&log_w, u, &mut buf) as u32;
    }
    relabel(state, keys, false);
}

/// Step 3: number of non-allocated components from the two-point mixture of
/// shifted Poisson laws with rate Λ/(u+1)^γ. New slots get placeholder
/// parameters that steps 4 and 5 overwrite.
pub fn step_num_nonallocated<R: Rng + ?Sized>(state: &mut MixtureState, config: &ModelConfig, rng: &mut R) {
    let lambda_u = config.lambda * (-config.gamma * state.u.ln_1p()).exp();
    let k = state.k as f64;
    // P(shift 0) = (u+1)^γ K / ((u+1)^γ K + Λ) = K / (K + λ_u)
    let p0 = k / (k + lambda_u);
    let shift = if rng.random::<f64>() < p0 { 0 } else { 1 };
    let extra = shifted_poisson_sample(shift, lambda_u, rng) as usize;
    state.components.truncate(state.k);
    state.log_weights.truncate(state.k);
    let p = state.components.first().map(|c| c.p()).unwrap_or(0);
    for _ in 0..extra {
        state.components.push(HammingParams {
            center: vec![0; p],
            scale: vec![1.0; p],
        });
        state.log_weights.push(0.0);
    }
}

/// Step 4: S_k ~ Gamma(γ + n_k, u + 1) for allocated components and
/// Gamma(γ, u + 1) for the rest.
pub fn step_weights<R: Rng + ?Sized>(state: &mut MixtureState, config: &ModelConfig, rng: &mut R) {
    let sizes = state.cluster_sizes();
    let rate = 1.0 + state.u;
    for l in 0..state.components.len() {
        let nk = sizes.get(l).copied().unwrap_or(0) as f64;
        state.log_weights[l] = sample_log_gamma(config.gamma + nk, rate, rng);
    }
}

/// Per-cluster, per-variable modality counts with layout
/// `[cluster][offset[j] + h]`.
pub struct CountTable {
    offsets: Vec<usize>,
    width: usize,
    counts: Vec<u32>,
}

impl CountTable {
    pub fn build(data: &CategoricalDataset, z: &[u32], k: usize) -> Self {
        let m = data.modality_counts();
        let mut offsets = Vec::with_capacity(m.len());
        let mut width = 0;
        for &mj in &m {
            offsets.push(width);
            width += mj;
        }
        let mut counts = vec![0u32; k * width];
        for (i, &c) in z.iter().enumerate() {
            let base = c as usize * width;
            for (j, &x) in data.row(i).iter().enumerate() {
                counts[base + offsets[j] + x as usize] += 1;
            }
        }
        Self { offsets, width, counts }
    }

    /// Counts of each modality of variable `j` in cluster `k`.
    pub fn get(&self, k: usize, j: usize, m: usize) -> &[u32] {
        let start = k * self.width + self.offsets[j];
        &self.counts[start..start + m]
    }
}

/// How the shared scale is updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SharedSigmaMode {
    /// All variables have the same modality count and the same HIG prior, so
    /// the shared scale has a HIG full conditional.
    Conjugate(HIGParams),
    /// Random-walk Metropolis on ln σ under an inverse-gamma prior.
    Metropolis,
}

pub fn shared_sigma_mode(config: &ModelConfig) -> SharedSigmaMode {
    match config.hig_priors.first() {
        Some(first) if config.hig_priors.iter().all(|h| h == first) => SharedSigmaMode::Conjugate(*first),
        _ => SharedSigmaMode::Metropolis,
    }
}

fn draw_center<R: Rng + ?Sized>(counts: &[u32], sigma: f64, rng: &mut R, buf: &mut Vec<f64>) -> u32 {
    let log_w: Vec<f64> = counts.iter().map(|&c| c as f64 / sigma).collect();
    draw_log_categorical(&log_w, rng.random::<f64>(), buf) as u32
}

/// Step 5a: centers and scales of the allocated components from their full
/// conditionals. With a shared scale only the centers are drawn here.
pub fn step_params_allocated<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &CategoricalDataset,
    config: &ModelConfig,
    rng: &mut R,
) -> Result<()> {
    let m = data.modality_counts();
    let table = CountTable::build(data, &state.z, state.k);
    let sizes = state.cluster_sizes();
    let mut buf = Vec::new();
    for k in 0..state.k {
        let comp = &mut state.components[k];
        for j in 0..m.len() {
            let counts = table.get(k, j, m[j]);
            let c = draw_center(counts, comp.scale[j], rng, &mut buf);
            comp.center[j] = c;
            if !config.shared_sigma {
                let post = posterior_params(&config.hig_priors[j], sizes[k] as u64, counts[c as usize] as u64)?;
                comp.scale[j] = sample_sigma(&post, rng)?;
            }
        }
    }
    Ok(())
}

/// Draws one shared scale from its prior.
fn sample_shared_prior<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<f64> {
    match shared_sigma_mode(config) {
        SharedSigmaMode::Conjugate(h) => sample_sigma(&h, rng),
        SharedSigmaMode::Metropolis => {
            let ig = config.shared_sigma_prior;
            let g = Gamma::new(ig.shape, 1.0).map_err(|e| Error::domain(e.to_string()))?;
            let y: f64 = g.sample(rng);
            Ok((ig.scale / y).max(SIGMA_FLOOR))
        }
    }
}

/// Step 5na: non-allocated components from the prior. A global shared scale
/// is copied instead of drawn.
pub fn step_params_nonallocated<R: Rng + ?Sized>(
    state: &mut MixtureState,
    config: &ModelConfig,
    modality_counts: &[usize],
    rng: &mut R,
) -> Result<()> {
    let global = (config.shared_sigma && config.shared_sigma_scope == SharedSigmaScope::Global)
        .then(|| state.components[0].scale[0]);
    for l in state.k..state.components.len() {
        let mut comp = sample_component_prior(config, modality_counts, rng)?;
        if let Some(s) = global {
            comp.scale.iter_mut().for_each(|x| *x = s);
        } else if config.shared_sigma {
            let s = sample_shared_prior(config, rng)?;
            comp.scale.iter_mut().for_each(|x| *x = s);
        }
        state.components[l] = comp;
    }
    Ok(())
}

/// Acceptance counts of the shared-scale Metropolis step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Log target of the Metropolis step in η = ln σ: inverse-gamma prior,
/// Hamming likelihood of the members and the Jacobian of the log map.
pub fn shared_sigma_log_target(
    eta: f64,
    size: usize,
    matches: &[u32],
    modality_counts: &[usize],
    prior: crate::mixture::InverseGammaPrior,
) -> f64 {
    let sigma = eta.exp();
    let inv = 1.0 / sigma;
    let om = omega(sigma);
    let n = size as f64;
    let mut ll = 0.0;
    for (&mt, &m) in matches.iter().zip(modality_counts) {
        ll -= n * ((m as f64 - 1.0) * om).ln_1p() + (n - mt as f64) * inv;
    }
    // σ^{-a-1} e^{-b/σ} · σ
    ll - prior.shape * eta - prior.scale * inv
}

/// One update of a shared scale given the pooled match counts of the
/// observations it governs.
pub fn shared_sigma_update<R: Rng + ?Sized>(
    current: f64,
    size: usize,
    matches: &[u32],
    modality_counts: &[usize],
    config: &ModelConfig,
    rng: &mut R,
    stats: &mut AcceptanceStats,
) -> Result<f64> {
    match shared_sigma_mode(config) {
        SharedSigmaMode::Conjugate(h) => {
            let total_matches: u64 = matches.iter().map(|&x| x as u64).sum();
            let total = (size * modality_counts.len()) as u64;
            sample_sigma(&posterior_params(&h, total, total_matches)?, rng)
        }
        SharedSigmaMode::Metropolis => {
            let current = current.ln();
            let step: f64 = Normal::new(0.0, config.mh_proposal_sd)
                .map_err(|e| Error::domain(e.to_string()))?
                .sample(rng);
            let proposal = current + step;
            let prior = config.shared_sigma_prior;
            let log_ratio = shared_sigma_log_target(proposal, size, matches, modality_counts, prior)
                - shared_sigma_log_target(current, size, matches, modality_counts, prior);
            stats.proposed += 1;
            let u: f64 = rng.random();
            Ok(if u.ln() < log_ratio {
                stats.accepted += 1;
                proposal.exp().max(SIGMA_FLOOR)
            } else {
                current.exp()
            })
        }
    }
}

/// Shared-scale update: one draw per allocated component, or a single draw
/// for all components with the global scope.
pub fn step_shared_sigma<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &CategoricalDataset,
    config: &ModelConfig,
    rng: &mut R,
    stats: &mut AcceptanceStats,
) -> Result<()> {
    let m = data.modality_counts();
    let table = CountTable::build(data, &state.z, state.k);
    let sizes = state.cluster_sizes();
    let matches_of = |k: usize, comp: &HammingParams| -> Vec<u32> {
        (0..m.len())
            .map(|j| table.get(k, j, m[j])[comp.center[j] as usize])
            .collect()
    };
    match config.shared_sigma_scope {
        SharedSigmaScope::Component => {
            for k in 0..state.k {
                let matches = matches_of(k, &state.components[k]);
                let comp = &mut state.components[k];
                let sigma = shared_sigma_update(comp.scale[0], sizes[k], &matches, &m, config, rng, stats)?;
                comp.scale.iter_mut().for_each(|s| *s = sigma);
            }
        }
        SharedSigmaScope::Global => {
            let mut matches = vec![0u32; m.len()];
            for k in 0..state.k {
                for (t, x) in matches.iter_mut().zip(matches_of(k, &state.components[k])) {
                    *t += x;
                }
            }
            let current = state.components[0].scale[0];
            let sigma = shared_sigma_update(current, state.z.len(), &matches, &m, config, rng, stats)?;
            for comp in state.components.iter_mut() {
                comp.scale.iter_mut().for_each(|s| *s = sigma);
            }
        }
    }
    Ok(())
}

/// One full sweep.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &CategoricalDataset,
    config: &ModelConfig,
    keys: &[u64],
    rng: &mut R,
    stats: &mut AcceptanceStats,
) -> Result<()> {
    let m = data.modality_counts();
    step_u(state, rng);
    step_allocations(state, data, keys, rng);
    step_num_nonallocated(state, config, rng);
    step_weights(state, config, rng);
    step_params_allocated(state, data, config, rng)?;
    if config.shared_sigma {
        step_shared_sigma(state, data, config, rng, stats)?;
    }
    step_params_nonallocated(state, config, &m, rng)?;
    #[cfg(debug_assertions)]
    state.check_invariants()?;
    Ok(())
}

/// Initial scale for a variable: the prior mode of ω mapped to σ.
pub(crate) fn initial_scale(config: &ModelConfig, j: usize) -> Result<f64> {
    if config.shared_sigma {
        return Ok(match shared_sigma_mode(config) {
            SharedSigmaMode::Conjugate(h) => sigma_from_omega(omega_mean_and_mode(&h)?.1.min(1.0 - 1e-15)),
            SharedSigmaMode::Metropolis => {
                let ig = config.shared_sigma_prior;
                ig.scale / (ig.shape + 1.0)
            }
        });
    }
    let mode = omega_mean_and_mode(&config.hig_priors[j])?.1;
    Ok(sigma_from_omega(mode.clamp(1e-15, 1.0 - 1e-15)).max(SIGMA_FLOOR))
}

/// Initial state: L = round(1 + Λ) components centered at the observations
/// with the smallest keyed hash values, observations assigned to the nearest
/// center (ties to the lower index), weights at their prior mean γ and
/// u = n / T.
pub fn initial_state<R: Rng + ?Sized>(
    data: &CategoricalDataset,
    config: &ModelConfig,
    keys: &[u64],
    rng: &mut R,
) -> Result<MixtureState> {
    let n = data.n();
    let l = ((1.0 + config.lambda).round() as usize).clamp(1, n);
    let init_key = rng.next_u64();
    let mut ranked: Vec<(u64, u64, usize)> = keys
        .iter()
        .enumerate()
        .map(|(i, &k)| (splitmix64(init_key ^ splitmix64(k)), k, i))
        .collect();
    ranked.sort();
    let scale: Vec<f64> = (0..data.p())
        .map(|j| initial_scale(config, j))
        .collect::<Result<_>>()?;
    let components: Vec<HammingParams> = ranked[..l]
        .iter()
        .map(|&(_, _, i)| HammingParams {
            center: data.row(i).to_vec(),
            scale: scale.clone(),
        })
        .collect();
    let z: Vec<u32> = (0..n)
        .map(|i| {
            let x = data.row(i);
            let mut best = (u32::MAX, 0u32);
            for (c, comp) in components.iter().enumerate() {
                let d = x.iter().zip(&comp.center).filter(|(a, b)| a != b).count() as u32;
                if d < best.0 {
                    best = (d, c as u32);
                }
            }
            best.1
        })
        .collect();
    let log_weights = vec![config.gamma.ln(); l];
    let u = n as f64 / (l as f64 * config.gamma);
    MixtureState::from_parts(z, log_weights, components, u, keys)
}

/// Chain length, thinning and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub chain: u64,
    /// Keep per-cluster (center, scale) snapshots of recorded sweeps.
    pub record_clusters: bool,
}

impl RunSettings {
    pub fn new(iters: usize, burnin: usize, thin: usize, seed: u64) -> Self {
        Self {
            iters,
            burnin,
            thin,
            seed,
            chain: 0,
            record_clusters: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn recorded(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }
}

/// Random stream of a chain: ChaCha8 seeded from `seed` on stream `chain`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Scalar summary of one recorded sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k: usize,
    pub l: usize,
    pub u: f64,
    /// Mean shared scale over allocated components, when scales are shared.
    pub shared_sigma: Option<f64>,
    /// Running Metropolis acceptance rate, when scales are shared.
    pub acceptance_rate: Option<f64>,
}

/// Parameters of one allocated component at a recorded sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub size: usize,
    pub center: Vec<u32>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub settings: RunSettings,
    pub config: ModelConfig,
    pub shared_sigma_mode: Option<SharedSigmaMode>,
    pub acceptance: AcceptanceStats,
    pub seconds: f64,
}

/// Recorded output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub records: Vec<TraceRecord>,
    pub allocations: Vec<Vec<u32>>,
    pub clusters: Vec<Vec<ClusterSnapshot>>,
    pub meta: ChainMeta,
}

/// Runs one chain with datum keys 0..n.
pub fn run_chain(data: &CategoricalDataset, config: &ModelConfig, settings: RunSettings) -> Result<ChainTrace> {
    let keys: Vec<u64> = (0..data.n() as u64).collect();
    run_chain_keyed(data, config, settings, &keys)
}

/// Runs one chain with explicit datum keys.
pub fn run_chain_keyed(
    data: &CategoricalDataset,
    config: &ModelConfig,
    settings: RunSettings,
    keys: &[u64],
) -> Result<ChainTrace> {
    settings.validate()?;
    config.validate(&data.modality_counts())?;
    if keys.len() != data.n() {
        return Err(Error::invalid("one datum key per observation is required"));
    }
    let start = Instant::now();
    let mut rng = chain_rng(settings.seed, settings.chain);
    let mut state = initial_state(data, config, keys, &mut rng)?;
    let mut stats = AcceptanceStats::default();
    let capacity = settings.recorded();
    let mut records = Vec::with_capacity(capacity);
    let mut allocations = Vec::with_capacity(capacity);
    let mut clusters = Vec::new();
    for t in 1..=settings.iters {
        sweep(&mut state, data, config, keys, &mut rng, &mut stats)?;
        if t > settings.burnin && (t - settings.burnin) % settings.thin == 0 {
            let shared = config.shared_sigma.then(|| {
                state.components[..state.k].iter().map(|c| c.scale[0]).sum::<f64>() / state.k as f64
            });
            records.push(TraceRecord {
                iteration: t,
                k: state.k,
                l: state.num_components(),
                u: state.u,
                shared_sigma: shared,
                acceptance_rate: if config.shared_sigma { stats.rate() } else { None },
            });
            allocations.push(state.z.clone());
            if settings.record_clusters {
                let sizes = state.cluster_sizes();
                clusters.push(
                    (0..state.k)
                        .map(|k| ClusterSnapshot {
                            size: sizes[k],
                            center: state.components[k].center.clone(),
                            scale: state.components[k].scale.clone(),
                        })
                        .collect(),
                );
            }
        }
    }
    Ok(ChainTrace {
        records,
        allocations,
        clusters,
        meta: ChainMeta {
            settings,
            config: config.clone(),
            shared_sigma_mode: config.shared_sigma.then(|| shared_sigma_mode(config)),
            acceptance: stats,
            seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Standard error of the mean from non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(x.len().max(2));
    let size = x.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| x[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Geweke convergence z-score comparing the first 10% and the last 50% of a
/// trace, with batch-means standard errors.
pub fn geweke_z(x: &[f64]) -> f64 {
    let n = x.len();
    let a = &x[..n / 10];
    let b = &x[n / 2..];
    if a.len() < 4 || b.len() < 4 {
        return f64::NAN;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se_a = batch_means_se(a, 20.min(a.len() / 2));
    let se_b = batch_means_se(b, 20.min(b.len() / 2));
    (mean(a) - mean(b)) / (se_a * se_a + se_b * se_b).sqrt()
}
