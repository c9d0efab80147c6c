//! Posterior summaries of partitions: co-clustering frequencies, the
//! variation-of-information point estimate, adjusted Rand index and
//! silhouette widths under the Hamming dissimilarity.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hamming_distance, CategoricalDataset};
use crate::error::{Error, Result};
use crate::gibbs::{initial_scale, step_params_allocated, step_shared_sigma, AcceptanceStats, MixtureState};
use crate::hamming::HammingParams;
use crate::mixture::ModelConfig;
use crate::numerics::quantile;

/// A partition of n items. Labels are 0-based in memory and renumbered by
/// first appearance, so two equal partitions have equal label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<u32>,
    k: usize,
}

impl Partition {
    /// Canonical relabeling of arbitrary labels.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut map: HashMap<&T, u32> = HashMap::new();
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let next = map.len() as u32;
            out.push(*map.entry(l).or_insert(next));
        }
        Self { k: map.len(), labels: out }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s
    }

    /// Member indices of each block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut b = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            b[l as usize].push(i);
        }
        b
    }
}

/// Symmetric n × n matrix of co-clustering frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

fn check_same_n(draws: &[Vec<u32>]) -> Result<usize> {
    let first = draws
        .first()
        .ok_or_else(|| Error::invalid("no recorded allocations"))?;
    let n = first.len();
    if draws.iter().any(|d| d.len() != n) {
        return Err(Error::invalid("recorded allocations differ in length"));
    }
    Ok(n)
}

/// Fraction of draws in which each pair of items shares a cluster.
pub fn similarity_matrix(draws: &[Vec<u32>]) -> Result<SimilarityMatrix> {
    let n = check_same_n(draws)?;
    let mut counts = vec![0u64; n * n];
    for d in draws {
        let part = Partition::from_labels(d);
        for block in part.blocks() {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a..] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let t = draws.len() as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = counts[i * n + j] as f64 / t;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(SimilarityMatrix { n, values })
}

fn xlogx(x: usize) -> f64 {
    if x == 0 {
        0.0
    } else {
        let x = x as f64;
        x * x.ln()
    }
}

/// Σ_cells c ln c of the contingency table of two canonical partitions.
fn contingency_xlogx(a: &Partition, b: &Partition, scratch: &mut Vec<usize>) -> f64 {
    let kb = b.k;
    scratch.clear();
    scratch.resize(a.k * kb, 0);
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        scratch[la as usize * kb + lb as usize] += 1;
    }
    scratch.iter().map(|&c| xlogx(c)).sum()
}

fn block_xlogx(p: &Partition) -> f64 {
    p.sizes().into_iter().map(xlogx).sum()
}

/// Variation of information with natural logarithms.
pub fn vi_distance(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!("partitions have {} and {} items", a.n(), b.n())));
    }
    let n = a.n() as f64;
    if a.n() == 0 {
        return Ok(0.0);
    }
    let mut scratch = Vec::new();
    let v = (block_xlogx(a) + block_xlogx(b) - 2.0 * contingency_xlogx(a, b, &mut scratch)) / n;
    Ok(v.max(0.0))
}

/// Distinct partitions among the draws with their multiplicities and first
/// occurrence, sorted by label vector.
struct Distinct {
    parts: Vec<Partition>,
    counts: Vec<u64>,
    first: Vec<usize>,
}

fn distinct_partitions(draws: &[Vec<u32>]) -> Distinct {
    let mut index: HashMap<Partition, usize> = HashMap::new();
    let mut parts = Vec::new();
    let mut counts = Vec::new();
    let mut first = Vec::new();
    for (t, d) in draws.iter().enumerate() {
        let p = Partition::from_labels(d);
        match index.get(&p) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(p.clone(), parts.len());
                parts.push(p);
                counts.push(1);
                first.push(t);
            }
        }
    }
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&i, &j| parts[i].labels.cmp(&parts[j].labels));
    Distinct {
        parts: order.iter().map(|&i| parts[i].clone()).collect(),
        counts: order.iter().map(|&i| counts[i]).collect(),
        first: order.iter().map(|&i| first[i]).collect(),
    }
}

/// Precomputed quantities for exact scoring of candidates.
struct Scorer<'a> {
    distinct: &'a Distinct,
    /// c ln c for c = 0..=n.
    table: Vec<f64>,
    /// Σ_l n_l ln n_l of each distinct draw.
    draw_xlogx: Vec<f64>,
    /// Draw indices by decreasing multiplicity, ties by index.
    order: Vec<usize>,
    mean_draw_xlogx: f64,
    total: f64,
}

impl<'a> Scorer<'a> {
    fn new(distinct: &'a Distinct, n: usize) -> Self {
        let table: Vec<f64> = (0..=n).map(xlogx).collect();
        let draw_xlogx: Vec<f64> = distinct.parts.iter().map(block_xlogx).collect();
        let total = distinct.counts.iter().sum::<u64>() as f64;
        let mean_draw_xlogx = draw_xlogx
            .iter()
            .zip(&distinct.counts)
            .map(|(h, &c)| c as f64 * h)
            .sum::<f64>()
            / total;
        let mut order: Vec<usize> = (0..distinct.parts.len()).collect();
        order.sort_by(|&i, &j| distinct.counts[j].cmp(&distinct.counts[i]).then(i.cmp(&j)));
        Self {
            distinct,
            table,
            draw_xlogx,
            order,
            mean_draw_xlogx,
            total,
        }
    }

    /// Posterior expected VI of `a`, or `None` once it provably exceeds
    /// `cutoff`. The contingency term of a draw never exceeds the smaller of
    /// the two block terms, which bounds the contribution of unscored draws.
    fn score(&self, a: &Partition, cutoff: f64) -> Option<f64> {
        let n = a.n() as f64;
        let ha = block_xlogx(a);
        let mut remaining: f64 = self
            .order
            .iter()
            .map(|&d| self.distinct.counts[d] as f64 * ha.min(self.draw_xlogx[d]))
            .sum();
        let mut cross = 0.0;
        let mut cells = Vec::new();
        let mut touched = Vec::new();
        for &d in &self.order {
            let b = &self.distinct.parts[d];
            let c = self.distinct.counts[d] as f64;
            let kb = b.k;
            cells.clear();
            cells.resize(a.k * kb, 0u32);
            touched.clear();
            for (&la, &lb) in a.labels.iter().zip(&b.labels) {
                let idx = la as usize * kb + lb as usize;
                if cells[idx] == 0 {
                    touched.push(idx);
                }
                cells[idx] += 1;
            }
            let x: f64 = touched.iter().map(|&i| self.table[cells[i] as usize]).sum();
            cross += c * x;
            remaining -= c * ha.min(self.draw_xlogx[d]);
            let bound = (ha + self.mean_draw_xlogx - 2.0 * (cross + remaining.max(0.0)) / self.total) / n;
            if bound > cutoff {
                return None;
            }
        }
        Some(((ha + self.mean_draw_xlogx - 2.0 * cross / self.total) / n).max(0.0))
    }
}

/// Result of [`point_estimate_vi`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VIEstimate {
    pub partition: Partition,
    pub expected_loss: f64,
    /// Index of the first draw equal to the estimate.
    pub draw_index: usize,
    pub candidates: usize,
    pub evaluated: usize,
}

/// Partition among the draws minimizing the Monte Carlo posterior expected
/// VI. Ties go to fewer clusters, then to the earliest draw.
///
/// Candidates are screened with the lower bound obtained from Jensen's
/// inequality applied to E ln |a_i ∩ b_i|, which depends on the draws only
/// through the similarity matrix; candidates are then scored exactly in
/// increasing order of the bound until the bound exceeds the best exact value.
/// Exact scoring of a candidate stops early once it cannot beat the best.
pub fn point_estimate_vi(draws: &[Vec<u32>]) -> Result<VIEstimate> {
    let n = check_same_n(draws)?;
    let distinct = distinct_partitions(draws);
    let nf = n as f64;
    let scorer = Scorer::new(&distinct, n);
    let mean_draw_xlogx = scorer.mean_draw_xlogx;
    let psm = similarity_matrix(draws)?;

    let bounds: Vec<f64> = distinct
        .parts
        .par_iter()
        .map(|a| {
            let mut s = block_xlogx(a);
            for block in a.blocks() {
                for &i in &block {
                    let row = psm.row(i);
                    let e: f64 = block.iter().map(|&j| row[j]).sum();
                    s -= 2.0 * e.ln();
                }
            }
            ((s + mean_draw_xlogx) / nf).max(0.0)
        })
        .collect();
    let mut order: Vec<usize> = (0..distinct.parts.len()).collect();
    order.sort_by(|&i, &j| bounds[i].total_cmp(&bounds[j]).then(i.cmp(&j)));

    const TIE: f64 = 1e-12;
    let mut best: Option<(f64, usize)> = None;
    let mut evaluated = 0;
    let batch = rayon::current_num_threads().max(1) * 4;
    let mut pos = 0;
    while pos < order.len() {
        let cutoff = best.map_or(f64::INFINITY, |(b, _)| b + TIE * b.abs().max(1.0));
        if bounds[order[pos]] > cutoff {
            break;
        }
        let end = (pos + batch).min(order.len());
        let scored: Vec<(usize, f64)> = order[pos..end]
            .par_iter()
            .filter_map(|&i| scorer.score(&distinct.parts[i], cutoff).map(|v| (i, v)))
            .collect();
        evaluated += end - pos;
        for (i, v) in scored {
            best = match best {
                None => Some((v, i)),
                Some((bv, bi)) => {
                    let better = if (v - bv).abs() <= TIE * bv.abs().max(1.0) {
                        let (ki, kb) = (distinct.parts[i].k, distinct.parts[bi].k);
                        ki < kb || (ki == kb && distinct.first[i] < distinct.first[bi])
                    } else {
                        v < bv
                    };
                    if better {
                        Some((v, i))
                    } else {
                        Some((bv, bi))
                    }
                }
            };
        }
        pos = end;
    }
    let (loss, idx) = best.expect("at least one candidate");
    Ok(VIEstimate {
        partition: distinct.parts[idx].clone(),
        expected_loss: loss,
        draw_index: distinct.first[idx],
        candidates: distinct.parts.len(),
        evaluated,
    })
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index under the permutation model. When both partitions
/// are trivial in the same way the index is undefined; 1 is returned for
/// equal partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!("partitions have {} and {} items", a.n(), b.n())));
    }
    let mut table: HashMap<(u32, u32), u64> = HashMap::new();
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *table.entry((x, y)).or_default() += 1;
    }
    let sum_cells: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = a.sizes().into_iter().map(|s| choose2(s as u64)).sum();
    let sum_b: f64 = b.sizes().into_iter().map(|s| choose2(s as u64)).sum();
    let total = choose2(a.n() as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((sum_cells - expected) / denom)
}

/// Silhouette widths under the Hamming dissimilarity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Silhouette {
    pub widths: Vec<f64>,
    pub cluster_means: Vec<f64>,
    pub overall: f64,
}

/// Classical silhouette with Hamming distances. Members of singleton
/// clusters get width 0, as do points with a(i) = b(i) = 0.
pub fn silhouette_hamming(data: &CategoricalDataset, partition: &Partition) -> Result<Silhouette> {
    if partition.n() != data.n() {
        return Err(Error::invalid("partition and dataset differ in size"));
    }
    let k = partition.k();
    if k < 2 {
        return Err(Error::invalid("silhouette requires at least two clusters"));
    }
    let sizes = partition.sizes();
    let labels = partition.labels();
    let widths: Vec<f64> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let own = labels[i] as usize;
            if sizes[own] == 1 {
                return Ok(0.0);
            }
            let mut sums = vec![0.0; k];
            let xi = data.row(i);
            for j in 0..data.n() {
                if j != i {
                    sums[labels[j] as usize] += hamming_distance(xi, data.row(j))? as f64;
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            Ok(if denom == 0.0 { 0.0 } else { (b - a) / denom })
        })
        .collect::<Result<_>>()?;
    let mut cluster_means = vec![0.0; k];
    for (i, &w) in widths.iter().enumerate() {
        cluster_means[labels[i] as usize] += w;
    }
    for (m, &s) in cluster_means.iter_mut().zip(&sizes) {
        *m /= s as f64;
    }
    let overall = widths.iter().sum::<f64>() / widths.len() as f64;
    Ok(Silhouette {
        widths,
        cluster_means,
        overall,
    })
}

/// Per-cluster parameter summary given a fixed partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParamSummary {
    pub size: usize,
    /// Most frequent center code of each variable, ties to the lowest code.
    pub center: Vec<u32>,
    pub sigma_median: Vec<f64>,
}

/// Draws centers and scales from their full conditionals `extra_iters` times
/// with the allocation frozen at `partition`, and summarizes the draws.
pub fn conditional_param_summary<R: rand::Rng + ?Sized>(
    data: &CategoricalDataset,
    partition: &Partition,
    config: &ModelConfig,
    extra_iters: usize,
    rng: &mut R,
) -> Result<Vec<ClusterParamSummary>> {
    if partition.n() != data.n() {
        return Err(Error::invalid("partition and data differ in size"));
    }
    if extra_iters == 0 {
        return Err(Error::invalid("at least one draw is required"));
    }
    let m = data.modality_counts();
    config.validate(&m)?;
    let p = data.p();
    let k = partition.k();
    let scale: Vec<f64> = (0..p).map(|j| initial_scale(config, j)).collect::<Result<_>>()?;
    let components = partition
        .blocks()
        .iter()
        .map(|b| HammingParams {
            center: b.first().map(|&i| data.row(i).to_vec()).unwrap_or_else(|| vec![0; p]),
            scale: scale.clone(),
        })
        .collect();
    let keys: Vec<u64> = (0..data.n() as u64).collect();
    let mut state = MixtureState::from_parts(partition.labels().to_vec(), vec![0.0; k], components, 1.0, &keys)?;
    let mut stats = AcceptanceStats::default();
    let mut center_counts: Vec<Vec<Vec<u64>>> = (0..k).map(|_| m.iter().map(|&mj| vec![0; mj.max(1)]).collect()).collect();
    let mut sigmas: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(extra_iters); p]; k];
    for _ in 0..extra_iters {
        step_params_allocated(&mut state, data, config, rng)?;
        if config.shared_sigma {
            step_shared_sigma(&mut state, data, config, rng, &mut stats)?;
        }
        for (c, comp) in state.components.iter().enumerate() {
            for j in 0..p {
                center_counts[c][j][comp.center[j] as usize] += 1;
                sigmas[c][j].push(comp.scale[j]);
            }
        }
    }
    let sizes = partition.sizes();
    Ok((0..k)
        .map(|c| ClusterParamSummary {
            size: sizes[c],
            center: center_counts[c]
                .iter()
                .map(|counts| {
                    let mut best = 0;
                    for (code, &v) in counts.iter().enumerate() {
                        if v > counts[best] {
                            best = code;
                        }
                    }
                    best as u32
                })
                .collect(),
            sigma_median: sigmas[c]
                .iter_mut()
                .map(|x| {
                    x.sort_by(f64::total_cmp);
                    quantile(x, 0.5)
                })
                .collect(),
        })
        .collect())
}
