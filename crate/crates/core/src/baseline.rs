//! K-modes clustering with frequency-based mode updates and multiple restarts.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::summary::Partition;

/// Outcome of one K-modes restart, or the best of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KModesResult {
    pub partition: Partition,
    /// Mode of each block of `partition`, in canonical label order.
    pub modes: Vec<Vec<u32>>,
    /// Total Hamming distance of the points to their modes.
    pub cost: u64,
    pub iterations: usize,
    pub restart_index: usize,
}

fn distance(x: &[u32], y: &[u32]) -> u64 {
    x.iter().zip(y).filter(|(a, b)| a != b).count() as u64
}

/// Nearest mode, ties to the lowest index.
fn nearest(x: &[u32], modes: &[Vec<u32>]) -> (usize, u64) {
    let mut best = (0, u64::MAX);
    for (k, mode) in modes.iter().enumerate() {
        let d = distance(x, mode);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Per-variable majority modality of the given rows, ties to the lowest code.
fn majority(data: &CategoricalDataset, rows: &[usize], m: &[usize]) -> Vec<u32> {
    (0..data.p())
        .map(|j| {
            let mut counts = vec![0usize; m[j].max(1)];
            for &i in rows {
                counts[data.row(i)[j] as usize] += 1;
            }
            let mut best = 0;
            for (c, &v) in counts.iter().enumerate() {
                if v > counts[best] {
                    best = c;
                }
            }
            best as u32
        })
        .collect()
}

fn initial_modes<R: Rng + ?Sized>(data: &CategoricalDataset, k: usize, rng: &mut R) -> Vec<Vec<u32>> {
    let n = data.n();
    let mut unique: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..n {
        if seen.insert(data.row(i)) {
            unique.push(i);
        }
    }
    // Distinct vectors when there are enough of them, otherwise distinct rows.
    let pool: Vec<usize> = if unique.len() >= k { unique } else { (0..n).collect() };
    sample_indices(rng, pool.len(), k)
        .into_iter()
        .map(|i| data.row(pool[i]).to_vec())
        .collect()
}

fn single_run<R: Rng + ?Sized>(
    data: &CategoricalDataset,
    k: usize,
    max_iter: usize,
    restart_index: usize,
    rng: &mut R,
) -> KModesResult {
    let n = data.n();
    let m = data.modality_counts();
    let mut modes = initial_modes(data, k, rng);
    let mut z = vec![usize::MAX; n];
    let mut prev_cost = u64::MAX;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut dist = vec![0u64; n];
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(data.row(i), &modes);
            if z[i] != c {
                changed = true;
                z[i] = c;
            }
            dist[i] = d;
        }
        let mut sizes = vec![0usize; k];
        for &c in &z {
            sizes[c] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n).filter(|&i| sizes[z[i]] > 1).max_by(|&a, &b| dist[a].cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| dist[i] > 0) {
                sizes[z[i]] -= 1;
                z[i] = c;
                sizes[c] = 1;
                dist[i] = 0;
                modes[c] = data.row(i).to_vec();
                changed = true;
            }
        }
        let mut members = vec![Vec::new(); k];
        for (i, &c) in z.iter().enumerate() {
            members[c].push(i);
        }
        for c in 0..k {
            if !members[c].is_empty() {
                modes[c] = majority(data, &members[c], &m);
            }
        }
        let cost: u64 = (0..n).map(|i| distance(data.row(i), &modes[z[i]])).sum();
        assert!(cost <= prev_cost, "k-modes cost increased from {prev_cost} to {cost}");
        prev_cost = cost;
        if !changed {
            break;
        }
    }
    let partition = Partition::from_labels(&z);
    let mut ordered = vec![Vec::new(); partition.k()];
    for (i, &c) in z.iter().enumerate() {
        ordered[partition.labels()[i] as usize] = modes[c].clone();
    }
    KModesResult {
        partition,
        modes: ordered,
        cost: prev_cost,
        iterations,
        restart_index,
    }
}

/// Runs every restart on its own stream seeded from `rng` and returns all
/// results in restart order.
pub fn kmodes_restarts<R: Rng + ?Sized>(
    data: &CategoricalDataset,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<Vec<KModesResult>> {
    if k == 0 || k > data.n() {
        return Err(Error::invalid(format!("k must lie in 1..={}, got {k}", data.n())));
    }
    if restarts == 0 || max_iter == 0 {
        return Err(Error::invalid("restarts and max_iter must be positive"));
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.random()).collect();
    Ok(seeds
        .par_iter()
        .enumerate()
        .map(|(r, &s)| single_run(data, k, max_iter, r, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect())
}

/// Best restart by cost, ties to the lowest restart index.
pub fn kmodes<R: Rng + ?Sized>(
    data: &CategoricalDataset,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<KModesResult> {
    let all = kmodes_restarts(data, k, restarts, max_iter, rng)?;
    Ok(all
        .into_iter()
        .min_by(|a, b| a.cost.cmp(&b.cost).then(a.restart_index.cmp(&b.restart_index)))
        .expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::adjusted_rand_index;

    fn dataset(rows: &[[u32; 4]]) -> CategoricalDataset {
        let codes: Vec<u32> = rows.iter().flatten().copied().collect();
        CategoricalDataset::from_numeric_codes(rows.len(), &[3, 3, 3, 3], codes).unwrap()
    }

    #[test]
    fn two_groups_recovered() {
        let mut rows = vec![[0, 0, 0, 0]; 5];
        rows.extend(vec![[2, 2, 1, 2]; 4]);
        let data = dataset(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = kmodes(&data, 2, 5, 50, &mut rng).unwrap();
        let truth = Partition::from_labels(&[0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(adjusted_rand_index(&r.partition, &truth).unwrap(), 1.0);
        assert_eq!(r.cost, 0);
    }

    #[test]
    fn rejects_large_k() {
        let data = dataset(&[[0, 0, 0, 0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(kmodes(&data, 2, 1, 10, &mut rng).is_err());
    }

    #[test]
    fn modes_tie_to_lowest_code() {
        let data = dataset(&[[2, 1, 0, 0], [1, 2, 0, 1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = kmodes(&data, 1, 1, 10, &mut rng).unwrap();
        assert_eq!(r.modes[0], vec![1, 1, 0, 0]);
        assert_eq!(r.cost, 3);
    }
}
