//! Simulation study: synthetic Hamming mixtures fitted by the Gibbs sampler
//! and by K-modes at K - 1, K and K + 1 clusters.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::kmodes;
use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, RunSettings};
use crate::hamming::{sample, HammingParams};
use crate::mixture::{elicit_gamma, KStatistic, ModelConfig};
use crate::numerics::quantile;
use crate::summary::{adjusted_rand_index, point_estimate_vi, Partition};

/// One row of the design table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub p: usize,
    pub k: usize,
    pub n_k: usize,
    pub sigma: f64,
    pub modality_counts: Vec<usize>,
}

impl Scenario {
    pub fn get(id: usize) -> Result<Self> {
        let (p, k, n_k, sigma) = match id {
            1 => (15, 3, 150, 0.2),
            2 => (15, 3, 25, 0.5),
            3 => (10, 4, 75, 0.5),
            4 => (10, 4, 45, 0.7),
            _ => return Err(Error::invalid(format!("scenario id must be 1..=4, got {id}"))),
        };
        Ok(Self {
            id,
            p,
            k,
            n_k,
            sigma,
            modality_counts: (0..p).map(|j| 3 + j % 3).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.k * self.n_k
    }

    /// Default minimum pairwise Hamming distance between true centers.
    pub fn default_separation(&self) -> usize {
        self.p.div_ceil(2)
    }
}

/// Draws a dataset from the scenario with centers at least `min_separation`
/// apart. Rows are grouped by true cluster.
pub fn generate_scenario_with<R: Rng + ?Sized>(
    scenario: &Scenario,
    min_separation: usize,
    rng: &mut R,
) -> Result<(CategoricalDataset, Partition)> {
    if min_separation > scenario.p {
        return Err(Error::invalid(format!(
            "center separation {min_separation} exceeds the number of variables {}",
            scenario.p
        )));
    }
    let m = &scenario.modality_counts;
    let mut centers: Vec<Vec<u32>> = Vec::with_capacity(scenario.k);
    let mut attempts = 0usize;
    while centers.len() < scenario.k {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::Numerics("could not place separated centers".into()));
        }
        let c: Vec<u32> = m.iter().map(|&mj| rng.random_range(0..mj as u32)).collect();
        let far = centers
            .iter()
            .all(|o| o.iter().zip(&c).filter(|(a, b)| a != b).count() >= min_separation);
        if far {
            centers.push(c);
        }
    }
    let mut codes = Vec::with_capacity(scenario.n() * scenario.p);
    let mut labels = Vec::with_capacity(scenario.n());
    for (k, c) in centers.into_iter().enumerate() {
        let params = HammingParams::new(c, vec![scenario.sigma; scenario.p])?;
        for _ in 0..scenario.n_k {
            codes.extend(sample(&params, m, rng));
            labels.push(k);
        }
    }
    let data = CategoricalDataset::from_numeric_codes(scenario.n(), m, codes)?;
    Ok((data, Partition::from_labels(&labels)))
}

pub fn generate_scenario<R: Rng + ?Sized>(id: usize, rng: &mut R) -> Result<(CategoricalDataset, Partition)> {
    let s = Scenario::get(id)?;
    generate_scenario_with(&s, s.default_separation(), rng)
}

/// Settings of a study. `None` fields take scenario-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub iters: usize,
    pub burnin: usize,
    /// Defaults to the true K.
    pub lambda: Option<f64>,
    /// Defaults to the value whose prior mean of K equals the true K.
    pub gamma: Option<f64>,
    pub min_separation: Option<usize>,
    pub kmodes_restarts: usize,
    pub kmodes_max_iter: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            iters: 10_000,
            burnin: 5_000,
            lambda: None,
            gamma: None,
            min_separation: None,
            kmodes_restarts: 10,
            kmodes_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub replicate: usize,
    pub method: String,
    pub k_est: usize,
    pub ari: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Minimum, lower quartile, median, upper quartile and maximum of the ARI.
    pub ari_quartiles: [f64; 5],
    pub k_est_quartiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: Scenario,
    pub replicates: usize,
    pub seed: u64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_separation: usize,
    pub options: StudyOptions,
    pub rows: Vec<StudyRow>,
    pub summary: Vec<MethodSummary>,
}

fn five_numbers(mut x: Vec<f64>) -> [f64; 5] {
    x.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&x, q))
}

fn run_replicate(
    scenario: &Scenario,
    replicate: usize,
    seed: u64,
    config: &ModelConfig,
    options: &StudyOptions,
    separation: usize,
) -> Result<Vec<StudyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let (data, truth) = generate_scenario_with(scenario, separation, &mut rng)?;
    let chain_seed: u64 = rng.random();
    let mut rows = Vec::with_capacity(4);

    let t = Instant::now();
    let mut settings = RunSettings::new(options.iters, options.burnin, 1, chain_seed);
    settings.record_clusters = false;
    let trace = run_chain(&data, config, settings)?;
    let est = point_estimate_vi(&trace.allocations)?;
    rows.push(StudyRow {
        replicate,
        method: "hmm".into(),
        k_est: est.partition.k(),
        ari: adjusted_rand_index(&est.partition, &truth)?,
        seconds: t.elapsed().as_secs_f64(),
    });

    for k in [scenario.k - 1, scenario.k, scenario.k + 1] {
        let t = Instant::now();
        let r = kmodes(&data, k, options.kmodes_restarts, options.kmodes_max_iter, &mut rng)?;
        rows.push(StudyRow {
            replicate,
            method: format!("kmodes_k{k}"),
            k_est: r.partition.k(),
            ari: adjusted_rand_index(&r.partition, &truth)?,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Runs `replicates` independent replicates of a scenario. Replicate r uses
/// stream r of a generator seeded with `seed`.
pub fn run_study(scenario_id: usize, replicates: usize, options: &StudyOptions, seed: u64) -> Result<StudyReport> {
    if replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    let scenario = Scenario::get(scenario_id)?;
    let n = scenario.n();
    let lambda = options.lambda.unwrap_or(scenario.k as f64);
    let gamma = match options.gamma {
        Some(g) => g,
        None => elicit_gamma(n, lambda, scenario.k, KStatistic::Mean, 0.05)?,
    };
    let separation = options.min_separation.unwrap_or_else(|| scenario.default_separation());
    let config = ModelConfig::with_defaults(gamma, lambda, &scenario.modality_counts);
    config.validate(&scenario.modality_counts)?;
    RunSettings::new(options.iters, options.burnin, 1, seed).validate()?;

    let per: Vec<Vec<StudyRow>> = (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(&scenario, r, seed, &config, options, separation))
        .collect::<Result<_>>()?;
    let rows: Vec<StudyRow> = per.into_iter().flatten().collect();

    let mut methods: Vec<String> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let summary = methods
        .into_iter()
        .map(|method| {
            let sel: Vec<&StudyRow> = rows.iter().filter(|r| r.method == method).collect();
            MethodSummary {
                ari_quartiles: five_numbers(sel.iter().map(|r| r.ari).collect()),
                k_est_quartiles: five_numbers(sel.iter().map(|r| r.k_est as f64).collect()),
                method,
            }
        })
        .collect();
    Ok(StudyReport {
        scenario,
        replicates,
        seed,
        lambda,
        gamma,
        min_separation: separation,
        options: options.clone(),
        rows,
        summary,
    })
}

impl StudyReport {
    /// Tab-separated report. Header lines starting with `#` record the
    /// settings not fixed by the design table. Timings are omitted when
    /// `timings` is false so that the output is reproducible byte for byte.
    pub fn write_tsv<W: Write>(&self, mut w: W, timings: bool) -> Result<()> {
        let s = &self.scenario;
        writeln!(w, "# scenario {} p={} K={} n_k={} sigma={}", s.id, s.p, s.k, s.n_k, s.sigma)?;
        writeln!(w, "# modality counts cycle 3,4,5: {:?}", s.modality_counts)?;
        writeln!(w, "# lambda={} gamma={:.6} min_center_separation={}", self.lambda, self.gamma, self.min_separation)?;
        writeln!(
            w,
            "# iters={} burnin={} kmodes_restarts={} replicates={} seed={}",
            self.options.iters, self.options.burnin, self.options.kmodes_restarts, self.replicates, self.seed
        )?;
        writeln!(w, "replicate\tmethod\tK_est\tari\tseconds")?;
        for r in &self.rows {
            if timings {
                writeln!(w, "{}\t{}\t{}\t{:.6}\t{:.3}", r.replicate, r.method, r.k_est, r.ari, r.seconds)?;
            } else {
                writeln!(w, "{}\t{}\t{}\t{:.6}\tNA", r.replicate, r.method, r.k_est, r.ari)?;
            }
        }
        writeln!(w)?;
        writeln!(w, "method\tstatistic\tmin\tq1\tmedian\tq3\tmax")?;
        for m in &self.summary {
            for (name, q) in [("ari", &m.ari_quartiles), ("K_est", &m.k_est_quartiles)] {
                writeln!(
                    w,
                    "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    m.method, name, q[0], q[1], q[2], q[3], q[4]
                )?;
            }
        }
        Ok(())
    }
}
