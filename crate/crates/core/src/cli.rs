//! Command-line front end: argument parsing, run configuration and the run
//! directory layout.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::kmodes_restarts;
use crate::data::{load_label_column, load_path, CategoricalDataset, LoadOptions};
use crate::error::{Error, Result};
use crate::gibbs::{batch_means_se, chain_rng, geweke_z, run_chain, ChainMeta, RunSettings, TraceRecord};
use crate::hamming::{gini_normalized, shannon_normalized};
use crate::hig::HIGParams;
use crate::mixture::{
    elicit_gamma, prior_k_pmf, InverseGammaPrior, KStatistic, ModelConfig, SharedSigmaScope,
};
use crate::simharness::{run_study, StudyOptions};
use crate::summary::{
    adjusted_rand_index, conditional_param_summary, point_estimate_vi, silhouette_hamming, similarity_matrix,
    Partition,
};

#[derive(Debug, Parser)]
#[command(name = "hammix", version, about = "Bayesian clustering of categorical data with Hamming mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Gibbs sampler and write a run directory.
    Fit(FitArgs),
    /// Recompute summaries of an existing run directory.
    Summarize(SummarizeArgs),
    /// Find γ so that the prior on K has a given mean or mode.
    Elicit(ElicitArgs),
    /// Print the prior distribution of K.
    PriorK(PriorKArgs),
    /// Run the simulation study for one scenario.
    Simulate(SimulateArgs),
    /// Run K-modes with restarts.
    Baseline(BaselineArgs),
    /// Convergence diagnostics of an existing run directory.
    Diag(DiagArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset (delimited text, one row per observation).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference labels used to report the adjusted Rand index.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Column of the truth file holding the labels (default: last column).
    #[arg(long)]
    pub truth_column: Option<String>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// The dataset has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Share one scale across the variables of each component.
    #[arg(long)]
    pub shared_sigma: bool,
    /// component or global.
    #[arg(long)]
    pub shared_sigma_scope: Option<SharedSigmaScope>,
    #[arg(long)]
    pub ig_shape: Option<f64>,
    #[arg(long)]
    pub ig_scale: Option<f64>,
    #[arg(long)]
    pub mh_sd: Option<f64>,
    /// Per-variable HIG hyperparameters as NAME=V,W (repeatable).
    #[arg(long = "hig", value_name = "NAME=V,W")]
    pub hig: Vec<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Sweeps used for the cluster parameter summaries.
    #[arg(long)]
    pub extra_iters: Option<usize>,
    /// Output run directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    pub run_dir: PathBuf,
    /// Number of batches for the batch-means standard error.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
}

#[derive(Debug, Args)]
pub struct ElicitArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub lambda: f64,
    /// Target number of clusters.
    #[arg(long)]
    pub k: usize,
    /// mean or mode.
    #[arg(long, default_value = "mean")]
    pub statistic: KStatistic,
    /// Accepted distance between the prior mean and the target.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct PriorKArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Omit rows with probability below this value.
    #[arg(long, default_value_t = 1e-12)]
    pub min_prob: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: usize,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    /// Default: the true number of clusters.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Default: matched to the true number of clusters.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Minimum Hamming distance between true centers (default ⌈p/2⌉).
    #[arg(long)]
    pub separation: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub kmodes_restarts: usize,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Replace timings by NA so that reports are reproducible.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub truth_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub no_header: bool,
    /// Write the best partition (index,label) here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// `[data]` table of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub header: bool,
    pub truth: Option<PathBuf>,
    pub truth_column: Option<String>,
}

/// Hyperparameters for one variable, addressed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HigOverride {
    pub variable: String,
    pub v: f64,
    pub w: f64,
}

/// `[model]` table of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub lambda: f64,
    #[serde(default)]
    pub shared_sigma: bool,
    #[serde(default)]
    pub shared_sigma_scope: SharedSigmaScope,
    #[serde(default = "default_ig_shape")]
    pub ig_shape: f64,
    #[serde(default = "default_ig_scale")]
    pub ig_scale: f64,
    #[serde(default = "default_mh_sd")]
    pub mh_proposal_sd: f64,
    #[serde(default)]
    pub hig: Vec<HigOverride>,
}

/// `[mcmc]` table of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub iters: usize,
    pub burnin: usize,
    #[serde(default = "default_one")]
    pub thin: usize,
    #[serde(default = "default_one_u64")]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub chains: usize,
    #[serde(default = "default_extra_iters")]
    pub extra_iters: usize,
}

/// Complete configuration of a fit, persisted as `config.toml` in the run
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: Option<PathBuf>,
    pub data: DataSection,
    pub model: ModelSection,
    pub mcmc: McmcSection,
}

fn default_delimiter() -> char {
    ','
}
fn default_true() -> bool {
    true
}
fn default_ig_shape() -> f64 {
    InverseGammaPrior::default().shape
}
fn default_ig_scale() -> f64 {
    InverseGammaPrior::default().scale
}
fn default_mh_sd() -> f64 {
    0.1
}
fn default_one() -> usize {
    1
}
fn default_one_u64() -> u64 {
    1
}
fn default_extra_iters() -> usize {
    1000
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: None,
            data: DataSection {
                path: None,
                delimiter: default_delimiter(),
                header: true,
                truth: None,
                truth_column: None,
            },
            model: ModelSection {
                gamma: 1.0,
                lambda: 1.0,
                shared_sigma: false,
                shared_sigma_scope: SharedSigmaScope::Component,
                ig_shape: default_ig_shape(),
                ig_scale: default_ig_scale(),
                mh_proposal_sd: default_mh_sd(),
                hig: Vec::new(),
            },
            mcmc: McmcSection {
                iters: 25_000,
                burnin: 5_000,
                thin: 1,
                seed: 1,
                chains: 1,
                extra_iters: default_extra_iters(),
            },
        }
    }
}

fn parse_hig_flag(s: &str) -> Result<HigOverride> {
    let bad = || Error::Config(format!("expected NAME=V,W for --hig, got '{s}'"));
    let (name, vals) = s.split_once('=').ok_or_else(bad)?;
    let (v, w) = vals.split_once(',').ok_or_else(bad)?;
    Ok(HigOverride {
        variable: name.trim().to_string(),
        v: v.trim().parse().map_err(|_| bad())?,
        w: w.trim().parse().map_err(|_| bad())?,
    })
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, a: &FitArgs) -> Result<()> {
        if let Some(p) = &a.data {
            self.data.path = Some(p.clone());
        }
        if let Some(p) = &a.truth {
            self.data.truth = Some(p.clone());
        }
        if let Some(c) = &a.truth_column {
            self.data.truth_column = Some(c.clone());
        }
        if let Some(d) = a.delimiter {
            self.data.delimiter = d;
        }
        if a.no_header {
            self.data.header = false;
        }
        let m = &mut self.model;
        if let Some(g) = a.gamma {
            m.gamma = g;
        }
        if let Some(l) = a.lambda {
            m.lambda = l;
        }
        if a.shared_sigma {
            m.shared_sigma = true;
        }
        if let Some(s) = a.shared_sigma_scope {
            m.shared_sigma_scope = s;
        }
        if let Some(x) = a.ig_shape {
            m.ig_shape = x;
        }
        if let Some(x) = a.ig_scale {
            m.ig_scale = x;
        }
        if let Some(x) = a.mh_sd {
            m.mh_proposal_sd = x;
        }
        for h in &a.hig {
            let o = parse_hig_flag(h)?;
            m.hig.retain(|x| x.variable != o.variable);
            m.hig.push(o);
        }
        let c = &mut self.mcmc;
        if let Some(x) = a.iters {
            c.iters = x;
        }
        if let Some(x) = a.burnin {
            c.burnin = x;
        }
        if let Some(x) = a.thin {
            c.thin = x;
        }
        if let Some(x) = a.seed {
            c.seed = x;
        }
        if let Some(x) = a.chains {
            c.chains = x;
        }
        if let Some(x) = a.extra_iters {
            c.extra_iters = x;
        }
        if let Some(o) = &a.output {
            self.output = Some(o.clone());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.path.is_none() {
            return Err(Error::Config("no dataset given (use --data or [data] path)".into()));
        }
        if self.output.is_none() {
            return Err(Error::Config("no output directory given (use --output or output)".into()));
        }
        if self.mcmc.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if self.mcmc.extra_iters == 0 {
            return Err(Error::Config("extra_iters must be at least 1".into()));
        }
        self.settings(0).validate()
    }

    pub fn load_options(&self) -> Result<LoadOptions> {
        let d = self.data.delimiter;
        if !d.is_ascii() {
            return Err(Error::Config(format!("delimiter must be an ASCII character, got '{d}'")));
        }
        Ok(LoadOptions {
            delimiter: d as u8,
            has_header: self.data.header,
        })
    }

    pub fn settings(&self, chain: usize) -> RunSettings {
        let mut s = RunSettings::new(self.mcmc.iters, self.mcmc.burnin, self.mcmc.thin, self.mcmc.seed);
        s.chain = chain as u64;
        s.record_clusters = false;
        s
    }

    /// Model configuration for a dataset: HIG defaults by modality count,
    /// then the per-variable overrides.
    pub fn model_config(&self, data: &CategoricalDataset) -> Result<ModelConfig> {
        let m = data.modality_counts();
        let mut priors = HIGParams::defaults_for(&m);
        for o in &self.model.hig {
            let j = data
                .variable_names()
                .iter()
                .position(|n| *n == o.variable)
                .or_else(|| o.variable.parse::<usize>().ok().filter(|&j| j < m.len()))
                .ok_or_else(|| Error::Config(format!("unknown variable '{}' in HIG override", o.variable)))?;
            priors[j] = HIGParams::new(o.v, o.w, m[j])?;
        }
        let mut config = ModelConfig::new(self.model.gamma, self.model.lambda, priors);
        config.shared_sigma = self.model.shared_sigma;
        config.shared_sigma_scope = self.model.shared_sigma_scope;
        config.shared_sigma_prior = InverseGammaPrior {
            shape: self.model.ig_shape,
            scale: self.model.ig_scale,
        };
        config.mh_proposal_sd = self.model.mh_proposal_sd;
        config.validate(&m)?;
        Ok(config)
    }
}

/// Per-cluster entry of `clusters.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub label: usize,
    pub size: usize,
    pub center: Vec<String>,
    pub sigma_median: Vec<f64>,
    pub gini: Option<f64>,
    pub shannon: Option<f64>,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub recorded: usize,
    pub mean_k: f64,
    pub acceptance_rate: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub p: usize,
    pub k_hat: usize,
    pub cluster_sizes: Vec<usize>,
    pub expected_vi: f64,
    pub distinct_partitions: usize,
    /// Posterior frequency of each K over all chains, as (K, frequency).
    pub posterior_k: Vec<(usize, f64)>,
    pub ari: Option<f64>,
    pub silhouette: Option<f64>,
    pub chains: Vec<ChainSummary>,
}

fn chain_dir(run: &Path, c: usize) -> PathBuf {
    run.join(format!("chain_{c}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_trace(dir: &Path, records: &[TraceRecord], allocations: &[Vec<u32>], meta: &ChainMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut w = create(&dir.join("trace_scalar.csv"))?;
    writeln!(w, "iteration,K,L,u,shared_sigma,acceptance_rate")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.iteration,
            r.k,
            r.l,
            r.u,
            opt(r.shared_sigma),
            opt(r.acceptance_rate)
        )?;
    }
    w.flush()?;
    let mut w = create(&dir.join("allocations.csv"))?;
    for a in allocations {
        let line: Vec<String> = a.iter().map(|l| (l + 1).to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

fn read_allocations(path: &Path) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|x| {
                x.trim().parse::<u32>().ok().filter(|&v| v >= 1).map(|v| v - 1).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("bad label '{x}'"),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn read_trace_k(path: &Path) -> Result<Vec<(f64, Option<f64>)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |j: usize| rec.get(j).and_then(|s| s.parse::<f64>().ok());
        let k = parse(1).ok_or_else(|| Error::Parse {
            line: rec.position().map(|p| p.line() as usize).unwrap_or(0),
            message: "missing K".into(),
        })?;
        out.push((k, parse(4)));
    }
    Ok(out)
}

fn load_truth(path: &Path, column: Option<&str>, n: usize) -> Result<Partition> {
    let labels = load_label_column(File::open(path)?, &LoadOptions::default(), column)?;
    if labels.len() != n {
        return Err(Error::invalid(format!("truth has {} labels but the data have {n} rows", labels.len())));
    }
    Ok(Partition::from_labels(&labels))
}

/// Runs all chains of a configuration and writes the run directory.
pub fn cmd_fit(config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let run = config.output.clone().expect("validated");
    let data_path = config.data.path.clone().expect("validated");
    let data = load_path(&data_path, &config.load_options()?)?;
    let model = config.model_config(&data)?;
    fs::create_dir_all(&run)?;
    fs::copy(&data_path, run.join("data.csv"))?;
    let mut echo = config.clone();
    echo.data.path = Some(PathBuf::from("data.csv"));
    if let Some(t) = &config.data.truth {
        fs::copy(t, run.join("truth.csv"))?;
        echo.data.truth = Some(PathBuf::from("truth.csv"));
    }
    echo.output = None;
    fs::write(run.join("config.toml"), echo.to_toml_string()?)?;
    info!("running {} chain(s) of {} sweeps on n={} p={}", config.mcmc.chains, config.mcmc.iters, data.n(), data.p());
    (0..config.mcmc.chains)
        .into_par_iter()
        .map(|c| {
            let trace = run_chain(&data, &model, config.settings(c))?;
            info!("chain {c} finished in {:.1}s", trace.meta.seconds);
            write_trace(&chain_dir(&run, c), &trace.records, &trace.allocations, &trace.meta)
        })
        .collect::<Result<Vec<()>>>()?;
    summarize_run(&run)?;
    Ok(run)
}

/// Reads the persisted configuration of a run directory. Relative data paths
/// are resolved against the directory.
pub fn load_run_config(run: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::load(&run.join("config.toml"))?;
    for p in [&mut config.data.path, &mut config.data.truth].into_iter().flatten() {
        if p.is_relative() {
            *p = run.join(&*p);
        }
    }
    config.output = Some(run.to_path_buf());
    Ok(config)
}

/// Recomputes `psm.csv`, `partition.csv`, `clusters.json` and
/// `summary.json` from the persisted traces.
pub fn summarize_run(run: &Path) -> Result<RunSummary> {
    let config = load_run_config(run)?;
    let data = load_path(config.data.path.as_ref().expect("persisted"), &config.load_options()?)?;
    let model = config.model_config(&data)?;
    let mut draws = Vec::new();
    let mut chains = Vec::new();
    for c in 0..config.mcmc.chains {
        let dir = chain_dir(run, c);
        let alloc = read_allocations(&dir.join("allocations.csv"))?;
        let trace = read_trace_k(&dir.join("trace_scalar.csv"))?;
        let meta: ChainMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        chains.push(ChainSummary {
            chain: c,
            recorded: alloc.len(),
            mean_k: trace.iter().map(|x| x.0).sum::<f64>() / trace.len().max(1) as f64,
            acceptance_rate: meta.acceptance.rate(),
        });
        draws.extend(alloc);
    }
    let psm = similarity_matrix(&draws)?;
    let mut w = create(&run.join("psm.csv"))?;
    for i in 0..psm.n() {
        let row: Vec<String> = psm.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;

    let est = point_estimate_vi(&draws)?;
    let part = &est.partition;
    let mut w = create(&run.join("partition.csv"))?;
    writeln!(w, "index,label")?;
    for (i, l) in part.labels().iter().enumerate() {
        writeln!(w, "{},{}", i + 1, l + 1)?;
    }
    w.flush()?;

    let mut rng = chain_rng(config.mcmc.seed, config.mcmc.chains as u64);
    let params = conditional_param_summary(&data, part, &model, config.mcmc.extra_iters, &mut rng)?;
    let sil = if part.k() >= 2 {
        Some(silhouette_hamming(&data, part)?)
    } else {
        None
    };
    let m = data.modality_counts();
    let clusters: Vec<ClusterReport> = params
        .iter()
        .enumerate()
        .map(|(k, c)| ClusterReport {
            label: k + 1,
            size: c.size,
            center: data.decode_vector(&c.center),
            sigma_median: c.sigma_median.clone(),
            gini: gini_normalized(&c.sigma_median, &m).ok(),
            shannon: shannon_normalized(&c.sigma_median, &m).ok(),
            silhouette: sil.as_ref().map(|s| s.cluster_means[k]),
        })
        .collect();
    fs::write(run.join("clusters.json"), serde_json::to_string_pretty(&clusters)?)?;

    let mut k_counts = std::collections::BTreeMap::new();
    for d in &draws {
        *k_counts.entry(Partition::from_labels(d).k()).or_insert(0usize) += 1;
    }
    let total = draws.len() as f64;
    let ari = match &config.data.truth {
        Some(t) => Some(adjusted_rand_index(part, &load_truth(t, config.data.truth_column.as_deref(), data.n())?)?),
        None => None,
    };
    let summary = RunSummary {
        n: data.n(),
        p: data.p(),
        k_hat: part.k(),
        cluster_sizes: part.sizes(),
        expected_vi: est.expected_loss,
        distinct_partitions: est.candidates,
        posterior_k: k_counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect(),
        ari,
        silhouette: sil.map(|s| s.overall),
        chains,
    };
    fs::write(run.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Per-chain diagnostics of the K trace (and the shared scale when present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub series: String,
    pub mean: f64,
    pub batch_se: f64,
    pub geweke_z: f64,
}

pub fn diagnostics(run: &Path, batches: usize) -> Result<Vec<ChainDiagnostics>> {
    let config = load_run_config(run)?;
    let mut out = Vec::new();
    for c in 0..config.mcmc.chains {
        let trace = read_trace_k(&chain_dir(run, c).join("trace_scalar.csv"))?;
        let k: Vec<f64> = trace.iter().map(|x| x.0).collect();
        let mut series = vec![("K", k)];
        let s: Vec<f64> = trace.iter().filter_map(|x| x.1).collect();
        if s.len() == trace.len() && !s.is_empty() {
            series.push(("shared_sigma", s));
        }
        for (name, x) in series {
            out.push(ChainDiagnostics {
                chain: c,
                series: name.into(),
                mean: x.iter().sum::<f64>() / x.len().max(1) as f64,
                batch_se: batch_means_se(&x, batches),
                geweke_z: geweke_z(&x),
            });
        }
    }
    Ok(out)
}

fn load_data_flags(path: &Path, delimiter: char, no_header: bool) -> Result<CategoricalDataset> {
    if !delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter must be an ASCII character, got '{delimiter}'")));
    }
    load_path(
        path,
        &LoadOptions {
            delimiter: delimiter as u8,
            has_header: !no_header,
        },
    )
}

/// Executes a parsed command, writing human-readable output to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let mut config = match &a.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            config.apply(&a)?;
            let run = cmd_fit(&config)?;
            let s: RunSummary = serde_json::from_str(&fs::read_to_string(run.join("summary.json"))?)?;
            writeln!(out, "run directory: {}", run.display())?;
            write_summary(out, &s)?;
        }
        Command::Summarize(a) => {
            let s = summarize_run(&a.run_dir)?;
            write_summary(out, &s)?;
        }
        Command::Diag(a) => {
            writeln!(out, "chain\tseries\tmean\tbatch_se\tgeweke_z")?;
            for d in diagnostics(&a.run_dir, a.batches)? {
                writeln!(out, "{}\t{}\t{:.6}\t{:.6}\t{:.3}", d.chain, d.series, d.mean, d.batch_se, d.geweke_z)?;
            }
        }
        Command::Elicit(a) => {
            let g = elicit_gamma(a.n, a.lambda, a.k, a.statistic, a.tol)?;
            let prior = prior_k_pmf(a.n, g, a.lambda)?;
            writeln!(out, "gamma\t{g:.6}")?;
            writeln!(out, "prior_mean_k\t{:.4}", prior.mean())?;
            writeln!(out, "prior_mode_k\t{}", prior.mode())?;
        }
        Command::PriorK(a) => {
            let prior = prior_k_pmf(a.n, a.gamma, a.lambda)?;
            writeln!(out, "K\tprob\tcumulative")?;
            let mut cum = 0.0;
            for (k, &p) in prior.pmf.iter().enumerate() {
                cum += p;
                if p >= a.min_prob {
                    writeln!(out, "{}\t{:.6e}\t{:.6}", k + 1, p, cum)?;
                }
            }
            writeln!(out, "# mean {:.4} mode {}", prior.mean(), prior.mode())?;
        }
        Command::Simulate(a) => {
            let options = StudyOptions {
                iters: a.iters,
                burnin: a.burnin,
                lambda: a.lambda,
                gamma: a.gamma,
                min_separation: a.separation,
                kmodes_restarts: a.kmodes_restarts,
                ..StudyOptions::default()
            };
            let report = run_study(a.scenario, a.replicates, &options, a.seed)?;
            match &a.output {
                Some(p) => {
                    let mut w = create(p)?;
                    report.write_tsv(&mut w, !a.no_timings)?;
                    w.flush()?;
                }
                None => report.write_tsv(&mut *out, !a.no_timings)?,
            }
        }
        Command::Baseline(a) => {
            let data = load_data_flags(&a.data, a.delimiter, a.no_header)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let all = kmodes_restarts(&data, a.k, a.restarts, a.max_iter, &mut rng)?;
            let best = all
                .iter()
                .min_by(|x, y| x.cost.cmp(&y.cost).then(x.restart_index.cmp(&y.restart_index)))
                .expect("at least one restart");
            writeln!(out, "best_restart\t{}", best.restart_index)?;
            writeln!(out, "cost\t{}", best.cost)?;
            writeln!(out, "clusters\t{}", best.partition.k())?;
            if let Some(t) = &a.truth {
                let truth = load_truth(t, a.truth_column.as_deref(), data.n())?;
                let aris = all
                    .iter()
                    .map(|r| adjusted_rand_index(&r.partition, &truth))
                    .collect::<Result<Vec<f64>>>()?;
                writeln!(out, "ari_best\t{:.4}", adjusted_rand_index(&best.partition, &truth)?)?;
                writeln!(out, "ari_mean\t{:.4}", aris.iter().sum::<f64>() / aris.len() as f64)?;
            }
            if let Some(p) = &a.output {
                let mut w = create(p)?;
                writeln!(w, "index,label")?;
                for (i, l) in best.partition.labels().iter().enumerate() {
                    writeln!(w, "{},{}", i + 1, l + 1)?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn write_summary<W: Write>(out: &mut W, s: &RunSummary) -> Result<()> {
    writeln!(out, "K_hat\t{}", s.k_hat)?;
    writeln!(out, "sizes\t{:?}", s.cluster_sizes)?;
    writeln!(out, "expected_vi\t{:.6}", s.expected_vi)?;
    if let Some(a) = s.ari {
        writeln!(out, "ari\t{a:.4}")?;
    }
    if let Some(x) = s.silhouette {
        writeln!(out, "silhouette\t{x:.4}")?;
    }
    Ok(())
}

/// Process exit status for a result: 0 success, 2 usage or validation
/// errors, 1 numerical or sampling failures.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_usage() => 2,
        Err(_) => 1,
    }
}
