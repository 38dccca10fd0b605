//! Seeded experiment driver: fixture generation, training, testing and
//! baseline comparison, with CSV and plot emission.

mod config;
mod plot;
mod sim;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{nrm_vne_embed, rcr_vne_embed};
use crate::embedder::{embed_vnr, Embedding, PolicySelector};
use crate::features::FeatureExtractor;
use crate::metrics::{CsvError, MetricsSample, MetricsTimeSeries};
use crate::policy::{compute_reward, reinforce_update, EpisodeTrace, PolicyError, PolicyParams};
use crate::substrate::{generate_substrate, FormatError, GenerateError, LedgerError, SubstrateNetwork};
use crate::vnr::{generate_vnr_set, rebase_arrivals, Vnr, VnrError};

pub use config::{DomainWeighting, SimulationConfig};
pub use plot::emit_plots;
pub use sim::{simulate, SimulationOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Vnr(#[from] VnrError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("plot: {0}")]
    Plot(String),
    #[error("replay check: {0}")]
    Replay(String),
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Substrate = 0,
    Requests = 1,
    PolicyInit = 2,
    Sampling = 3,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Drl,
    Nrm,
    Rcr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Drl, Algorithm::Nrm, Algorithm::Rcr];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Drl => "drl",
            Algorithm::Nrm => "nrm",
            Algorithm::Rcr => "rcr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drl" => Ok(Algorithm::Drl),
            "nrm" => Ok(Algorithm::Nrm),
            "rcr" => Ok(Algorithm::Rcr),
            other => Err(HarnessError::Config(format!(
                "unknown algorithm `{other}` (expected drl, nrm or rcr)"
            ))),
        }
    }
}

/// A substrate with its training and test request sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub substrate: SubstrateNetwork,
    pub train: Vec<Vnr>,
    /// Arrival times rebased to start from the end of the training set.
    pub test: Vec<Vnr>,
}

impl Fixtures {
    /// Generates the substrate and `cfg.vnr.count` requests from `cfg.seed`.
    /// The training set is drawn under `train_delay_cap` and the test set
    /// under `test_delay_cap`; both come from the same random stream, so
    /// every cap yields the same requests with rescaled delay bounds.
    pub fn generate(cfg: &SimulationConfig, test_delay_cap: f64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let substrate = generate_substrate(&cfg.substrate, &mut stream_rng(cfg.seed, Stream::Substrate))?;
        let draw = |cap: f64| {
            generate_vnr_set(&cfg.vnr_config(cap), &mut stream_rng(cfg.seed, Stream::Requests))
        };
        let train_all = draw(cfg.train_delay_cap)?;
        let test_all = draw(test_delay_cap)?;
        Ok(Self::split(substrate, &train_all, &test_all, cfg.train_count, cfg.period))
    }

    /// Splits one request sequence at `train_count`. Requests arriving
    /// after `period` (relative to the start of their set) are dropped.
    pub fn split(
        substrate: SubstrateNetwork,
        train_all: &[Vnr],
        test_all: &[Vnr],
        train_count: usize,
        period: f64,
    ) -> Self {
        let cut = train_count.min(train_all.len()).min(test_all.len());
        let origin = if cut == 0 { 0.0 } else { test_all[cut - 1].arrival_time };
        let within = |v: &Vnr| v.arrival_time <= period;
        Self {
            substrate,
            train: train_all[..cut].iter().filter(|v| within(v)).cloned().collect(),
            test: rebase_arrivals(&test_all[cut..], origin)
                .into_iter()
                .filter(within)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub avg_revenue: f64,
    pub acceptance: f64,
    pub rc_ratio: f64,
}

pub const TRAINING_CSV_HEADER: &str = "epoch,avg_revenue,acceptance,rc_ratio";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingCurves {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainingCurves {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRAINING_CSV_HEADER}\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.avg_revenue, e.acceptance, e.rc_ratio);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, h)| h.trim()) != Some(TRAINING_CSV_HEADER) {
            return Err(CsvError {
                line: 1,
                message: "unexpected header".to_string(),
            });
        }
        let mut epochs = Vec::new();
        for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let err = |message: String| CsvError { line: i + 1, message };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let num = |k: usize| -> Result<f64, CsvError> {
                cols[k].parse().map_err(|_| err(format!("bad number `{}`", cols[k])))
            };
            epochs.push(EpochMetrics {
                epoch: cols[0].parse().map_err(|_| err(format!("bad epoch `{}`", cols[0])))?,
                avg_revenue: num(1)?,
                acceptance: num(2)?,
                rc_ratio: num(3)?,
            });
        }
        Ok(Self { epochs })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub params: PolicyParams,
    pub curves: TrainingCurves,
    /// Wall-clock seconds per epoch; not part of any emitted CSV.
    pub epoch_seconds: Vec<f64>,
}

fn epoch_metrics(epoch: usize, series: &MetricsTimeSeries) -> EpochMetrics {
    let last = series.last().copied().unwrap_or(MetricsSample {
        time: 0.0,
        cumulative_revenue: 0,
        cumulative_cost: 0,
        arrived: 0,
        accepted: 0,
    });
    EpochMetrics {
        epoch,
        avg_revenue: last.average_revenue(),
        acceptance: last.acceptance_rate(),
        rc_ratio: last.revenue_cost_ratio(),
    }
}

/// Trains from randomly initialized parameters drawn from `cfg.seed`.
pub fn train(cfg: &SimulationConfig, fixtures: &Fixtures) -> Result<TrainingOutcome, HarnessError> {
    let initial = PolicyParams::random(&mut stream_rng(cfg.seed, Stream::PolicyInit), cfg.learning_rate);
    train_from(cfg, fixtures, initial)
}

/// Each epoch replays the training set on a fresh copy of the substrate,
/// sampling placements from the policy. Every `batch_size` requests the
/// parameters take one REINFORCE step; a trailing partial batch is flushed
/// at the end of the epoch.
pub fn train_from(
    cfg: &SimulationConfig,
    fixtures: &Fixtures,
    initial: PolicyParams,
) -> Result<TrainingOutcome, HarnessError> {
    let extractor = FeatureExtractor::new(&fixtures.substrate);
    let mut rng = stream_rng(cfg.seed, Stream::Sampling);
    let mut params = initial;
    let mut curves = TrainingCurves::default();
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut net = fixtures.substrate.pristine();
        let mut batch: Vec<EpisodeTrace> = Vec::with_capacity(cfg.batch_size);
        let mut failure: Option<PolicyError> = None;
        let outcome = simulate(&mut net, &fixtures.train, cfg.sample_interval, |net, vnr| {
            let mut decisions = Vec::new();
            let result = {
                let mut selector = PolicySelector::sampling(&params, &extractor, &mut rng, &mut decisions);
                embed_vnr(net, vnr, &mut selector)
            };
            let reward = match &result {
                Ok(emb) => compute_reward(emb.revenue as f64, emb.cost as f64),
                Err(_) => 0.0,
            };
            batch.push(EpisodeTrace { decisions, reward });
            if batch.len() == cfg.batch_size && failure.is_none() {
                match reinforce_update(&params, &batch) {
                    Ok(next) => params = next,
                    Err(e) => failure = Some(e),
                }
                batch.clear();
            }
            result.ok()
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        if !batch.is_empty() {
            params = reinforce_update(&params, &batch)?;
        }
        curves.epochs.push(epoch_metrics(epoch, &outcome.series));
        epoch_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(TrainingOutcome {
        params,
        curves,
        epoch_seconds,
    })
}

/// Embeds one request with `algorithm`; the policy runs greedily.
pub fn embed_one(
    algorithm: Algorithm,
    net: &mut SubstrateNetwork,
    vnr: &Vnr,
    params: &PolicyParams,
    extractor: &FeatureExtractor,
) -> Option<Embedding> {
    match algorithm {
        Algorithm::Drl => embed_vnr(net, vnr, &mut PolicySelector::greedy(params, extractor)).ok(),
        Algorithm::Nrm => nrm_vne_embed(net, vnr).ok(),
        Algorithm::Rcr => rcr_vne_embed(net, vnr).ok(),
    }
}

/// Replays the test set on a fresh copy of the substrate. `params` is only
/// consulted by the learned embedder.
pub fn run_test(
    cfg: &SimulationConfig,
    fixtures: &Fixtures,
    algorithm: Algorithm,
    params: &PolicyParams,
) -> Result<SimulationOutcome, HarnessError> {
    let extractor = FeatureExtractor::new(&fixtures.substrate);
    let mut net = fixtures.substrate.pristine();
    let outcome = simulate(&mut net, &fixtures.test, cfg.sample_interval, |net, vnr| {
        embed_one(algorithm, net, vnr, params, &extractor)
    })?;
    debug_assert!(net.is_fully_released());
    Ok(outcome)
}

/// One line per request: acceptance, node map, per-link paths, revenue, cost.
pub fn trace_embeddings(vnrs: &[Vnr], outcome: &SimulationOutcome) -> String {
    let mut out = String::new();
    for (vnr, emb) in vnrs.iter().zip(&outcome.embeddings) {
        match emb {
            None => {
                let _ = writeln!(out, "vnr {} rejected", vnr.id);
            }
            Some(e) => {
                let nodes: Vec<String> = e.nodes.0.iter().map(|n| n.to_string()).collect();
                let paths: Vec<String> = e
                    .links
                    .0
                    .iter()
                    .map(|p| p.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("/"))
                    .collect();
                let _ = writeln!(
                    out,
                    "vnr {} accepted nodes {} paths {} revenue {} cost {}",
                    vnr.id,
                    nodes.join(","),
                    if paths.is_empty() { "-".to_string() } else { paths.join(";") },
                    e.revenue,
                    e.cost
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub algorithm: Algorithm,
    pub delay_cap: f64,
    pub series: MetricsTimeSeries,
}

impl TestRun {
    pub fn file_name(&self) -> String {
        format!("test_{}_cap{}.csv", self.algorithm, self.delay_cap)
    }
}

pub const SUMMARY_CSV_HEADER: &str = "algorithm,delay_cap,avg_revenue,acceptance,rc_ratio,cum_revenue,cum_cost";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub delay_cap: f64,
    pub avg_revenue: f64,
    pub acceptance: f64,
    pub rc_ratio: f64,
    pub cum_revenue: u64,
    pub cum_cost: u64,
}

impl SummaryRow {
    pub fn of(algorithm: Algorithm, delay_cap: f64, series: &MetricsTimeSeries) -> Self {
        let m = epoch_metrics(0, series);
        let last = series.last();
        Self {
            algorithm,
            delay_cap,
            avg_revenue: m.avg_revenue,
            acceptance: m.acceptance,
            rc_ratio: m.rc_ratio,
            cum_revenue: last.map_or(0, |s| s.cumulative_revenue),
            cum_cost: last.map_or(0, |s| s.cumulative_cost),
        }
    }
}

/// Everything a `compare` run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: SimulationConfig,
    pub params: PolicyParams,
    pub training: TrainingCurves,
    pub runs: Vec<TestRun>,
    pub summary: Vec<SummaryRow>,
}

impl RunReport {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for r in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm, r.delay_cap, r.avg_revenue, r.acceptance, r.rc_ratio, r.cum_revenue, r.cum_cost
            );
        }
        out
    }

    pub fn run(&self, algorithm: Algorithm, delay_cap: f64) -> Option<&TestRun> {
        self.runs
            .iter()
            .find(|r| r.algorithm == algorithm && r.delay_cap == delay_cap)
    }

    /// Writes the config echo, learned parameters, training curves, one
    /// metrics CSV per (algorithm, cap) and the summary table.
    pub fn write(&self, out_dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;
        write_file(&out_dir.join("config.txt"), &self.config.to_text())?;
        write_file(&out_dir.join("policy.txt"), &format!("{}\n", self.params))?;
        write_file(&out_dir.join("train_curves.csv"), &self.training.to_csv())?;
        for run in &self.runs {
            write_file(&out_dir.join(run.file_name()), &run.series.to_csv())?;
        }
        write_file(&out_dir.join("summary.csv"), &self.summary_csv())
    }

    /// Recomputes the summary from the per-run CSVs in `out_dir` and checks
    /// it against the summary held in memory and the one on disk.
    pub fn replay_check(&self, out_dir: &Path) -> Result<(), HarnessError> {
        for row in &self.summary {
            let run = TestRun {
                algorithm: row.algorithm,
                delay_cap: row.delay_cap,
                series: MetricsTimeSeries::new(),
            };
            let series = MetricsTimeSeries::from_csv(&read_file(&out_dir.join(run.file_name()))?)?;
            let recomputed = SummaryRow::of(row.algorithm, row.delay_cap, &series);
            if recomputed != *row {
                return Err(HarnessError::Replay(format!(
                    "{} at cap {} disagrees with {}",
                    row.algorithm,
                    row.delay_cap,
                    run.file_name()
                )));
            }
        }
        if read_file(&out_dir.join("summary.csv"))? != self.summary_csv() {
            return Err(HarnessError::Replay("summary.csv differs from the report".to_string()));
        }
        Ok(())
    }
}

/// Trains once, then runs every algorithm on the test set under every cap
/// in `cfg.delay_caps`. Substrate, training set and request topology are
/// shared across caps.
pub fn compare(cfg: &SimulationConfig) -> Result<RunReport, HarnessError> {
    compare_algorithms(cfg, &Algorithm::ALL)
}

pub fn compare_algorithms(cfg: &SimulationConfig, algorithms: &[Algorithm]) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let base = Fixtures::generate(cfg, cfg.delay_caps[0])?;
    let trained = if algorithms.contains(&Algorithm::Drl) {
        train(cfg, &base)?
    } else {
        TrainingOutcome {
            params: PolicyParams::zeros(cfg.learning_rate),
            curves: TrainingCurves::default(),
            epoch_seconds: Vec::new(),
        }
    };
    let mut runs = Vec::new();
    for &cap in &cfg.delay_caps {
        let fixtures = Fixtures::generate(cfg, cap)?;
        for &algorithm in algorithms {
            let outcome = run_test(cfg, &fixtures, algorithm, &trained.params)?;
            runs.push(TestRun {
                algorithm,
                delay_cap: cap,
                series: outcome.series,
            });
        }
    }
    let summary = runs
        .iter()
        .map(|r| SummaryRow::of(r.algorithm, r.delay_cap, &r.series))
        .collect();
    Ok(RunReport {
        config: cfg.clone(),
        params: trained.params,
        training: trained.curves,
        runs,
        summary,
    })
}
