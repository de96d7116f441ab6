//! Reproducible experiment runner.
//!
//! Trial `i` of an experiment draws all of its randomness from
//! `TrialStream::new(seed, i)` (or `for_start` under the sweep policy), so the
//! per-trial records do not depend on how trials are spread over workers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::engine::{default_max_rounds, Engine, TrialResult};
use crate::error::{Error, Result};
use crate::lists::{Explicit, ListAssignment, ListRegistry};
use crate::phase::{coupled_run_with, PhaseEngine, PhaseSchedule};
use crate::protocol::{FailureModel, ProtocolRegistry, PushProtocol};
use crate::rng::{derive, TrialStream};
use crate::stats::{bootstrap_ratios, SummaryStats, BOOTSTRAP_RESAMPLES};
use crate::topology::{Topology, TopologyKind};

/// Protocol name that runs quasirandom spreading through a phase schedule.
pub const DELAYED: &str = "delayed";

/// Largest tolerated fraction of bound violations in [`check_bounds`].
pub const VIOLATION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartPolicy {
    Fixed(u32),
    /// Every trial runs once from every vertex.
    Sweep,
    /// A single start, vertex 0.
    Symmetric,
}

impl StartPolicy {
    pub fn default_for(kind: TopologyKind) -> Self {
        match kind {
            TopologyKind::Complete => StartPolicy::Symmetric,
            TopologyKind::Star => StartPolicy::Sweep,
        }
    }
}

impl fmt::Display for StartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartPolicy::Fixed(v) => write!(f, "fixed:{v}"),
            StartPolicy::Sweep => f.write_str("sweep"),
            StartPolicy::Symmetric => f.write_str("symmetric"),
        }
    }
}

impl FromStr for StartPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sweep" => Ok(StartPolicy::Sweep),
            "symmetric" => Ok(StartPolicy::Symmetric),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|v| v.parse().ok())
                .map(StartPolicy::Fixed)
                .ok_or_else(|| Error::config("start", format!("`{s}` is not fixed:<v>, sweep or symmetric"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListSource {
    Named(String),
    Explicit(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: String,
    pub topology: TopologyKind,
    pub n: u32,
    pub p: f64,
    pub lists: ListSource,
    /// Seed for randomly permuted lists; the master seed when unset.
    pub list_seed: Option<u64>,
    /// Topology-dependent default when unset.
    pub start: Option<StartPolicy>,
    pub trials: u64,
    pub seed: u64,
    /// `ceil(4 (log_{1+p} n + ln(n)/p)) + 32` when unset.
    pub max_rounds: Option<u64>,
    pub schedule: Option<PhaseSchedule>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: "quasi".into(),
            topology: TopologyKind::Complete,
            n: 1024,
            p: 1.0,
            lists: ListSource::Named("random".into()),
            list_seed: None,
            start: None,
            trials: 100,
            seed: 0,
            max_rounds: None,
            schedule: None,
            out: None,
            summary: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "need at least one vertex"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config("p", format!("{} is outside (0, 1]", self.p)));
        }
        if let Some(StartPolicy::Fixed(v)) = self.start {
            if v >= self.n {
                return Err(Error::config("start", format!("vertex {v} is not below n = {}", self.n)));
            }
        }
        let delayed = self.protocol == DELAYED;
        if !delayed {
            ProtocolRegistry::default()
                .get(&self.protocol)
                .map_err(|e| Error::config("protocol", e.to_string()))?;
        }
        match (delayed, self.schedule.is_some()) {
            (true, false) => return Err(Error::config("schedule", "the delayed protocol needs a schedule")),
            (false, true) => return Err(Error::config("schedule", "only the delayed protocol takes a schedule")),
            _ => {}
        }
        Ok(())
    }

    pub fn start_policy(&self) -> StartPolicy {
        self.start.unwrap_or_else(|| StartPolicy::default_for(self.topology))
    }

    pub fn failure(&self) -> Result<FailureModel> {
        FailureModel::new(self.p).map_err(|e| Error::config("p", e.to_string()))
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::new(self.topology, self.n).map_err(|e| Error::config("n", e.to_string()))
    }

    pub fn realize_lists(&self, topology: &Topology) -> Result<ListAssignment> {
        match &self.lists {
            ListSource::Named(name) => {
                let lists = ListRegistry::default()
                    .build(name, self.list_seed.unwrap_or(self.seed))
                    .map_err(|e| Error::config("lists", e.to_string()))?;
                Ok(ListAssignment::new(*topology, lists))
            }
            ListSource::Explicit(lists) => ListAssignment::explicit(*topology, lists.clone()),
        }
    }

    pub fn effective_max_rounds(&self) -> Result<u64> {
        Ok(match self.max_rounds {
            Some(m) => m,
            None => default_max_rounds(self.n, self.failure()?),
        })
    }
}

/// Key-value configuration, as read from a config file and command-line
/// flags. Keys mirror the long flag names; later settings win.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    values: BTreeMap<String, String>,
}

pub const CONFIG_KEYS: &[&str] = &[
    "protocol",
    "topology",
    "n",
    "p",
    "trials",
    "seed",
    "lists",
    "lists-file",
    "list-seed",
    "start",
    "max-rounds",
    "schedule",
    "eps",
    "out",
    "summary",
];

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<&mut Self> {
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::config(key, "unknown key"));
        }
        self.values.insert(key, value.into().trim().to_string());
        Ok(self)
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<&mut Self> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `key = value`"))?;
            self.set(key, value)?;
        }
        Ok(self)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<&mut Self> {
        let text = std::fs::read_to_string(path)?;
        self.merge_text(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn eps(&self) -> Result<Option<f64>> {
        self.get("eps").map(|v| parse_field("eps", v)).transpose()
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = self.get("protocol") {
            cfg.protocol = v.to_string();
        }
        if let Some(v) = self.get("topology") {
            cfg.topology = v.parse().map_err(|e: Error| Error::config("topology", e.to_string()))?;
        }
        if let Some(v) = self.get("n") {
            cfg.n = parse_field("n", v)?;
        }
        if let Some(v) = self.get("p") {
            cfg.p = parse_field("p", v)?;
        }
        if let Some(v) = self.get("trials") {
            cfg.trials = parse_field("trials", v)?;
        }
        if let Some(v) = self.get("seed") {
            cfg.seed = parse_field("seed", v)?;
        }
        if let Some(v) = self.get("list-seed") {
            cfg.list_seed = Some(parse_field("list-seed", v)?);
        }
        if let Some(v) = self.get("start") {
            cfg.start = Some(v.parse()?);
        }
        if let Some(v) = self.get("max-rounds") {
            cfg.max_rounds = Some(parse_field("max-rounds", v)?);
        }
        match (self.get("lists"), self.get("lists-file")) {
            (Some("file"), None) => return Err(Error::config("lists-file", "`--lists file` needs a lists file")),
            (Some("file") | None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                let topo = cfg.topology()?;
                let parsed = Explicit::parse(&topo, &text)?;
                cfg.lists = ListSource::Explicit((0..cfg.n).map(|v| explicit_list(&parsed, &topo, v)).collect());
            }
            (Some(name), None) => cfg.lists = ListSource::Named(name.to_string()),
            (Some(_), Some(_)) => return Err(Error::config("lists", "a lists file requires `lists = file`")),
            (None, None) => {}
        }
        if let Some(path) = self.get("schedule") {
            cfg.schedule = Some(PhaseSchedule::parse(File::open(path)?)?);
        }
        cfg.out = self.get("out").map(PathBuf::from);
        cfg.summary = self.get("summary").map(PathBuf::from);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn explicit_list(lists: &Explicit, topo: &Topology, v: u32) -> Vec<u32> {
    use crate::lists::CyclicLists;
    (0..topo.degree_unchecked(v)).map(|i| lists.entry(topo, v, i)).collect()
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub start_vertex: u32,
    pub rounds: u64,
    pub completed: bool,
}

/// A validated configuration with its protocol built.
#[derive(Debug)]
pub struct Prepared {
    pub topology: Topology,
    pub protocol: Box<dyn PushProtocol>,
    pub failure: FailureModel,
    pub max_rounds: u64,
    pub schedule: Option<PhaseSchedule>,
    pub start: StartPolicy,
    pub seed: u64,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let topology = config.topology()?;
        let registry = ProtocolRegistry::default();
        let base = if config.protocol == DELAYED { "quasi" } else { config.protocol.as_str() };
        let entry = registry.get(base)?;
        let lists = if entry.needs_lists {
            Some(config.realize_lists(&topology)?)
        } else {
            None
        };
        Ok(Self {
            topology,
            protocol: (entry.factory)(lists)?,
            failure: config.failure()?,
            max_rounds: config.effective_max_rounds()?,
            schedule: config.schedule.clone(),
            start: config.start_policy(),
            seed: config.seed,
        })
    }

    fn run_from(&self, start: u32, stream: TrialStream) -> Result<TrialResult> {
        let engine = Engine::new(&self.topology, self.protocol.as_ref(), self.failure, stream);
        match &self.schedule {
            Some(schedule) => Ok(PhaseEngine::new(engine).run(start, schedule, self.max_rounds)?.result),
            None => engine.run(start, self.max_rounds),
        }
    }

    fn starts(&self, trial: u64) -> Vec<(u32, TrialStream)> {
        match self.start {
            StartPolicy::Fixed(v) => vec![(v, TrialStream::new(self.seed, trial))],
            StartPolicy::Symmetric => vec![(0, TrialStream::new(self.seed, trial))],
            StartPolicy::Sweep => (0..self.topology.n())
                .map(|v| (v, TrialStream::for_start(self.seed, trial, v)))
                .collect(),
        }
    }

    /// All runs belonging to trial `trial`.
    pub fn run_trial(&self, trial: u64) -> Result<Vec<TrialResult>> {
        self.starts(trial)
            .into_iter()
            .map(|(v, stream)| self.run_from(v, stream))
            .collect()
    }

    /// Delayed and undelayed runs of trial `trial` on shared randomness.
    pub fn run_coupled_trial(&self, trial: u64) -> Result<Vec<CoupledRecord>> {
        let schedule = self
            .schedule
            .as_ref()
            .ok_or_else(|| Error::config("schedule", "coupled runs need a schedule"))?;
        self.starts(trial)
            .into_iter()
            .map(|(v, stream)| {
                let engine = Engine::new(&self.topology, self.protocol.as_ref(), self.failure, stream);
                let run = coupled_run_with(engine, v, schedule, self.max_rounds)?;
                Ok(CoupledRecord {
                    trial,
                    start_vertex: v,
                    delayed_rounds: run.delayed.result.rounds,
                    delayed_completed: run.delayed.result.completed,
                    undelayed_rounds: run.undelayed.rounds,
                    undelayed_completed: run.undelayed.completed,
                    dominated: run.dominated,
                })
            })
            .collect()
    }
}

/// One row of the coupled delayed/undelayed CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub trial: u64,
    pub start_vertex: u32,
    pub delayed_rounds: u64,
    pub delayed_completed: bool,
    /// The undelayed run stops once it completes or matches the delayed length.
    pub undelayed_rounds: u64,
    pub undelayed_completed: bool,
    pub dominated: bool,
}

/// Runs every trial of a delayed `config` next to its undelayed twin.
pub fn run_coupled(config: &ExperimentConfig) -> Result<Vec<CoupledRecord>> {
    let prepared = Prepared::new(config)?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| prepared.run_coupled_trial(trial))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: SummaryStats,
}

impl Experiment {
    fn from_records(records: Vec<TrialRecord>) -> Self {
        let times: Vec<u64> = records.iter().filter(|r| r.completed).map(|r| r.rounds).collect();
        let summary = SummaryStats::from_times(records.len() as u64, &times);
        Self { records, summary }
    }

    /// Broadcast times of completed runs, in record order.
    pub fn completed_times(&self) -> Vec<u64> {
        self.records.iter().filter(|r| r.completed).map(|r| r.rounds).collect()
    }

    /// Columns `trial,start_vertex,rounds,completed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.summary)?;
        writeln!(out)?;
        Ok(())
    }

    /// Writes the CSV and JSON outputs named in `config`, if any.
    pub fn persist(&self, config: &ExperimentConfig) -> Result<()> {
        if let Some(path) = &config.out {
            self.write_csv(BufWriter::new(File::create(path)?))?;
        }
        if let Some(path) = &config.summary {
            self.write_summary(BufWriter::new(File::create(path)?))?;
        }
        Ok(())
    }
}

fn collect(config: &ExperimentConfig) -> Result<Experiment> {
    let prepared = Prepared::new(config)?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            prepared.run_trial(trial).map(|runs| {
                runs.into_iter()
                    .map(|r| TrialRecord {
                        trial,
                        start_vertex: r.start,
                        rounds: r.rounds,
                        completed: r.completed,
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment::from_records(per_trial.into_iter().flatten().collect()))
}

/// Runs every trial of `config` on the global thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    collect(config)
}

/// Same as [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<Experiment> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| collect(config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: Experiment,
    /// Its summary carries the `b / a` ratios.
    pub b: Experiment,
}

impl Comparison {
    pub fn ratios(&self) -> Option<&crate::stats::RatioStats> {
        self.b.summary.ratios.as_ref()
    }
}

/// Runs both experiments and reports `b / a` ratios of median and mean
/// broadcast time with seeded bootstrap intervals.
pub fn compare(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<Comparison> {
    let ea = run_experiment(a)?;
    let mut eb = run_experiment(b)?;
    eb.summary.ratios = bootstrap_ratios(
        &ea.completed_times(),
        &eb.completed_times(),
        BOOTSTRAP_RESAMPLES,
        derive(a.seed, b.seed),
    );
    Ok(Comparison { a: ea, b: eb })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub bounds: BoundReport,
    pub runs: u64,
    /// Fraction of runs finishing strictly before the lower bound.
    pub below_lower: f64,
    /// Fraction of runs finishing strictly after the upper bound, or not at all.
    pub above_upper: f64,
    pub threshold: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub guarantee_vacuous: bool,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }

    pub fn from_experiment(experiment: &Experiment, n: u32, p: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config("eps", format!("{eps} is outside (0, 1)")));
        }
        let report = BoundReport::new(n as f64, p, eps)?;
        let runs = experiment.records.len() as u64;
        let below = experiment
            .records
            .iter()
            .filter(|r| r.completed && (r.rounds as f64) < report.lower)
            .count();
        let above = experiment
            .records
            .iter()
            .filter(|r| !r.completed || (r.rounds as f64) > report.upper)
            .count();
        let below_lower = below as f64 / runs as f64;
        let above_upper = above as f64 / runs as f64;
        Ok(Self {
            guarantee_vacuous: report.guarantee_is_vacuous(),
            bounds: report,
            runs,
            below_lower,
            above_upper,
            threshold: VIOLATION_THRESHOLD,
            lower_ok: below_lower <= VIOLATION_THRESHOLD,
            upper_ok: above_upper <= VIOLATION_THRESHOLD,
        })
    }
}

/// Runs `config` and measures how often the broadcast time leaves
/// `[(1-eps) L, (1+eps) L]` with `L = log_{1+p} n + ln(n)/p`.
pub fn check_bounds(config: &ExperimentConfig, eps: f64) -> Result<(Experiment, BoundCheck)> {
    if config.n < 2 {
        return Err(Error::config("n", "bounds need at least two vertices"));
    }
    bounds::lossy_bound(config.n as f64, config.p)?;
    let experiment = run_experiment(config)?;
    let check = BoundCheck::from_experiment(&experiment, config.n, config.p, eps)?;
    Ok((experiment, check))
}
