//! `rumor`: command-line front end for the rumor spreading simulator.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rumor_core::experiment::{self, BoundCheck, ConfigBuilder, ExperimentConfig, StartPolicy};
use rumor_core::oracle::{exact_fully_random, exact_quasirandom, star_fully_random_expectation};
use rumor_core::phase::theorem_schedule;
use rumor_core::{BoundReport, Error, TopologyKind};

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "rumor", version, about = "Push rumor spreading under lossy transmissions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write per-trial records and a summary.
    Sim(Common),
    /// Run two experiments and report b/a ratios with bootstrap intervals.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Config file for experiment b, applied over the shared settings.
        #[arg(long)]
        config_b: Option<PathBuf>,
        /// `key=value` override for experiment b (repeatable).
        #[arg(long = "with", value_name = "KEY=VALUE")]
        with: Vec<String>,
    },
    /// Print the broadcast-time bounds for n, p and eps.
    Bounds {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
    },
    /// Exact broadcast-time distribution for small instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Last round tabulated; the remaining mass is reported as the tail.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Delayed runs from a schedule file, coupled with undelayed runs.
    /// Without a schedule, prints the theorem schedule for --eps.
    Phases(Common),
    /// Fraction of runs outside the bounds; exits with 3 above 5%.
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// canonical, reversed, random or file.
    #[arg(long)]
    lists: Option<String>,
    /// One list per line, for `--lists file`.
    #[arg(long)]
    lists_file: Option<PathBuf>,
    #[arg(long)]
    list_seed: Option<u64>,
    /// fixed:<v>, sweep or symmetric.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    max_rounds: Option<u64>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl Common {
    fn builder(&self) -> Result<ConfigBuilder, Error> {
        let mut b = ConfigBuilder::new();
        if let Some(path) = &self.config {
            b.merge_file(path)?;
        }
        let path = |p: &PathBuf| p.display().to_string();
        let flags = [
            ("protocol", self.protocol.clone()),
            ("topology", self.topology.clone()),
            ("n", self.n.map(|v| v.to_string())),
            ("p", self.p.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("lists", self.lists.clone()),
            ("lists-file", self.lists_file.as_ref().map(path)),
            ("list-seed", self.list_seed.map(|v| v.to_string())),
            ("start", self.start.clone()),
            ("max-rounds", self.max_rounds.map(|v| v.to_string())),
            ("schedule", self.schedule.as_ref().map(path)),
            ("eps", self.eps.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(path)),
            ("summary", self.summary.as_ref().map(path)),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                b.set(key, v)?;
            }
        }
        Ok(b)
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(path: Option<&PathBuf>, value: &impl serde::Serialize) -> Result<(), Error> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        None => print_json(value),
    }
}

fn sim(common: &Common) -> Result<u8, Error> {
    let cfg = common.builder()?.build()?;
    let e = experiment::run_experiment(&cfg)?;
    e.persist(&cfg)?;
    if cfg.summary.is_none() {
        print_json(&e.summary)?;
    }
    Ok(0)
}

fn compare(common: &Common, config_b: Option<&PathBuf>, with: &[String]) -> Result<u8, Error> {
    let base = common.builder()?;
    let a = base.build()?;
    let mut b_builder = base.clone();
    if let Some(path) = config_b {
        b_builder.merge_file(path)?;
    }
    for kv in with {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config { field: "with".into(), reason: format!("`{kv}` is not key=value") })?;
        b_builder.set(key, value)?;
    }
    let mut b = b_builder.build()?;
    // shared output paths belong to experiment a unless b names its own
    let overridden = |key: &str| with.iter().any(|kv| kv.trim_start().starts_with(key));
    if !overridden("out") {
        b.out = None;
    }
    if !overridden("summary") {
        b.summary = None;
    }
    let mut a_only = a.clone();
    a_only.summary = None;
    let c = experiment::compare(&a, &b)?;
    c.a.persist(&a_only)?;
    c.b.persist(&b)?;
    write_json(a.summary.as_ref(), &json!({ "a": c.a.summary, "b": c.b.summary }))?;
    Ok(0)
}

fn bounds(n: f64, p: f64, eps: f64) -> Result<u8, Error> {
    print_json(&BoundReport::new(n, p, eps)?)?;
    Ok(0)
}

fn oracle(common: &Common, horizon: Option<u64>) -> Result<u8, Error> {
    let cfg = common.builder()?.build()?;
    let topology = cfg.topology()?;
    let start = match cfg.start {
        Some(StartPolicy::Fixed(v)) => v,
        Some(StartPolicy::Sweep) => {
            return Err(Error::Config { field: "start".into(), reason: "the oracle takes one start vertex".into() })
        }
        _ => 0,
    };
    let dist = match (cfg.protocol.as_str(), cfg.topology) {
        ("random", TopologyKind::Complete) => exact_fully_random(cfg.n, cfg.p, horizon.unwrap_or(64))?,
        ("random", TopologyKind::Star) => {
            if cfg.p != 1.0 || start == 0 {
                return Err(Error::Config {
                    field: "topology".into(),
                    reason: "the star oracle covers p = 1 from a leaf".into(),
                });
            }
            let expected = star_fully_random_expectation(cfg.n)?;
            print_json(&json!({ "topology": "star", "n": cfg.n, "expected_rounds": expected }))?;
            return Ok(0);
        }
        ("quasi", _) => {
            let lists = cfg.realize_lists(&topology)?;
            exact_quasirandom(&lists, cfg.p, start, horizon.unwrap_or(8))?
        }
        (other, _) => {
            return Err(Error::Config {
                field: "protocol".into(),
                reason: format!("no exact oracle for `{other}` (random or quasi)"),
            })
        }
    };
    let mut w = output(cfg.out.as_ref())?;
    dist.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("tail beyond round {}: {:.17e}", dist.horizon, dist.tail);
    Ok(0)
}

fn phases(common: &Common) -> Result<u8, Error> {
    let builder = common.builder()?;
    if builder.get("schedule").is_none() {
        let n: u32 = builder.get("n").unwrap_or("1024").parse().map_err(|_| Error::Config {
            field: "n".into(),
            reason: "not an integer".into(),
        })?;
        let p: f64 = builder.get("p").unwrap_or("1").parse().map_err(|_| Error::Config {
            field: "p".into(),
            reason: "not a number".into(),
        })?;
        let eps = builder.eps()?.unwrap_or(0.5);
        print_json(&theorem_schedule(n, p, eps)?)?;
        return Ok(0);
    }
    let mut builder = builder;
    if builder.get("protocol").is_none() {
        builder.set("protocol", experiment::DELAYED)?;
    }
    let cfg = builder.build()?;
    let rows = experiment::run_coupled(&cfg)?;
    let mut w = csv::Writer::from_writer(output(cfg.out.as_ref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let dominated = rows.iter().filter(|r| r.dominated).count();
    let delayed: Vec<u64> = rows.iter().filter(|r| r.delayed_completed).map(|r| r.delayed_rounds).collect();
    let summary = json!({
        "runs": rows.len(),
        "dominated": dominated,
        "domination_rate": dominated as f64 / rows.len() as f64,
        "delayed": rumor_core::SummaryStats::from_times(rows.len() as u64, &delayed),
    });
    match &cfg.summary {
        Some(path) => write_json(Some(path), &summary)?,
        None if cfg.out.is_some() => print_json(&summary)?,
        None => eprintln!("{}", serde_json::to_string(&summary)?),
    }
    Ok(0)
}

fn check(common: &Common) -> Result<u8, Error> {
    let builder = common.builder()?;
    let cfg: ExperimentConfig = builder.build()?;
    let eps = builder.eps()?.unwrap_or(0.2);
    let (e, report): (_, BoundCheck) = experiment::check_bounds(&cfg, eps)?;
    e.persist(&ExperimentConfig { summary: None, ..cfg.clone() })?;
    write_json(cfg.summary.as_ref(), &report)?;
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    eprintln!(
        "{verdict}: below lower {:.4}, above upper {:.4} (threshold {})",
        report.below_lower, report.above_upper, report.threshold
    );
    Ok(if report.passed() { 0 } else { EXIT_CHECK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim(c) => sim(c),
        Command::Compare { common, config_b, with } => compare(common, config_b.as_ref(), with),
        Command::Bounds { n, p, eps } => bounds(*n, *p, *eps),
        Command::Oracle { common, horizon } => oracle(common, *horizon),
        Command::Phases(c) => phases(c),
        Command::Check(c) => check(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_CONFIG })
        }
    }
}
