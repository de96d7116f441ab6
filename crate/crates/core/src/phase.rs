//! Delayed quasirandom spreading organized in lazy and busy phases.
//!
//! At every phase boundary the active set is reset to the informed vertices
//! that have not transmitted yet. In a lazy phase that set stays fixed; in a
//! busy phase every vertex informed during the phase starts sending in the
//! following round. Vertices that have transmitted in an earlier phase and
//! are not newly informed stay silent from then on.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, TheoremConstants};
use crate::engine::{Engine, EngineState, TrialResult, NEVER};
use crate::error::{Error, Result};
use crate::lists::ListAssignment;
use crate::protocol::{FailureModel, PushProtocol, Quasirandom};
use crate::rng::TrialStream;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Lazy,
    Busy,
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseKind::Lazy => "lazy",
            PhaseKind::Busy => "busy",
        })
    }
}

impl FromStr for PhaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lazy" => Ok(PhaseKind::Lazy),
            "busy" => Ok(PhaseKind::Busy),
            other => Err(Error::UnknownStrategy {
                kind: "phase kind",
                name: other.to_string(),
                known: "lazy, busy".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub length: u64,
}

impl Phase {
    pub fn lazy(length: u64) -> Self {
        Self {
            kind: PhaseKind::Lazy,
            length,
        }
    }

    pub fn busy(length: u64) -> Self {
        Self {
            kind: PhaseKind::Busy,
            length,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phases: Vec<Phase>,
}

impl PhaseSchedule {
    pub fn new(phases: Vec<Phase>) -> Self {
        Self { phases }
    }

    pub fn total_rounds(&self) -> u64 {
        self.phases
            .iter()
            .fold(0u64, |acc, ph| acc.saturating_add(ph.length))
    }

    /// Reads `kind,length` records, one per line. Blank lines and `#`
    /// comments are ignored.
    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut phases = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 2 {
                return Err(Error::Schedule {
                    line,
                    reason: format!("expected `kind,length`, got {} fields", record.len()),
                });
            }
            let kind = record[0].parse::<PhaseKind>().map_err(|e| Error::Schedule {
                line,
                reason: e.to_string(),
            })?;
            let length = record[1].parse::<u64>().map_err(|_| Error::Schedule {
                line,
                reason: format!("`{}` is not a non-negative integer", &record[1]),
            })?;
            phases.push(Phase { kind, length });
        }
        Ok(Self { phases })
    }
}

impl FromStr for PhaseSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s.as_bytes())
    }
}

impl fmt::Display for PhaseSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ph in &self.phases {
            writeln!(f, "{},{}", ph.kind, ph.length)?;
        }
        Ok(())
    }
}

/// Bookkeeping for one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub index: usize,
    pub kind: PhaseKind,
    pub length: u64,
    pub start_round: u64,
    pub rounds_run: u64,
    /// Active set size when the phase began.
    pub active_at_start: u32,
    pub informed_before: u32,
    pub informed_after: u32,
    /// Informed vertices that had not transmitted when the phase ended; the
    /// active set of the next phase.
    pub newly_informed: u32,
}

#[derive(Debug, Clone)]
pub struct DelayedRun {
    pub result: TrialResult,
    pub phases: Vec<PhaseRecord>,
    pub state: EngineState,
}

/// Drives any push protocol through a phase schedule.
#[derive(Debug, Clone, Copy)]
pub struct PhaseEngine<'a> {
    pub engine: Engine<'a>,
}

fn unstarted(state: &EngineState) -> Vec<u32> {
    state
        .informed()
        .iter()
        .copied()
        .filter(|&v| !state.vertex(v).started())
        .collect()
}

fn merge_into(active: &mut Vec<u32>, fresh: &[u32]) {
    if fresh.is_empty() {
        return;
    }
    active.extend_from_slice(fresh);
    active.sort_unstable();
}

impl<'a> PhaseEngine<'a> {
    pub fn new(engine: Engine<'a>) -> Self {
        Self { engine }
    }

    /// Runs the schedule (never more than `max_rounds` rounds in total).
    /// Stops early on completion or once no vertex can ever send again.
    pub fn run(&self, start: u32, schedule: &PhaseSchedule, max_rounds: u64) -> Result<DelayedRun> {
        let mut state = self.engine.init(start)?;
        let ctx = self.engine.context();
        let mut trajectory = vec![state.informed_count()];
        let mut records = Vec::with_capacity(schedule.phases.len());
        let mut stalled = false;

        for (index, phase) in schedule.phases.iter().enumerate() {
            if state.is_complete() || stalled || state.round() >= max_rounds {
                break;
            }
            let mut active = unstarted(&state);
            let mut record = PhaseRecord {
                index,
                kind: phase.kind,
                length: phase.length,
                start_round: state.round(),
                rounds_run: 0,
                active_at_start: active.len() as u32,
                informed_before: state.informed_count(),
                informed_after: 0,
                newly_informed: 0,
            };
            for _ in 0..phase.length {
                if state.is_complete() || state.round() >= max_rounds {
                    break;
                }
                if active.is_empty() {
                    stalled = true;
                    break;
                }
                let fresh = state.transmit_round(&active, self.engine.protocol, &ctx);
                trajectory.push(state.informed_count());
                record.rounds_run += 1;
                if phase.kind == PhaseKind::Busy {
                    merge_into(&mut active, &fresh);
                }
            }
            record.informed_after = state.informed_count();
            record.newly_informed = unstarted(&state).len() as u32;
            records.push(record);
        }

        Ok(DelayedRun {
            result: TrialResult {
                start,
                rounds: state.round(),
                completed: state.is_complete(),
                trajectory,
            },
            phases: records,
            state,
        })
    }
}

/// Delayed quasirandom spreading with the given lists.
#[allow(clippy::too_many_arguments)]
pub fn run_delayed(
    topology: &Topology,
    lists: &ListAssignment,
    failure: FailureModel,
    start: u32,
    schedule: &PhaseSchedule,
    stream: TrialStream,
    max_rounds: u64,
) -> Result<DelayedRun> {
    let protocol = Quasirandom::new(lists.clone());
    PhaseEngine::new(Engine::new(topology, &protocol, failure, stream)).run(start, schedule, max_rounds)
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub delayed: DelayedRun,
    pub undelayed: TrialResult,
    /// Delayed informed set contained in the undelayed one at every round.
    pub dominated: bool,
}

/// True iff `I_inner(t) ⊆ I_outer(t)` for every round `t`, i.e. every vertex
/// the inner run informs is informed no later by the outer run.
pub fn dominates(outer: &EngineState, inner: &EngineState) -> bool {
    inner
        .informed_at()
        .iter()
        .zip(outer.informed_at())
        .all(|(&i, &o)| i == NEVER || o <= i)
}

/// Runs the delayed and the undelayed protocol on the same random source.
/// The undelayed run covers at least as many rounds as the delayed one.
pub fn coupled_run_with(
    engine: Engine<'_>,
    start: u32,
    schedule: &PhaseSchedule,
    max_rounds: u64,
) -> Result<CoupledRun> {
    let delayed = PhaseEngine::new(engine).run(start, schedule, max_rounds)?;
    let mut state = engine.init(start)?;
    let mut trajectory = vec![state.informed_count()];
    while !state.is_complete() && state.round() < delayed.result.rounds {
        engine.step(&mut state);
        trajectory.push(state.informed_count());
    }
    let dominated = dominates(&state, &delayed.state);
    Ok(CoupledRun {
        undelayed: TrialResult {
            start,
            rounds: state.round(),
            completed: state.is_complete(),
            trajectory,
        },
        delayed,
        dominated,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn coupled_run(
    topology: &Topology,
    lists: &ListAssignment,
    failure: FailureModel,
    start: u32,
    schedule: &PhaseSchedule,
    stream: TrialStream,
    max_rounds: u64,
) -> Result<CoupledRun> {
    let protocol = Quasirandom::new(lists.clone());
    let engine = Engine::new(topology, &protocol as &dyn PushProtocol, failure, stream);
    coupled_run_with(engine, start, schedule, max_rounds)
}

/// The phase construction behind the quasirandom upper bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremSchedule {
    pub schedule: PhaseSchedule,
    pub constants: TheoremConstants,
    /// False when `S > n` or `k > 64`, i.e. the construction is not runnable
    /// in any meaningful sense at this size.
    pub feasible: bool,
    /// Preconditions the construction assumes but does not enforce.
    pub preconditions: Vec<String>,
}

fn rounds(x: f64) -> u64 {
    if x.is_finite() && x < u64::MAX as f64 {
        x.ceil().max(0.0) as u64
    } else {
        u64::MAX
    }
}

/// `[lazy (eps/2) ln n, lazy (eps/2) ln n, l x busy k, lazy S, lazy (3+eps)/(3p) ln n]`,
/// every length rounded up.
pub fn theorem_schedule(n: u32, p: f64, eps: f64) -> Result<TheoremSchedule> {
    if n < 2 {
        return Err(Error::param("n", n, "need at least two vertices"));
    }
    let c = bounds::theorem_constants(n as f64, p, eps)?;
    let ln_n = (n as f64).ln();
    let opening = rounds(eps / 2.0 * ln_n);
    let busy_count = rounds(c.ell_max);
    let mut phases = vec![Phase::lazy(opening), Phase::lazy(opening)];
    phases.extend((0..busy_count).map(|_| Phase::busy(c.k)));
    phases.push(Phase::lazy(rounds(c.s)));
    phases.push(Phase::lazy(rounds((3.0 + eps) / (3.0 * p) * ln_n)));

    let preconditions = vec![
        format!(
            "second lazy phase assumes |N| <= (eps/2) ln n = {:.3} at its start",
            eps / 2.0 * ln_n
        ),
        format!("busy phases assume |I| <= zeta' n = {:.3e}", c.zeta_prime * n as f64),
    ];
    Ok(TheoremSchedule {
        schedule: PhaseSchedule::new(phases),
        feasible: c.s <= n as f64 && c.k <= 64,
        constants: c,
        preconditions,
    })
}
