//! Round-synchronous execution of a push protocol.

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::Result;
use crate::protocol::{AttemptContext, FailureModel, PushProtocol, VertexState};
use crate::rng::TrialStream;
use crate::topology::Topology;

/// Round at which a vertex was first informed; `NEVER` if it has not been.
pub const NEVER: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineState {
    round: u64,
    /// Ascending.
    informed: Vec<u32>,
    /// Vertices first informed in the latest round, ascending.
    newly_informed: Vec<u32>,
    informed_at: Vec<u32>,
    vertices: Vec<VertexState>,
}

impl EngineState {
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn informed(&self) -> &[u32] {
        &self.informed
    }

    pub fn newly_informed(&self) -> &[u32] {
        &self.newly_informed
    }

    pub fn informed_count(&self) -> u32 {
        self.informed.len() as u32
    }

    pub fn n(&self) -> u32 {
        self.informed_at.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.informed.len() == self.informed_at.len()
    }

    pub fn is_informed(&self, v: u32) -> bool {
        self.informed_at[v as usize] != NEVER
    }

    /// Round in which each vertex was first informed ([`NEVER`] if not yet).
    pub fn informed_at(&self) -> &[u32] {
        &self.informed_at
    }

    pub fn vertex(&self, v: u32) -> &VertexState {
        &self.vertices[v as usize]
    }

    /// Runs one round in which exactly `senders` transmit. Returns the
    /// vertices informed in this round (ascending). Vertices informed during
    /// the round do not send until the next one.
    pub(crate) fn transmit_round(
        &mut self,
        senders: &[u32],
        protocol: &dyn PushProtocol,
        ctx: &AttemptContext<'_>,
    ) -> Vec<u32> {
        let next = (self.round + 1) as u32;
        let mut fresh = Vec::new();
        for &v in senders {
            debug_assert!(self.is_informed(v));
            if ctx.topology.degree_unchecked(v) == 0 {
                continue;
            }
            let state = &mut self.vertices[v as usize];
            let attempt = protocol.attempt(v, state, ctx);
            state.ordinal += 1;
            if attempt.delivered && self.informed_at[attempt.target as usize] == NEVER {
                self.informed_at[attempt.target as usize] = next;
                fresh.push(attempt.target);
            }
        }
        fresh.sort_unstable();
        self.informed = merge_sorted(&self.informed, &fresh);
        self.newly_informed.clone_from(&fresh);
        self.round += 1;
        fresh
    }
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub start: u32,
    /// Broadcast time if `completed`, otherwise the number of rounds executed.
    pub rounds: u64,
    pub completed: bool,
    /// `|I_t|` for `t = 0..=rounds`.
    pub trajectory: Vec<u32>,
}

/// Everything a trial needs besides its start vertex.
#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    pub topology: &'a Topology,
    pub protocol: &'a dyn PushProtocol,
    pub failure: FailureModel,
    pub stream: TrialStream,
}

impl<'a> Engine<'a> {
    pub fn new(
        topology: &'a Topology,
        protocol: &'a dyn PushProtocol,
        failure: FailureModel,
        stream: TrialStream,
    ) -> Self {
        Self {
            topology,
            protocol,
            failure,
            stream,
        }
    }

    pub(crate) fn context(&self) -> AttemptContext<'_> {
        AttemptContext {
            topology: self.topology,
            stream: &self.stream,
            failure: self.failure,
        }
    }

    pub fn init(&self, start: u32) -> Result<EngineState> {
        self.topology.check_vertex(start)?;
        let n = self.topology.n() as usize;
        let mut informed_at = vec![NEVER; n];
        informed_at[start as usize] = 0;
        Ok(EngineState {
            round: 0,
            informed: vec![start],
            newly_informed: vec![start],
            informed_at,
            vertices: vec![VertexState::default(); n],
        })
    }

    /// Every informed vertex transmits once, in ascending id order.
    pub fn step(&self, state: &mut EngineState) {
        let senders = state.informed.clone();
        state.transmit_round(&senders, self.protocol, &self.context());
    }

    /// Steps until everyone is informed or `max_rounds` rounds have run.
    pub fn run(&self, start: u32, max_rounds: u64) -> Result<TrialResult> {
        let mut state = self.init(start)?;
        let mut trajectory = vec![state.informed_count()];
        while !state.is_complete() && state.round() < max_rounds {
            self.step(&mut state);
            trajectory.push(state.informed_count());
        }
        Ok(TrialResult {
            start,
            rounds: state.round(),
            completed: state.is_complete(),
            trajectory,
        })
    }
}

/// `ceil(4 (log_{1+p} n + ln(n)/p)) + 32`.
pub fn default_max_rounds(n: u32, failure: FailureModel) -> u64 {
    if n < 2 {
        return 32;
    }
    let bound = bounds::lossy_bound(n as f64, failure.p()).expect("n >= 2 and p validated");
    (4.0 * bound).ceil() as u64 + 32
}
