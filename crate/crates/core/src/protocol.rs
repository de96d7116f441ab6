//! Push protocols behind a common trait, looked up by name at runtime.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lists::ListAssignment;
use crate::rng::{Purpose, TrialStream};
use crate::topology::Topology;

/// Per-transmission delivery probability.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FailureModel(f64);

impl FailureModel {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p <= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::param("p", p, "success probability must lie in (0, 1]"))
        }
    }

    pub fn lossless() -> Self {
        Self(1.0)
    }

    pub fn p(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FailureModel {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<FailureModel> for f64 {
    fn from(f: FailureModel) -> f64 {
        f.0
    }
}

/// Transmission state a vertex carries between rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VertexState {
    /// List position of the next attempt; `None` until the first attempt.
    pub cursor: Option<u32>,
    /// Attempts made so far. Attempt `j` draws its coins at ordinal `j`.
    pub ordinal: u64,
}

impl VertexState {
    pub fn started(&self) -> bool {
        self.ordinal > 0
    }
}

/// Shared inputs of a single attempt.
#[derive(Debug, Clone, Copy)]
pub struct AttemptContext<'a> {
    pub topology: &'a Topology,
    pub stream: &'a TrialStream,
    pub failure: FailureModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attempt {
    pub target: u32,
    pub delivered: bool,
}

/// A push protocol: decides whom an informed vertex calls and whether the call lands.
///
/// `attempt` must draw all of its randomness from addresses keyed by
/// `(v, state.ordinal)` (plus `InitialChoice`), never from round numbers.
/// The engine increments `state.ordinal` after each call.
pub trait PushProtocol: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn attempt(&self, v: u32, state: &mut VertexState, ctx: &AttemptContext<'_>) -> Attempt;

    /// Cyclic lists, for list-driven protocols.
    fn lists(&self) -> Option<&ListAssignment> {
        None
    }
}

/// Calls a neighbor chosen uniformly at random every round.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullyRandom;

impl PushProtocol for FullyRandom {
    fn name(&self) -> &'static str {
        "random"
    }

    fn attempt(&self, v: u32, state: &mut VertexState, ctx: &AttemptContext<'_>) -> Attempt {
        let j = state.ordinal;
        let degree = ctx.topology.degree_unchecked(v);
        let i = ctx.stream.index(v, Purpose::Target(j), degree);
        Attempt {
            target: ctx.topology.neighbor_unchecked(v, i),
            delivered: ctx.stream.bernoulli(v, Purpose::Coin(j), ctx.failure.p()),
        }
    }
}

/// Random first position, then walks the cyclic list one step per round
/// whether or not the call was delivered (the sender never learns of losses).
#[derive(Debug, Clone)]
pub struct Quasirandom {
    lists: ListAssignment,
}

impl Quasirandom {
    pub fn new(lists: ListAssignment) -> Self {
        Self { lists }
    }
}

impl PushProtocol for Quasirandom {
    fn name(&self) -> &'static str {
        "quasi"
    }

    fn attempt(&self, v: u32, state: &mut VertexState, ctx: &AttemptContext<'_>) -> Attempt {
        let j = state.ordinal;
        let degree = ctx.topology.degree_unchecked(v);
        let pos = state
            .cursor
            .unwrap_or_else(|| ctx.stream.index(v, Purpose::InitialChoice, degree));
        state.cursor = Some((pos + 1) % degree);
        Attempt {
            target: self.lists.entry(v, pos),
            delivered: ctx.stream.bernoulli(v, Purpose::Coin(j), ctx.failure.p()),
        }
    }

    fn lists(&self) -> Option<&ListAssignment> {
        Some(&self.lists)
    }
}

/// Quasirandom with acknowledgements: the recipient answers with a feedback
/// message that is itself delivered with probability `p`, and the sender
/// moves on only once it has heard back. Otherwise it retries the same
/// addressee next round.
#[derive(Debug, Clone)]
pub struct FeedbackRetry {
    lists: ListAssignment,
}

impl FeedbackRetry {
    pub fn new(lists: ListAssignment) -> Self {
        Self { lists }
    }
}

impl PushProtocol for FeedbackRetry {
    fn name(&self) -> &'static str {
        "feedback"
    }

    fn attempt(&self, v: u32, state: &mut VertexState, ctx: &AttemptContext<'_>) -> Attempt {
        let j = state.ordinal;
        let p = ctx.failure.p();
        let degree = ctx.topology.degree_unchecked(v);
        let pos = state
            .cursor
            .unwrap_or_else(|| ctx.stream.index(v, Purpose::InitialChoice, degree));
        let delivered = ctx.stream.bernoulli(v, Purpose::Coin(j), p);
        let acknowledged = delivered && ctx.stream.bernoulli(v, Purpose::Feedback(j), p);
        state.cursor = Some(if acknowledged { (pos + 1) % degree } else { pos });
        Attempt {
            target: self.lists.entry(v, pos),
            delivered,
        }
    }

    fn lists(&self) -> Option<&ListAssignment> {
        Some(&self.lists)
    }
}

/// Builds a protocol; list-driven protocols receive their realized lists.
pub type ProtocolFactory = fn(Option<ListAssignment>) -> Result<Box<dyn PushProtocol>>;

#[derive(Debug, Clone, Copy)]
pub struct ProtocolEntry {
    pub needs_lists: bool,
    pub factory: ProtocolFactory,
}

#[derive(Debug, Clone)]
pub struct ProtocolRegistry {
    entries: BTreeMap<&'static str, ProtocolEntry>,
}

fn require_lists(lists: Option<ListAssignment>, name: &str) -> Result<ListAssignment> {
    lists.ok_or_else(|| Error::config("lists", format!("protocol `{name}` needs cyclic lists")))
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        reg.register("random", false, |_| Ok(Box::new(FullyRandom)));
        reg.register("quasi", true, |lists| {
            Ok(Box::new(Quasirandom::new(require_lists(lists, "quasi")?)))
        });
        reg.register("feedback", true, |lists| {
            Ok(Box::new(FeedbackRetry::new(require_lists(lists, "feedback")?)))
        });
        reg
    }
}

impl ProtocolRegistry {
    pub fn register(&mut self, name: &'static str, needs_lists: bool, factory: ProtocolFactory) {
        self.entries.insert(name, ProtocolEntry { needs_lists, factory });
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<ProtocolEntry> {
        self.entries.get(name).copied().ok_or_else(|| Error::UnknownStrategy {
            kind: "protocol",
            name: name.to_string(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })
    }

    pub fn build(&self, name: &str, lists: Option<ListAssignment>) -> Result<Box<dyn PushProtocol>> {
        (self.get(name)?.factory)(lists)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lists::{realize_lists, ListStrategy};

    fn ctx<'a>(topo: &'a Topology, stream: &'a TrialStream, p: f64) -> AttemptContext<'a> {
        AttemptContext {
            topology: topo,
            stream,
            failure: FailureModel::new(p).unwrap(),
        }
    }

    #[test]
    fn failure_model_domain() {
        assert!(FailureModel::new(0.0).is_err());
        assert!(FailureModel::new(1.5).is_err());
        assert!(FailureModel::new(f64::NAN).is_err());
        assert_eq!(FailureModel::new(1.0).unwrap().p(), 1.0);
    }

    #[test]
    fn quasirandom_walks_the_list_even_on_loss() {
        let topo = Topology::complete(6).unwrap();
        let lists = realize_lists(&topo, ListStrategy::RandomPermutation, 3).unwrap();
        let q = Quasirandom::new(lists.clone());
        let stream = TrialStream::new(5, 0);
        let c = ctx(&topo, &stream, 0.3);
        let mut st = VertexState::default();
        let mut targets = Vec::new();
        for _ in 0..10 {
            targets.push(q.attempt(2, &mut st, &c).target);
            st.ordinal += 1;
        }
        let first = lists.list(2).unwrap().iter().position(|&u| u == targets[0]).unwrap();
        for (j, &t) in targets.iter().enumerate() {
            assert_eq!(t, lists.entry(2, ((first + j) % 5) as u32));
        }
    }

    #[test]
    fn feedback_retries_until_acknowledged() {
        let topo = Topology::complete(5).unwrap();
        let lists = realize_lists(&topo, ListStrategy::CanonicalOrder, 0).unwrap();
        let f = FeedbackRetry::new(lists.clone());
        let stream = TrialStream::new(11, 4);
        let c = ctx(&topo, &stream, 0.5);
        let mut st = VertexState::default();
        let mut distinct = Vec::new();
        let mut repeats = 0;
        for _ in 0..200 {
            let pos_before = st.cursor;
            let a = f.attempt(0, &mut st, &c);
            let acked = a.delivered && stream.bernoulli(0, Purpose::Feedback(st.ordinal), 0.5);
            st.ordinal += 1;
            if distinct.last() != Some(&a.target) {
                distinct.push(a.target);
            } else {
                repeats += 1;
            }
            if pos_before.is_some() && !acked {
                assert_eq!(st.cursor, pos_before);
            }
        }
        assert!(repeats > 0);
        // distinct targets follow the cyclic order
        let start = lists.list(0).unwrap().iter().position(|&u| u == distinct[0]).unwrap();
        for (j, &t) in distinct.iter().enumerate() {
            assert_eq!(t, lists.entry(0, ((start + j) % 4) as u32));
        }
    }

    #[test]
    fn registry_lookup() {
        let reg = ProtocolRegistry::default();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["feedback", "quasi", "random"]);
        assert!(reg.get("quasi").unwrap().needs_lists);
        assert!(reg.build("quasi", None).is_err());
        assert_eq!(reg.build("random", None).unwrap().name(), "random");
        assert!(matches!(reg.get("pull"), Err(Error::UnknownStrategy { .. })));
    }
}
