//! Cyclic neighbor lists for the quasirandom protocols.
//!
//! Each strategy answers "what is entry `i` of `v`'s list" on demand, so
//! lists on large complete graphs are never materialized. Strategies are
//! registered by name and chosen at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{derive, mix64};
use crate::topology::Topology;

/// A rule that assigns every vertex a cyclic permutation of its neighbors.
pub trait CyclicLists: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Entry `i` of `v`'s list. Callers guarantee `i < degree(v)`.
    fn entry(&self, topology: &Topology, v: u32, i: u32) -> u32;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalOrder;

impl CyclicLists for CanonicalOrder {
    fn name(&self) -> &'static str {
        "canonical"
    }

    fn entry(&self, topology: &Topology, v: u32, i: u32) -> u32 {
        topology.neighbor_unchecked(v, i)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReversedOrder;

impl CyclicLists for ReversedOrder {
    fn name(&self) -> &'static str {
        "reversed"
    }

    fn entry(&self, topology: &Topology, v: u32, i: u32) -> u32 {
        let d = topology.degree_unchecked(v);
        topology.neighbor_unchecked(v, d - 1 - i)
    }
}

/// Per-vertex pseudorandom permutation, a pure function of `(seed, v)`.
///
/// The permutation of `0..degree` is a 4-round Feistel network on the
/// smallest even bit width covering the degree, restricted to the domain by
/// cycle walking.
#[derive(Debug, Clone, Copy)]
pub struct RandomPermutation {
    seed: u64,
}

impl RandomPermutation {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn permute(&self, v: u32, i: u32, domain: u32) -> u32 {
        if domain <= 1 {
            return i;
        }
        let bits = 32 - (domain - 1).leading_zeros();
        let half = bits.max(2).div_ceil(2);
        let mask = (1u64 << half) - 1;
        let key = derive(self.seed, v as u64);
        let round = |x: u64| -> u64 {
            let (mut l, mut r) = (x >> half, x & mask);
            for k in 0..4u64 {
                let f = mix64(key ^ (r << 8) ^ k) & mask;
                (l, r) = (r, l ^ f);
            }
            (l << half) | r
        };
        let mut y = round(i as u64);
        while y >= domain as u64 {
            y = round(y);
        }
        y as u32
    }
}

impl CyclicLists for RandomPermutation {
    fn name(&self) -> &'static str {
        "random"
    }

    fn entry(&self, topology: &Topology, v: u32, i: u32) -> u32 {
        let d = topology.degree_unchecked(v);
        topology.neighbor_unchecked(v, self.permute(v, i, d))
    }
}

/// Lists supplied verbatim, validated against the topology on construction.
#[derive(Debug, Clone)]
pub struct Explicit {
    lists: Vec<Vec<u32>>,
}

impl Explicit {
    pub fn new(topology: &Topology, lists: Vec<Vec<u32>>) -> Result<Self> {
        if lists.len() != topology.n() as usize {
            return Err(Error::InvalidList {
                vertex: lists.len().min(topology.n() as usize) as u32,
                reason: format!("expected {} lists, got {}", topology.n(), lists.len()),
            });
        }
        for (v, list) in lists.iter().enumerate() {
            let v = v as u32;
            let mut sorted = list.clone();
            sorted.sort_unstable();
            let canonical = topology.neighbors(v)?;
            if sorted != canonical {
                return Err(Error::InvalidList {
                    vertex: v,
                    reason: format!("{list:?} is not an ordering of {canonical:?}"),
                });
            }
        }
        Ok(Self { lists })
    }

    /// Parses one list per line (line `v` holds the list of vertex `v`);
    /// entries are separated by commas or whitespace, `#` starts a comment.
    pub fn parse(topology: &Topology, text: &str) -> Result<Self> {
        let mut lists = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let list = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<u32>().map_err(|_| Error::InvalidList {
                        vertex: lists.len() as u32,
                        reason: format!("line {}: `{s}` is not a vertex id", lineno + 1),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            lists.push(list);
        }
        Self::new(topology, lists)
    }
}

impl CyclicLists for Explicit {
    fn name(&self) -> &'static str {
        "file"
    }

    fn entry(&self, _topology: &Topology, v: u32, i: u32) -> u32 {
        self.lists[v as usize][i as usize]
    }
}

/// Builds a list strategy from a seed.
pub type ListFactory = fn(u64) -> Arc<dyn CyclicLists>;

/// Name → factory table for the seedable list strategies.
/// Explicit lists carry data and are built with [`ListAssignment::explicit`].
#[derive(Debug, Clone)]
pub struct ListRegistry {
    factories: BTreeMap<&'static str, ListFactory>,
}

impl Default for ListRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("canonical", |_| Arc::new(CanonicalOrder));
        reg.register("reversed", |_| Arc::new(ReversedOrder));
        reg.register("random", |seed| Arc::new(RandomPermutation::new(seed)));
        reg
    }
}

impl ListRegistry {
    pub fn register(&mut self, name: &'static str, factory: ListFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, name: &str, seed: u64) -> Result<Arc<dyn CyclicLists>> {
        self.factories
            .get(name)
            .map(|f| f(seed))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "list strategy",
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }
}

/// Requested list strategy, prior to realization on a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListStrategy {
    CanonicalOrder,
    ReversedOrder,
    RandomPermutation,
    Explicit(Vec<Vec<u32>>),
}

impl ListStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            ListStrategy::CanonicalOrder => "canonical",
            ListStrategy::ReversedOrder => "reversed",
            ListStrategy::RandomPermutation => "random",
            ListStrategy::Explicit(_) => "file",
        }
    }
}

/// Cyclic lists realized on a particular topology.
#[derive(Debug, Clone)]
pub struct ListAssignment {
    topology: Topology,
    lists: Arc<dyn CyclicLists>,
}

impl ListAssignment {
    pub fn new(topology: Topology, lists: Arc<dyn CyclicLists>) -> Self {
        Self { topology, lists }
    }

    pub fn explicit(topology: Topology, lists: Vec<Vec<u32>>) -> Result<Self> {
        Ok(Self::new(topology, Arc::new(Explicit::new(&topology, lists)?)))
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn strategy_name(&self) -> &'static str {
        self.lists.name()
    }

    #[inline]
    pub fn entry(&self, v: u32, i: u32) -> u32 {
        self.lists.entry(&self.topology, v, i)
    }

    /// Materialized list of `v`.
    pub fn list(&self, v: u32) -> Result<Vec<u32>> {
        let d = self.topology.degree(v)?;
        Ok((0..d).map(|i| self.entry(v, i)).collect())
    }
}

/// Realizes `strategy` on `topology`. Deterministic in `(strategy, seed)`.
pub fn realize_lists(topology: &Topology, strategy: ListStrategy, seed: u64) -> Result<ListAssignment> {
    match strategy {
        ListStrategy::Explicit(lists) => ListAssignment::explicit(*topology, lists),
        other => {
            let lists = ListRegistry::default().build(other.name(), seed)?;
            Ok(ListAssignment::new(*topology, lists))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyKind;
    use proptest::prelude::*;

    fn all_lists(a: &ListAssignment) -> Vec<Vec<u32>> {
        (0..a.topology().n()).map(|v| a.list(v).unwrap()).collect()
    }

    #[test]
    fn canonical_and_reversed_on_k3() {
        let k3 = Topology::complete(3).unwrap();
        let c = realize_lists(&k3, ListStrategy::CanonicalOrder, 0).unwrap();
        assert_eq!(all_lists(&c), vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        let r = realize_lists(&k3, ListStrategy::ReversedOrder, 0).unwrap();
        assert_eq!(all_lists(&r), vec![vec![2, 1], vec![2, 0], vec![1, 0]]);
    }

    #[test]
    fn random_permutation_on_k64_is_a_permutation() {
        let k64 = Topology::complete(64).unwrap();
        let a = realize_lists(&k64, ListStrategy::RandomPermutation, 7).unwrap();
        let mut not_identity = 0;
        for v in 0..64 {
            let list = a.list(v).unwrap();
            let mut sorted = list.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, k64.neighbors(v).unwrap());
            if list != sorted {
                not_identity += 1;
            }
        }
        assert!(not_identity > 60);
    }

    #[test]
    fn explicit_rejects_non_permutations() {
        let k3 = Topology::complete(3).unwrap();
        let bad = vec![vec![1, 1], vec![0, 2], vec![0, 1]];
        assert!(matches!(
            realize_lists(&k3, ListStrategy::Explicit(bad), 0),
            Err(Error::InvalidList { vertex: 0, .. })
        ));
        let self_loop = vec![vec![2, 1], vec![1, 2], vec![0, 1]];
        assert!(matches!(
            realize_lists(&k3, ListStrategy::Explicit(self_loop), 0),
            Err(Error::InvalidList { vertex: 1, .. })
        ));
        assert!(realize_lists(&k3, ListStrategy::Explicit(vec![vec![1, 2]]), 0).is_err());
        let ok = vec![vec![2, 1], vec![0, 2], vec![1, 0]];
        let a = realize_lists(&k3, ListStrategy::Explicit(ok.clone()), 0).unwrap();
        assert_eq!(all_lists(&a), ok);
    }

    #[test]
    fn explicit_parse() {
        let star = Topology::star(4).unwrap();
        let lists = Explicit::parse(&star, "# center first\n3, 1 2\n0\n0\n0\n").unwrap();
        let a = ListAssignment::new(star, Arc::new(lists));
        assert_eq!(a.list(0).unwrap(), vec![3, 1, 2]);
        assert!(Explicit::parse(&star, "3 1 x\n0\n0\n0").is_err());
    }

    #[test]
    fn unknown_strategy_name() {
        let err = ListRegistry::default().build("spiral", 0).unwrap_err();
        assert!(err.to_string().contains("canonical"));
    }

    proptest! {
        #[test]
        fn realized_lists_sort_to_canonical(
            star in any::<bool>(),
            n in 1u32..80,
            seed in any::<u64>(),
            which in 0usize..3,
        ) {
            let kind = if star { TopologyKind::Star } else { TopologyKind::Complete };
            let topo = Topology::new(kind, n).unwrap();
            let strategy = [
                ListStrategy::CanonicalOrder,
                ListStrategy::ReversedOrder,
                ListStrategy::RandomPermutation,
            ][which].clone();
            let a = realize_lists(&topo, strategy.clone(), seed).unwrap();
            let b = realize_lists(&topo, strategy, seed).unwrap();
            for v in 0..n {
                let list = a.list(v).unwrap();
                prop_assert_eq!(&list, &b.list(v).unwrap());
                let mut sorted = list;
                sorted.sort_unstable();
                prop_assert_eq!(sorted, topo.neighbors(v).unwrap());
            }
        }
    }
}
