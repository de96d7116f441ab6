//! Complete and star graphs with canonical (ascending id) neighbor indexing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Complete,
    /// Vertex 0 is the center.
    Star,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Star => "star",
        })
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(TopologyKind::Complete),
            "star" => Ok(TopologyKind::Star),
            other => Err(Error::UnknownStrategy {
                kind: "topology",
                name: other.to_string(),
                known: "complete, star".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    kind: TopologyKind,
    n: u32,
}

impl Topology {
    pub fn new(kind: TopologyKind, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", n, "a graph needs at least one vertex"));
        }
        Ok(Self { kind, n })
    }

    pub fn complete(n: u32) -> Result<Self> {
        Self::new(TopologyKind::Complete, n)
    }

    pub fn star(n: u32) -> Result<Self> {
        Self::new(TopologyKind::Star, n)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn check_vertex(&self, v: u32) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n })
        }
    }

    pub fn degree(&self, v: u32) -> Result<u32> {
        self.check_vertex(v)?;
        Ok(self.degree_unchecked(v))
    }

    #[inline]
    pub(crate) fn degree_unchecked(&self, v: u32) -> u32 {
        match self.kind {
            TopologyKind::Complete => self.n - 1,
            TopologyKind::Star if v == 0 => self.n - 1,
            TopologyKind::Star => 1,
        }
    }

    /// The `i`-th neighbor of `v` in ascending id order.
    pub fn neighbor_at(&self, v: u32, i: u32) -> Result<u32> {
        let degree = self.degree(v)?;
        if i >= degree {
            return Err(Error::IndexOutOfRange { vertex: v, index: i, degree });
        }
        Ok(self.neighbor_unchecked(v, i))
    }

    #[inline]
    pub(crate) fn neighbor_unchecked(&self, v: u32, i: u32) -> u32 {
        match self.kind {
            TopologyKind::Complete => {
                if i < v {
                    i
                } else {
                    i + 1
                }
            }
            TopologyKind::Star if v == 0 => i + 1,
            TopologyKind::Star => 0,
        }
    }

    /// Canonical neighbor sequence of `v`.
    pub fn neighbors(&self, v: u32) -> Result<Vec<u32>> {
        let degree = self.degree(v)?;
        Ok((0..degree).map(|i| self.neighbor_unchecked(v, i)).collect())
    }

    /// Inverse of [`Topology::neighbor_at`]: the canonical index of neighbor `u` of `v`.
    pub fn index_of(&self, v: u32, u: u32) -> Option<u32> {
        if v >= self.n || u >= self.n || u == v {
            return None;
        }
        match self.kind {
            TopologyKind::Complete => Some(if u < v { u } else { u - 1 }),
            TopologyKind::Star if v == 0 => Some(u - 1),
            TopologyKind::Star => (u == 0).then_some(0),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.n)
    }
}
