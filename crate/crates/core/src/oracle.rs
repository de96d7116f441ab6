//! Exact broadcast-time distributions on small instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lists::ListAssignment;

pub const FULLY_RANDOM_MAX_N: u32 = 64;
pub const FULLY_RANDOM_MAX_HORIZON: u64 = 10_000;
pub const QUASIRANDOM_MAX_N: u32 = 5;
pub const QUASIRANDOM_MAX_HORIZON: u64 = 8;

/// `P(T = t)` for `t = 0..=horizon`, plus `P(T > horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub horizon: u64,
    pub mass: Vec<f64>,
    pub tail: f64,
}

impl ExactDistribution {
    fn certain(horizon: u64) -> Self {
        let mut mass = vec![0.0; horizon as usize + 1];
        mass[0] = 1.0;
        Self { horizon, mass, tail: 0.0 }
    }

    pub fn prob(&self, t: u64) -> f64 {
        self.mass.get(t as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.tail
    }

    pub fn cdf(&self, t: u64) -> f64 {
        self.mass.iter().take(t as usize + 1).sum()
    }

    /// `E[T]` restricted to the horizon, ignoring the tail mass.
    pub fn truncated_mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(t, m)| t as f64 * m).sum()
    }

    /// Writes `t,probability` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "probability"])?;
        for (t, m) in self.mass.iter().enumerate() {
            w.write_record([t.to_string(), format!("{m:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", p, "success probability must lie in (0, 1]"))
    }
}

/// `P(m -> m + r)` for the fully random protocol on `K_n`, indexed `[m][r]`.
///
/// With `m` informed and `u = n - m` uninformed vertices, the senders act one
/// after another; with `w` targets already claimed this round, the next sender
/// claims a new one with probability `p (u - w) / (n - 1)`.
pub fn fully_random_transitions(n: u32, p: f64) -> Vec<Vec<f64>> {
    let n = n as usize;
    let others = (n - 1) as f64;
    let mut table = vec![Vec::new(); n + 1];
    for (m, row) in table.iter_mut().enumerate().skip(1) {
        let u = n - m;
        let mut dist = vec![0.0; u.min(m) + 1];
        dist[0] = 1.0;
        for sender in 0..m {
            let reach = sender.min(u);
            for w in (0..=reach).rev() {
                let d = dist[w];
                if d == 0.0 {
                    continue;
                }
                let hit = p * (u - w) as f64 / others;
                dist[w] = d * (1.0 - hit);
                if w < u {
                    dist[w + 1] += d * hit;
                }
            }
        }
        *row = dist;
    }
    table
}

/// Broadcast-time law of the fully random protocol on `K_n`, by iterating
/// the chain on the informed count.
pub fn exact_fully_random(n: u32, p: f64, horizon: u64) -> Result<ExactDistribution> {
    check_p(p)?;
    if n == 0 || n > FULLY_RANDOM_MAX_N {
        return Err(Error::param("n", n, "exact fully random oracle supports 1..=64 vertices"));
    }
    if horizon > FULLY_RANDOM_MAX_HORIZON {
        return Err(Error::param("horizon", horizon, "exact fully random oracle supports horizons up to 10^4"));
    }
    if n == 1 {
        return Ok(ExactDistribution::certain(horizon));
    }
    let nu = n as usize;
    let trans = fully_random_transitions(n, p);
    let mut dist = vec![0.0; nu + 1];
    dist[1] = 1.0;
    let mut mass = vec![0.0; horizon as usize + 1];
    for slot in mass.iter_mut().skip(1) {
        let mut next = vec![0.0; nu + 1];
        for m in 1..nu {
            let d = dist[m];
            if d == 0.0 {
                continue;
            }
            for (r, &q) in trans[m].iter().enumerate() {
                next[m + r] += d * q;
            }
        }
        *slot = next[nu];
        next[nu] = 0.0;
        dist = next;
    }
    Ok(ExactDistribution {
        horizon,
        mass,
        tail: dist.iter().sum(),
    })
}

/// Cursor value of a vertex that has not transmitted yet.
const UNSTARTED: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TreeState {
    informed: u8,
    cursors: [u8; QUASIRANDOM_MAX_N as usize],
}

fn accumulate<K: Ord>(map: &mut BTreeMap<K, f64>, key: K, prob: f64) {
    if prob > 0.0 {
        *map.entry(key).or_insert(0.0) += prob;
    }
}

/// Broadcast-time law of the quasirandom protocol on the lists' topology,
/// by enumerating every initial list position and every coin outcome.
/// Identical branches are merged, which keeps the result exact.
pub fn exact_quasirandom(lists: &ListAssignment, p: f64, start: u32, horizon: u64) -> Result<ExactDistribution> {
    check_p(p)?;
    let topo = *lists.topology();
    let n = topo.n();
    if n > QUASIRANDOM_MAX_N {
        return Err(Error::param("n", n, "exact quasirandom oracle supports at most 5 vertices"));
    }
    if horizon > QUASIRANDOM_MAX_HORIZON {
        return Err(Error::param("horizon", horizon, "exact quasirandom oracle supports horizons up to 8"));
    }
    topo.check_vertex(start)?;
    if n == 1 {
        return Ok(ExactDistribution::certain(horizon));
    }
    let full = ((1u16 << n) - 1) as u8;
    let degree: Vec<u32> = (0..n).map(|v| topo.degree(v)).collect::<Result<_>>()?;

    let mut frontier = BTreeMap::new();
    frontier.insert(
        TreeState {
            informed: 1 << start,
            cursors: [UNSTARTED; QUASIRANDOM_MAX_N as usize],
        },
        1.0,
    );
    let mut mass = vec![0.0; horizon as usize + 1];
    for slot in mass.iter_mut().skip(1) {
        let mut level = frontier;
        // senders are the vertices informed at the start of the round
        let mut current: BTreeMap<(u8, TreeState), f64> = BTreeMap::new();
        for (state, prob) in level {
            current.insert((state.informed, state), prob);
        }
        for v in 0..n {
            let mut next = BTreeMap::new();
            for ((senders, state), prob) in current {
                if senders >> v & 1 == 0 {
                    accumulate(&mut next, (senders, state), prob);
                    continue;
                }
                let d = degree[v as usize];
                let cursor = state.cursors[v as usize];
                let positions: Vec<(u32, f64)> = if cursor == UNSTARTED {
                    (0..d).map(|i| (i, 1.0 / d as f64)).collect()
                } else {
                    vec![(cursor as u32, 1.0)]
                };
                for (pos, w) in positions {
                    let mut moved = state;
                    moved.cursors[v as usize] = ((pos + 1) % d) as u8;
                    let target = lists.entry(v, pos);
                    let mut hit = moved;
                    hit.informed |= 1 << target;
                    accumulate(&mut next, (senders, hit), prob * w * p);
                    accumulate(&mut next, (senders, moved), prob * w * (1.0 - p));
                }
            }
            current = next;
        }
        level = BTreeMap::new();
        for ((_, state), prob) in current {
            if state.informed == full {
                *slot += prob;
            } else {
                accumulate(&mut level, state, prob);
            }
        }
        frontier = level;
    }
    Ok(ExactDistribution {
        horizon,
        mass,
        tail: frontier.values().sum(),
    })
}

/// `E[T]` of the fully random protocol on a star from a leaf with `p = 1`:
/// one round to reach the center, then coupon collection of the other leaves.
pub fn star_fully_random_expectation(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::param("n", n, "the star contrast needs at least 3 vertices"));
    }
    let leaves = (n - 1) as f64;
    let harmonic: f64 = (1..=n - 2).map(|j| 1.0 / j as f64).sum();
    Ok(1.0 + leaves * harmonic)
}
