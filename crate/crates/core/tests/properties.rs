use std::collections::HashMap;

use proptest::prelude::*;

use rumor_core::experiment::{run_experiment, ExperimentConfig};
use rumor_core::lists::{realize_lists, ListStrategy};
use rumor_core::oracle::{exact_fully_random, exact_quasirandom, star_fully_random_expectation};
use rumor_core::protocol::{AttemptContext, FailureModel, FeedbackRetry, FullyRandom, PushProtocol, Quasirandom, VertexState};
use rumor_core::{Engine, StartPolicy, Topology, TopologyKind, TrialStream};

/// Law of T for fully random push on K_n by enumerating every joint
/// (target, coin) outcome of every round.
fn brute_force_fully_random(n: u32, p: f64, horizon: u64) -> Vec<f64> {
    let full = (1u32 << n) - 1;
    let mut dist: HashMap<u32, f64> = HashMap::from([(1, 1.0)]);
    let mut mass = vec![0.0; horizon as usize + 1];
    if n == 1 {
        mass[0] = 1.0;
        return mass;
    }
    for t in 1..=horizon {
        let mut next: HashMap<u32, f64> = HashMap::new();
        for (&mask, &pr) in &dist {
            let senders: Vec<u32> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
            // each sender has (n - 1) targets x {hit, miss}
            let choices = 2 * (n - 1) as usize;
            let combos = choices.pow(senders.len() as u32);
            for mut code in 0..combos {
                let mut out = mask;
                let mut w = pr;
                for &s in &senders {
                    let c = (code % choices) as u32;
                    code /= choices;
                    let (slot, hit) = (c / 2, c.is_multiple_of(2));
                    let target = if slot >= s { slot + 1 } else { slot };
                    w *= if hit { p } else { 1.0 - p } / (n - 1) as f64;
                    if hit {
                        out |= 1 << target;
                    }
                }
                *next.entry(out).or_default() += w;
            }
        }
        mass[t as usize] = next.remove(&full).unwrap_or(0.0);
        dist = next;
    }
    mass
}

#[test]
fn fully_random_oracle_matches_joint_enumeration() {
    for n in 2..=4 {
        for p in [1.0, 0.7, 0.35] {
            let exact = exact_fully_random(n, p, 12).unwrap();
            let brute = brute_force_fully_random(n, p, 12);
            for (t, b) in brute.iter().enumerate() {
                assert!((exact.prob(t as u64) - b).abs() < 1e-12, "n={n} p={p} t={t}");
            }
        }
    }
}

#[test]
fn star_quasirandom_oracle_from_leaf_and_center() {
    let star = Topology::star(5).unwrap();
    let lists = realize_lists(&star, ListStrategy::CanonicalOrder, 0).unwrap();
    // from a leaf: 4 rounds iff the center's first pick is the start's successor
    let leaf = exact_quasirandom(&lists, 1.0, 1, 8).unwrap();
    assert!((leaf.prob(4) - 0.25).abs() < 1e-12);
    assert!((leaf.prob(5) - 0.75).abs() < 1e-12);
    let center = exact_quasirandom(&lists, 1.0, 0, 8).unwrap();
    assert!((center.prob(4) - 1.0).abs() < 1e-12);
}

#[test]
fn star_fully_random_mean_matches_coupon_collector() {
    let expected = star_fully_random_expectation(6).unwrap();
    assert!((expected - (1.0 + 5.0 * (1.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0))).abs() < 1e-12);
    let cfg = ExperimentConfig {
        protocol: "random".into(),
        topology: TopologyKind::Star,
        n: 6,
        p: 1.0,
        start: Some(StartPolicy::Fixed(2)),
        trials: 20_000,
        seed: 17,
        max_rounds: Some(10_000),
        ..Default::default()
    };
    let e = run_experiment(&cfg).unwrap();
    let times = e.completed_times();
    let mean = e.summary.mean.unwrap();
    let var = times.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64;
    let se = (var / times.len() as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected} (se {se})");
}

fn final_informed_at(topo: &Topology, proto: &dyn PushProtocol, p: f64, seed: u64) -> (u64, Vec<u32>) {
    let e = Engine::new(topo, proto, FailureModel::new(p).unwrap(), TrialStream::new(seed, 3));
    let mut s = e.init(0).unwrap();
    while !s.is_complete() && s.round() < 10_000 {
        e.step(&mut s);
    }
    (s.round(), s.informed_at().to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// With shared randomness, raising p can only inform vertices earlier.
    #[test]
    fn higher_success_probability_dominates(n in 2u32..160, lo in 0.05f64..1.0, bump in 0.0f64..1.0, seed in any::<u64>()) {
        let hi = lo + (1.0 - lo) * bump;
        let topo = Topology::complete(n).unwrap();
        let q = Quasirandom::new(realize_lists(&topo, ListStrategy::RandomPermutation, seed).unwrap());
        let protocols: [&dyn PushProtocol; 2] = [&FullyRandom, &q];
        for proto in protocols {
            let (t_lo, at_lo) = final_informed_at(&topo, proto, lo, seed);
            let (t_hi, at_hi) = final_informed_at(&topo, proto, hi, seed);
            prop_assert!(t_hi <= t_lo);
            prop_assert!(at_hi.iter().zip(&at_lo).all(|(h, l)| h <= l));
        }
    }

    #[test]
    fn quasirandom_targets_never_repeat_within_a_sweep(n in 2u32..40, p in 0.05f64..=1.0, seed in any::<u64>(), v in 0u32..40) {
        let topo = Topology::complete(n).unwrap();
        let v = v % n;
        let lists = realize_lists(&topo, ListStrategy::RandomPermutation, seed).unwrap();
        let q = Quasirandom::new(lists.clone());
        let f = FeedbackRetry::new(lists.clone());
        let stream = TrialStream::new(seed, 0);
        let ctx = AttemptContext { topology: &topo, stream: &stream, failure: FailureModel::new(p).unwrap() };
        let attempts = |proto: &dyn PushProtocol| {
            let mut state = VertexState::default();
            (0..4 * (n - 1))
                .map(|_| {
                    let a = proto.attempt(v, &mut state, &ctx);
                    state.ordinal += 1;
                    a.target
                })
                .collect::<Vec<u32>>()
        };
        let deg = (n - 1) as usize;
        let targets = attempts(&q);
        for w in targets.windows(deg) {
            let mut sorted = w.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), deg);
        }
        // feedback retry repeats targets but changes only to the list successor
        let list = lists.list(v).unwrap();
        let pos = |u: u32| list.iter().position(|&x| x == u).unwrap();
        for pair in attempts(&f).windows(2) {
            if pair[0] != pair[1] {
                prop_assert_eq!(pos(pair[1]), (pos(pair[0]) + 1) % deg);
            }
        }
    }
}
