//! Summary statistics over broadcast times and bootstrap ratio intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub rounds: u64,
    pub cdf: f64,
}

/// Ratio of a candidate experiment to a baseline, with 95% bootstrap intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub median_ratio: f64,
    pub median_ratio_ci: [f64; 2],
    pub mean_ratio: f64,
    pub mean_ratio_ci: [f64; 2],
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub trials: u64,
    pub completed: u64,
    pub completion_rate: f64,
    /// Order statistics of the broadcast time over completed trials;
    /// `None` when nothing completed.
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p95: Option<f64>,
    pub max: Option<f64>,
    pub ecdf: Vec<EcdfPoint>,
    /// Present when this summary is the candidate side of a comparison.
    pub ratios: Option<RatioStats>,
}

pub fn mean(xs: &[u64]) -> f64 {
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

/// Median of a sorted slice (midpoint for even lengths).
pub fn median_sorted(xs: &[u64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] as f64 + xs[n / 2] as f64) / 2.0
    }
}

/// Nearest-rank quantile of a sorted slice.
pub fn quantile_sorted(xs: &[u64], q: f64) -> f64 {
    let rank = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1] as f64
}

fn median_unsorted(xs: &mut [u64]) -> f64 {
    let n = xs.len();
    let (_, &mut hi, _) = xs.select_nth_unstable(n / 2);
    if n % 2 == 1 {
        hi as f64
    } else {
        let lo = *xs[..n / 2].iter().max().expect("n >= 2");
        (lo as f64 + hi as f64) / 2.0
    }
}

impl SummaryStats {
    /// `times` holds the broadcast times of the completed trials out of `trials`.
    pub fn from_times(trials: u64, times: &[u64]) -> Self {
        let mut sorted = times.to_vec();
        sorted.sort_unstable();
        let completed = sorted.len() as u64;
        let mut ecdf = Vec::new();
        for (i, &t) in sorted.iter().enumerate() {
            if sorted.get(i + 1) != Some(&t) {
                ecdf.push(EcdfPoint {
                    rounds: t,
                    cdf: (i + 1) as f64 / completed as f64,
                });
            }
        }
        let nonempty = !sorted.is_empty();
        Self {
            trials,
            completed,
            completion_rate: if trials == 0 { 0.0 } else { completed as f64 / trials as f64 },
            min: nonempty.then(|| sorted[0] as f64),
            mean: nonempty.then(|| mean(&sorted)),
            median: nonempty.then(|| median_sorted(&sorted)),
            p95: nonempty.then(|| quantile_sorted(&sorted, 0.95)),
            max: nonempty.then(|| sorted[sorted.len() - 1] as f64),
            ecdf,
            ratios: None,
        }
    }
}

fn percentile_interval(mut xs: Vec<f64>) -> [f64; 2] {
    xs.sort_by(f64::total_cmp);
    let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
    [at(0.025), at(0.975)]
}

/// Candidate/baseline ratios of medians and means, with percentile bootstrap
/// intervals from `resamples` independent resamplings of both samples.
/// Returns `None` if either sample is empty.
pub fn bootstrap_ratios(baseline: &[u64], candidate: &[u64], resamples: usize, seed: u64) -> Option<RatioStats> {
    if baseline.is_empty() || candidate.is_empty() {
        return None;
    }
    let mut a = baseline.to_vec();
    let mut b = candidate.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let median_ratio = median_sorted(&b) / median_sorted(&a);
    let mean_ratio = mean(&b) / mean(&a);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medians = Vec::with_capacity(resamples);
    let mut means = Vec::with_capacity(resamples);
    let mut ra = vec![0u64; a.len()];
    let mut rb = vec![0u64; b.len()];
    for _ in 0..resamples {
        for x in ra.iter_mut() {
            *x = a[rng.random_range(0..a.len())];
        }
        for x in rb.iter_mut() {
            *x = b[rng.random_range(0..b.len())];
        }
        means.push(mean(&rb) / mean(&ra));
        medians.push(median_unsorted(&mut rb) / median_unsorted(&mut ra));
    }
    Some(RatioStats {
        median_ratio,
        median_ratio_ci: percentile_interval(medians),
        mean_ratio,
        mean_ratio_ci: percentile_interval(means),
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_basics() {
        let s = SummaryStats::from_times(5, &[4, 2, 2, 9]);
        assert_eq!(s.completed, 4);
        assert_eq!(s.completion_rate, 0.8);
        assert_eq!(s.min, Some(2.0));
        assert_eq!(s.median, Some(3.0));
        assert_eq!(s.mean, Some(4.25));
        assert_eq!(s.p95, Some(9.0));
        assert_eq!(s.max, Some(9.0));
        assert_eq!(
            s.ecdf,
            vec![
                EcdfPoint { rounds: 2, cdf: 0.5 },
                EcdfPoint { rounds: 4, cdf: 0.75 },
                EcdfPoint { rounds: 9, cdf: 1.0 },
            ]
        );
        let empty = SummaryStats::from_times(3, &[]);
        assert_eq!(empty.completion_rate, 0.0);
        assert_eq!(empty.median, None);
    }

    #[test]
    fn identical_samples_have_unit_ratio() {
        let xs: Vec<u64> = (0..200).map(|i| 20 + i % 7).collect();
        let r = bootstrap_ratios(&xs, &xs, 500, 1).unwrap();
        assert_eq!(r.median_ratio, 1.0);
        assert_eq!(r.mean_ratio, 1.0);
        assert!(r.median_ratio_ci[0] <= 1.0 && r.median_ratio_ci[1] >= 1.0);
        assert!(bootstrap_ratios(&[], &xs, 10, 1).is_none());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let a: Vec<u64> = (0..100).map(|i| 10 + i % 5).collect();
        let b: Vec<u64> = (0..100).map(|i| 18 + i % 9).collect();
        assert_eq!(bootstrap_ratios(&a, &b, 300, 9), bootstrap_ratios(&a, &b, 300, 9));
        let r = bootstrap_ratios(&a, &b, 300, 9).unwrap();
        assert!(r.mean_ratio_ci[0] <= r.mean_ratio && r.mean_ratio <= r.mean_ratio_ci[1]);
    }

    proptest! {
        #[test]
        fn order_statistics_are_ordered(times in proptest::collection::vec(0u64..500, 1..200)) {
            let s = SummaryStats::from_times(times.len() as u64 + 3, &times);
            let (min, med, p95, max) = (s.min.unwrap(), s.median.unwrap(), s.p95.unwrap(), s.max.unwrap());
            prop_assert!(min <= med && med <= p95 && p95 <= max);
            prop_assert!((0.0..=1.0).contains(&s.completion_rate));
            prop_assert_eq!(s.ecdf.last().unwrap().cdf, 1.0);
            let mut scratch = times.clone();
            let mut sorted = times.clone();
            sorted.sort_unstable();
            prop_assert_eq!(median_unsorted(&mut scratch), median_sorted(&sorted));
        }
    }
}
