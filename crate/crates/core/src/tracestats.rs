//! Statistics over observed workload traces: worst-case aggregation,
//! rate histograms and bootstrap confidence intervals.
//!
//! Capacity decisions are made against the worst hour ever seen, not the
//! typical one, so multiple observed traces are folded into a single
//! per-hour worst case first. Uncertainty about a statistic of such a trace
//! (its maximum, a quantile) is quantified with the percentile bootstrap.

use crate::{seed, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Element-wise maximum across traces. Traces may differ in length; hours a
/// trace does not cover contribute zero, so the result is as long as the
/// longest trace and never shrinks below any observation.
#[must_use]
pub fn aggregate_worst_case(traces: &[Vec<u32>]) -> Vec<u32> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut worst = vec![0u32; len];
    for trace in traces {
        for (slot, &v) in worst.iter_mut().zip(trace.iter()) {
            *slot = (*slot).max(v);
        }
    }
    worst
}

/// Share of hours (in percent) spent at each distinct rate. An empty trace
/// reads as a trace that is always idle.
#[must_use]
pub fn rate_histogram(trace: &[u32]) -> BTreeMap<u32, f64> {
    if trace.is_empty() {
        return BTreeMap::from([(0, 100.0)]);
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in trace {
        *counts.entry(v).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(v, c)| (v, 100.0 * c as f64 / trace.len() as f64))
        .collect()
}

/// Statistic to bootstrap over a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Max,
    /// Nearest-rank quantile, `q` in [0, 1].
    Quantile(f64),
}

impl Statistic {
    pub fn validate(&self) -> Result<()> {
        if let Statistic::Quantile(q) = self {
            if !(0.0..=1.0).contains(q) {
                return Err(Error::config(format!("quantile {q} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Evaluates the statistic on `data` (need not be sorted; must be
    /// non-empty).
    #[must_use]
    pub fn evaluate(&self, data: &[f64]) -> f64 {
        debug_assert!(!data.is_empty());
        match self {
            Statistic::Max => data.iter().cloned().fold(f64::MIN, f64::max),
            Statistic::Quantile(q) => {
                let mut sorted = data.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                let n = sorted.len();
                let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
                sorted[rank - 1]
            }
        }
    }
}

/// A two-sided percentile-bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Confidence level the interval was built for, e.g. 0.95.
    pub level: f64,
}

fn check_bootstrap_args(data: &[f64], statistic: Statistic, resamples: usize) -> Result<()> {
    statistic.validate()?;
    if data.is_empty() {
        return Err(Error::data("cannot bootstrap an empty trace"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("trace contains non-finite values"));
    }
    if resamples == 0 {
        return Err(Error::config("bootstrap needs at least one resample"));
    }
    Ok(())
}

/// Bootstrap distribution of `statistic`: `resamples` draws with
/// replacement, each scored and returned sorted ascending. Every resample
/// seeds its own RNG from `(seed, index)`, so results are deterministic and
/// independent of evaluation order.
pub fn bootstrap_distribution(
    data: &[f64],
    statistic: Statistic,
    resamples: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    check_bootstrap_args(data, statistic, resamples)?;
    let n = data.len();
    let mut dist: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            use rand::{Rng, SeedableRng};
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(seed::derive(master_seed, i as u64));
            let resample: Vec<f64> = (0..n).map(|_| data[rng.random_range(0..n)]).collect();
            statistic.evaluate(&resample)
        })
        .collect();
    dist.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(dist)
}

/// Percentile-bootstrap confidence interval for `statistic` at `level`
/// (e.g. 0.95 for a 95% interval).
pub fn bootstrap_ci(
    data: &[f64],
    statistic: Statistic,
    resamples: usize,
    level: f64,
    master_seed: u64,
) -> Result<ConfidenceInterval> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::config(format!("confidence level {level} outside (0, 1)")));
    }
    let dist = bootstrap_distribution(data, statistic, resamples, master_seed)?;
    let alpha = 1.0 - level;
    let r = dist.len();
    let lower_idx = ((alpha / 2.0) * r as f64) as usize;
    let upper_idx = (((1.0 - alpha / 2.0) * r as f64) as usize).min(r - 1);
    Ok(ConfidenceInterval {
        lower: dist[lower_idx],
        upper: dist[upper_idx],
        level,
    })
}
