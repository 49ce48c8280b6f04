//! Pre-copy live-migration downtime model.
//!
//! A migration repeatedly copies the dirtied part of a VM's memory while the
//! VM keeps running: the first round transfers the whole memory `v_mem` at
//! link rate `r` while pages are re-dirtied at rate `d`, the next round
//! transfers what was dirtied, and so on until the remainder drops below the
//! stop-and-copy threshold `v_thd`. The VM is then suspended, the remainder
//! is copied, and the VM resumes after `t_resume`.
//!
//! All volumes are in bits and all rates in bits per second, so "4 GB" of
//! memory is `32e9` bits.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Memory and platform parameters of a migrating VM.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DowntimeParams {
    /// VM memory size in bits.
    pub v_mem_bits: f64,
    /// Stop-and-copy threshold in bits; the iterative copy stops once the
    /// remaining dirty volume is at or below this.
    pub v_thd_bits: f64,
    /// Fixed resume overhead in seconds added to every migration.
    pub t_resume_s: f64,
}

impl DowntimeParams {
    /// Validating constructor; requires `0 < v_thd <= v_mem` and
    /// `t_resume >= 0`.
    pub fn new(v_mem_bits: f64, v_thd_bits: f64, t_resume_s: f64) -> Result<Self> {
        if !(v_mem_bits.is_finite() && v_mem_bits > 0.0) {
            return Err(Error::config("v_mem must be positive and finite"));
        }
        if !(v_thd_bits.is_finite() && v_thd_bits > 0.0 && v_thd_bits <= v_mem_bits) {
            return Err(Error::config("v_thd must satisfy 0 < v_thd <= v_mem"));
        }
        if !(t_resume_s.is_finite() && t_resume_s >= 0.0) {
            return Err(Error::config("t_resume must be nonnegative"));
        }
        Ok(Self {
            v_mem_bits,
            v_thd_bits,
            t_resume_s,
        })
    }
}

impl Default for DowntimeParams {
    /// 4 GB of memory, 1 GB stop-and-copy threshold, 5 s resume overhead.
    fn default() -> Self {
        Self {
            v_mem_bits: 32e9,
            v_thd_bits: 8e9,
            t_resume_s: 5.0,
        }
    }
}

/// Per-migration downtime budget, in seconds, assumed when deriving
/// availability guarantees. A deliberately conservative round figure for
/// well-provisioned links; the analytic worst case over the whole rate grid
/// assumes pathologically slow networks and is reported separately.
pub const SLA_MIGRATION_DOWNTIME_S: f64 = 400.0;

/// Result of a worst-case scan over a rate grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorstCase {
    pub downtime_s: f64,
    pub r_bps: f64,
    pub d_bps: f64,
}

fn validate_rates(r_bps: f64, d_bps: f64) -> Result<()> {
    if !(r_bps.is_finite() && r_bps > 0.0) {
        return Err(Error::config("link rate r must be positive and finite"));
    }
    if !(d_bps.is_finite() && d_bps >= 0.0) {
        return Err(Error::config("dirtying rate d must be nonnegative and finite"));
    }
    Ok(())
}

/// Number of pre-copy rounds until the remaining dirty volume is at or below
/// `v_thd`: the smallest `n >= 0` with `v_mem * (d/r)^n <= v_thd`.
///
/// Returns `u64` because a dirtying rate a whisker below the link rate — as
/// produced by adjacent points of a fine log grid — pushes the count past
/// four billion.
///
/// Errors with a non-convergence message when `d >= r` while more than one
/// round would be needed, because the dirty volume then never shrinks.
pub fn rounds(params: &DowntimeParams, r_bps: f64, d_bps: f64) -> Result<u64> {
    validate_rates(r_bps, d_bps)?;
    if params.v_mem_bits <= params.v_thd_bits {
        return Ok(0);
    }
    if d_bps >= r_bps {
        return Err(Error::data(format!(
            "pre-copy does not converge: dirtying rate {d_bps} bit/s >= link rate {r_bps} bit/s"
        )));
    }
    if d_bps == 0.0 {
        return Ok(1);
    }
    let ratio = d_bps / r_bps;
    let target = params.v_thd_bits / params.v_mem_bits;
    // ln_1p on ratio - 1 (an exact subtraction near 1) keeps full precision
    // where d/r rounds to 1 - eps and a plain ln() would lose most of its
    // digits; the estimate must track the very float powf exponentiates,
    // because n runs into the quadrillions there and snapping works in
    // single steps. Both logs are negative, so the quotient is positive.
    let ln_ratio = (ratio - 1.0).ln_1p();
    let mut n = (target.ln() / ln_ratio).ceil().max(0.0) as u64;
    // The estimate lands within a step or two of the true minimum; bounding
    // the snap guards against a libm surprise rather than looping forever.
    let below = |k: u64| params.v_mem_bits * ratio.powf(k as f64) <= params.v_thd_bits;
    let mut budget = 64u32;
    while n > 0 && below(n - 1) {
        n -= 1;
        budget -= 1;
        if budget == 0 {
            return Err(Error::Internal(format!(
                "round count for r={r_bps} bit/s, d={d_bps} bit/s did not stabilize"
            )));
        }
    }
    while !below(n) {
        n += 1;
        budget -= 1;
        if budget == 0 {
            return Err(Error::Internal(format!(
                "round count for r={r_bps} bit/s, d={d_bps} bit/s did not stabilize"
            )));
        }
    }
    Ok(n)
}

/// Downtime in seconds of a single migration: the stop-and-copy transfer of
/// the remainder plus the resume overhead.
///
/// For `d < r` this is `v_mem * d^n / r^(n+1) + t_resume` with `n` from
/// [`rounds`]; for `d >= r` pre-copy is pointless and the migration degrades
/// to a full stop-and-copy, `v_mem / r + t_resume`.
pub fn downtime(params: &DowntimeParams, r_bps: f64, d_bps: f64) -> Result<f64> {
    validate_rates(r_bps, d_bps)?;
    if d_bps >= r_bps {
        return Ok(params.v_mem_bits / r_bps + params.t_resume_s);
    }
    let n = rounds(params, r_bps, d_bps)?;
    // Evaluated as (v_mem / r) * (d/r)^n to stay in range for large n.
    let ratio = d_bps / r_bps;
    Ok(params.v_mem_bits / r_bps * ratio.powf(n as f64) + params.t_resume_s)
}

/// Scans the grid restricted to convergent pairs (`d < r`) and returns the
/// largest downtime together with the rates that produce it. Ties keep the
/// first pair in (r, d) grid order.
pub fn worst_case_downtime(
    params: &DowntimeParams,
    r_grid: &[f64],
    d_grid: &[f64],
) -> Result<WorstCase> {
    let mut worst: Option<WorstCase> = None;
    for &r in r_grid {
        for &d in d_grid {
            if d >= r {
                continue;
            }
            let t = downtime(params, r, d)?;
            if worst.map_or(true, |w| t > w.downtime_s) {
                worst = Some(WorstCase {
                    downtime_s: t,
                    r_bps: r,
                    d_bps: d,
                });
            }
        }
    }
    worst.ok_or_else(|| Error::data("downtime grid contains no convergent (d < r) pair"))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "log_space needs 0 < lo < hi and n >= 2");
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect()
}

/// Default link-rate grid: 10 Mbit/s to 1 Gbit/s, 25 log-spaced points.
pub fn default_r_grid() -> Vec<f64> {
    log_space(10e6, 1e9, 25)
}

/// Default dirtying-rate grid: 1 kbit/s to 1 Gbit/s, 25 log-spaced points.
pub fn default_d_grid() -> Vec<f64> {
    log_space(1e3, 1e9, 25)
}
