//! Peak pauser: suspends VMs during the statistically most expensive hours
//! of each day.
//!
//! VMs of a pausing treatment category sit on a fixed round-robin placement
//! and cannot migrate; the only lever is pausing them. For every data center
//! and every day, the policy ranks the 24 hours of the day by their mean
//! effective electricity price over a trailing window of past days and
//! pauses its VMs during the top `round(24 * downtime_fraction)` hours. The
//! first day has no history yet and falls back to its own day's prices.
//! Selection is per data center, so regions with different peak phases pause
//! at different UTC hours.

use super::{effective_prices, series_per_dc, spread_placement, CloudSpec, Event, EventKind, ManagementTrace};
use crate::geotemporal::GeotemporalSeries;
use crate::{Error, Result};

/// Mean effective price of each hour-of-day over the trailing window
/// `[day - window_days, day)`, clipped at the start of the series; day 0
/// uses itself as its own window.
fn hour_of_day_means(dc_prices: &[f64], day: usize, window_days: usize) -> [f64; 24] {
    let (w_start, w_end) = if day == 0 {
        (0, 1)
    } else {
        (day.saturating_sub(window_days), day)
    };
    let mut sums = [0.0f64; 24];
    let mut counts = [0usize; 24];
    for d in w_start..w_end {
        for (hod, (sum, count)) in sums.iter_mut().zip(counts.iter_mut()).enumerate() {
            if let Some(p) = dc_prices.get(d * 24 + hod) {
                *sum += p;
                *count += 1;
            }
        }
    }
    let mut means = [0.0f64; 24];
    for hod in 0..24 {
        if counts[hod] > 0 {
            means[hod] = sums[hod] / counts[hod] as f64;
        }
    }
    means
}

/// The `k` most expensive hours of the day given per-hour means; ties go to
/// the earlier hour so the choice is deterministic.
fn top_k_hours(means: &[f64; 24], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..24).collect();
    order.sort_by(|&a, &b| {
        means[b]
            .partial_cmp(&means[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k.min(24));
    order
}

/// Runs the pausing policy over the whole horizon. `downtime_fraction` is
/// the target fraction of time spent paused (rounded to whole hours per
/// day); `window_days` is the length of the trailing price statistic.
/// Fully deterministic.
pub fn run_peak_pauser(
    spec: &CloudSpec,
    series: &[GeotemporalSeries],
    downtime_fraction: f64,
    window_days: usize,
) -> Result<ManagementTrace> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&downtime_fraction) {
        return Err(Error::config(format!(
            "downtime fraction {downtime_fraction} outside [0, 1]"
        )));
    }
    if window_days == 0 {
        return Err(Error::config("price statistic window must cover at least one day"));
    }
    let per_dc = series_per_dc(spec, series)?;
    let prices = effective_prices(spec, &per_dc);
    let k = (24.0 * downtime_fraction).round() as usize;

    let placement = spread_placement(spec);
    let pm_dc = spec.pm_dc_index();
    let vm_dc: Vec<usize> = placement.iter().map(|&pm| pm_dc[pm]).collect();
    let days = spec.horizon_hours.div_ceil(24);

    // paused[dc][hour]
    let mut paused = vec![vec![false; spec.horizon_hours]; spec.data_centers.len()];
    for (dc, dc_prices) in prices.iter().enumerate() {
        for day in 0..days {
            let means = hour_of_day_means(dc_prices, day, window_days);
            for hod in top_k_hours(&means, k) {
                let hour = day * 24 + hod;
                if hour < spec.horizon_hours {
                    paused[dc][hour] = true;
                }
            }
        }
    }

    let mut trace = ManagementTrace::for_spec(spec);
    for hour in 0..spec.horizon_hours {
        trace.placements[hour] = (0..spec.vms.len())
            .map(|vm| {
                if paused[vm_dc[vm]][hour] {
                    None
                } else {
                    Some(placement[vm])
                }
            })
            .collect();
    }
    for hour in 1..spec.horizon_hours {
        for vm in 0..spec.vms.len() {
            let kind = match (
                trace.placements[hour - 1][vm],
                trace.placements[hour][vm],
            ) {
                (Some(_), None) => Some(EventKind::Pause),
                (None, Some(_)) => Some(EventKind::Resume),
                _ => None,
            };
            if let Some(kind) = kind {
                trace.events.push(Event { hour, vm, kind });
            }
        }
    }
    Ok(trace)
}
