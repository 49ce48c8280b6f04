//! Energy cost accounting over a management trace.
//!
//! For every hour, each physical machine that hosts at least one VM draws
//! `p_idle + util * (p_peak - p_idle)` watts (machines without VMs are
//! suspended and draw nothing). That energy is billed at the local
//! electricity price scaled by the temperature-dependent cooling overhead,
//! and the machine's bill is split equally among the VMs it hosts. Splitting
//! before summing is what makes densely packed service classes cheap per
//! VM-hour and isolated ones expensive.

use super::{effective_prices, series_per_dc, CloudSpec, ManagementTrace, PowerModel};
use crate::geotemporal::GeotemporalSeries;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Cost aggregates produced by [`energy_cost_accounting`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSummary {
    /// Per hour, total cost attributed to each treatment category.
    pub hourly_by_tc: Vec<BTreeMap<String, f64>>,
    /// Whole-horizon cost per treatment category.
    pub total_by_tc: BTreeMap<String, f64>,
    /// Number of placed VM-hours per treatment category.
    pub vm_hours_by_tc: BTreeMap<String, u64>,
    /// Mean cost of one placed VM-hour per treatment category.
    pub vm_hour_avg_by_tc: BTreeMap<String, f64>,
    /// Whole-horizon cost across all categories.
    pub total_usd: f64,
}

/// Prices every hour of `trace` against `series` and `power`, fills the
/// trace's hourly per-category costs, and returns the aggregates.
pub fn energy_cost_accounting(
    spec: &CloudSpec,
    series: &[GeotemporalSeries],
    power: &PowerModel,
    trace: &mut ManagementTrace,
) -> Result<CostSummary> {
    spec.validate()?;
    power.validate()?;
    let per_dc = series_per_dc(spec, series)?;
    let prices = effective_prices(spec, &per_dc);
    let pm_dc = spec.pm_dc_index();
    if trace.placements.len() != spec.horizon_hours {
        return Err(Error::data(format!(
            "trace covers {} hours, spec asks for {}",
            trace.placements.len(),
            spec.horizon_hours
        )));
    }

    let n_pms = spec.total_pms();
    let capacity = spec.pm_capacity as f64;
    let mut hourly_by_tc: Vec<BTreeMap<String, f64>> = Vec::with_capacity(spec.horizon_hours);
    let mut total_by_tc: BTreeMap<String, f64> = BTreeMap::new();
    let mut vm_hours_by_tc: BTreeMap<String, u64> = BTreeMap::new();
    let mut total_usd = 0.0;

    for (hour, placement) in trace.placements.iter().enumerate() {
        if placement.len() != spec.vms.len() {
            return Err(Error::data(format!(
                "hour {hour}: placement has {} entries for {} VMs",
                placement.len(),
                spec.vms.len()
            )));
        }
        // Occupants per PM this hour.
        let mut occupants: Vec<Vec<usize>> = vec![Vec::new(); n_pms];
        for (vm_idx, slot) in placement.iter().enumerate() {
            if let Some(pm) = *slot {
                if pm >= n_pms {
                    return Err(Error::data(format!(
                        "hour {hour}: PM index {pm} out of range"
                    )));
                }
                occupants[pm].push(vm_idx);
            }
        }

        let mut tc_cost: BTreeMap<String, f64> = BTreeMap::new();
        for (pm, vms) in occupants.iter().enumerate() {
            if vms.is_empty() {
                continue;
            }
            let util = vms.len() as f64 / capacity;
            let kwh = power.power_w(util) / 1000.0;
            let pm_cost = kwh * prices[pm_dc[pm]][hour];
            let share = pm_cost / vms.len() as f64;
            for &vm_idx in vms {
                let tc = &spec.vms[vm_idx].tc;
                *tc_cost.entry(tc.clone()).or_insert(0.0) += share;
                *vm_hours_by_tc.entry(tc.clone()).or_insert(0) += 1;
            }
            total_usd += pm_cost;
        }
        for (tc, cost) in &tc_cost {
            *total_by_tc.entry(tc.clone()).or_insert(0.0) += cost;
        }
        hourly_by_tc.push(tc_cost);
    }

    let vm_hour_avg_by_tc = total_by_tc
        .iter()
        .map(|(tc, total)| {
            let hours = *vm_hours_by_tc.get(tc).unwrap_or(&0) as f64;
            (tc.clone(), if hours > 0.0 { total / hours } else { 0.0 })
        })
        .collect();

    trace.hourly_tc_cost = hourly_by_tc.clone();
    Ok(CostSummary {
        hourly_by_tc,
        total_by_tc,
        vm_hours_by_tc,
        vm_hour_avg_by_tc,
        total_usd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudsim::{ppue, DataCenter, VmSpec};
    use crate::geotemporal::Location;
    use approx::assert_relative_eq;
    use chrono::{DateTime, Utc};

    fn start() -> DateTime<Utc> {
        "2024-01-01T00:00:00Z".parse().unwrap()
    }

    /// Temperature at which the cooling overhead multiplier is exactly
    /// `target`, found by bisection on the monotone quadratic.
    fn temp_for_ppue(target: f64) -> f64 {
        let (mut lo, mut hi) = (-50.0, 60.0);
        assert!(ppue(lo) < target && ppue(hi) > target);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ppue(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn flat_series(id: &str, price: f64, temp: f64, hours: usize) -> GeotemporalSeries {
        GeotemporalSeries {
            location_id: id.to_string(),
            start: start(),
            prices_usd_per_kwh: vec![price; hours],
            temps_c: vec![temp; hours],
        }
    }

    fn one_pm_spec(capacity: usize, vms: Vec<VmSpec>) -> CloudSpec {
        CloudSpec {
            data_centers: vec![DataCenter {
                location: Location {
                    id: "dc0".into(),
                    region_offset_hours: 0.0,
                    price_mean_usd_per_kwh: 0.05,
                    temp_mean_c: 20.0,
                },
                pm_count: 1,
            }],
            pm_capacity: capacity,
            vms,
            horizon_hours: 24,
        }
    }

    fn vm(id: &str, tc: &str) -> VmSpec {
        VmSpec {
            id: id.to_string(),
            tc: tc.to_string(),
            memory_bits: 32e9,
        }
    }

    fn static_trace(spec: &CloudSpec, pm: Option<usize>) -> ManagementTrace {
        let mut trace = ManagementTrace::for_spec(spec);
        trace.placements = vec![vec![pm; spec.vms.len()]; spec.horizon_hours];
        trace
    }

    #[test]
    fn one_full_machine_costs_energy_times_overhead_times_price() {
        // A single fully utilised 200 W machine burns 0.2 kWh per hour; at a
        // cooling multiplier of exactly 1.2 and $0.05/kWh that is
        // 0.2 * 1.2 * 0.05 = $0.012 per hour.
        let temp = temp_for_ppue(1.2);
        let spec = one_pm_spec(1, vec![vm("vm0", "tc1")]);
        let series = vec![flat_series("dc0", 0.05, temp, 24)];
        let mut trace = static_trace(&spec, Some(0));
        let summary =
            energy_cost_accounting(&spec, &series, &PowerModel::default(), &mut trace).unwrap();

        assert_relative_eq!(summary.hourly_by_tc[0]["tc1"], 0.012, max_relative = 1e-9);
        assert_relative_eq!(summary.total_by_tc["tc1"], 24.0 * 0.012, max_relative = 1e-9);
        assert_relative_eq!(summary.vm_hour_avg_by_tc["tc1"], 0.012, max_relative = 1e-9);
        assert_eq!(summary.vm_hours_by_tc["tc1"], 24);
        assert_relative_eq!(trace.hourly_tc_cost[5]["tc1"], 0.012, max_relative = 1e-9);
    }

    #[test]
    fn machines_without_vms_cost_nothing() {
        let spec = one_pm_spec(4, vec![vm("vm0", "tc1")]);
        let series = vec![flat_series("dc0", 0.05, 20.0, 24)];
        let mut trace = static_trace(&spec, None); // never placed
        let summary =
            energy_cost_accounting(&spec, &series, &PowerModel::default(), &mut trace).unwrap();
        assert_eq!(summary.total_usd, 0.0);
        assert!(summary.total_by_tc.is_empty());
    }

    #[test]
    fn shared_machine_splits_its_bill_equally() {
        let spec = one_pm_spec(4, vec![vm("a", "tc1"), vm("b", "tc2")]);
        let series = vec![flat_series("dc0", 0.05, 20.0, 24)];
        let mut trace = static_trace(&spec, Some(0));
        let summary =
            energy_cost_accounting(&spec, &series, &PowerModel::default(), &mut trace).unwrap();

        // Half-utilised machine: 100 + 0.5 * 100 = 150 W.
        let pm_hour = 0.150 * ppue(20.0) * 0.05;
        assert_relative_eq!(
            summary.vm_hour_avg_by_tc["tc1"],
            pm_hour / 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            summary.vm_hour_avg_by_tc["tc2"],
            pm_hour / 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(summary.total_usd, 24.0 * pm_hour, max_relative = 1e-12);
    }

    #[test]
    fn cost_is_linear_in_the_electricity_price() {
        let spec = one_pm_spec(2, vec![vm("vm0", "tc1")]);
        let mut t1 = static_trace(&spec, Some(0));
        let mut t2 = static_trace(&spec, Some(0));
        let cheap = vec![flat_series("dc0", 0.05, 25.0, 24)];
        let dear = vec![flat_series("dc0", 0.10, 25.0, 24)];
        let a = energy_cost_accounting(&spec, &cheap, &PowerModel::default(), &mut t1).unwrap();
        let b = energy_cost_accounting(&spec, &dear, &PowerModel::default(), &mut t2).unwrap();
        assert_relative_eq!(b.total_usd, 2.0 * a.total_usd, max_relative = 1e-12);
    }

    #[test]
    fn short_series_is_rejected() {
        let spec = one_pm_spec(1, vec![vm("vm0", "tc1")]);
        let series = vec![flat_series("dc0", 0.05, 20.0, 10)];
        let mut trace = static_trace(&spec, Some(0));
        assert!(
            energy_cost_accounting(&spec, &series, &PowerModel::default(), &mut trace).is_err()
        );
    }
}
