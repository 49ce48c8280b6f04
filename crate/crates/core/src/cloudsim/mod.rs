//! Hourly cloud simulation of energy-aware management policies.
//!
//! A [`CloudSpec`] describes data centers (each pinned to a geotemporal
//! location), physical machines and VMs. Two policies produce a
//! [`ManagementTrace`]: a genetic live-migration scheduler
//! ([`run_migration_scheduler`]) that chases cheap effective electricity
//! across data centers, and a peak pauser ([`run_peak_pauser`]) that pauses
//! its VMs during the daily hours that are statistically the most expensive.
//! [`energy_cost_accounting`] then prices the trace hour by hour.

mod accounting;
mod ga;
mod pauser;

pub use accounting::{energy_cost_accounting, CostSummary};
pub use ga::{run_migration_scheduler, GaParams};
pub use pauser::run_peak_pauser;

use crate::geotemporal::{GeotemporalSeries, Location};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// One data center: a location (with its price and temperature series) and a
/// number of identical physical machines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataCenter {
    pub location: Location,
    pub pm_count: usize,
}

/// A VM to host: identity, treatment category and memory size in bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmSpec {
    pub id: String,
    pub tc: String,
    pub memory_bits: f64,
}

/// Static description of the simulated cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudSpec {
    pub data_centers: Vec<DataCenter>,
    /// VM slots per physical machine; utilization is hosted VMs / capacity.
    pub pm_capacity: usize,
    pub vms: Vec<VmSpec>,
    pub horizon_hours: usize,
}

impl CloudSpec {
    /// Total physical machines across all data centers.
    #[must_use]
    pub fn total_pms(&self) -> usize {
        self.data_centers.iter().map(|dc| dc.pm_count).sum()
    }

    /// Data-center index of each PM, PMs numbered consecutively per DC.
    #[must_use]
    pub fn pm_dc_index(&self) -> Vec<usize> {
        let mut map = Vec::with_capacity(self.total_pms());
        for (dc_idx, dc) in self.data_centers.iter().enumerate() {
            map.extend(std::iter::repeat(dc_idx).take(dc.pm_count));
        }
        map
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_centers.is_empty() {
            return Err(Error::config("cloud spec needs at least one data center"));
        }
        if self.data_centers.iter().any(|dc| dc.pm_count == 0) {
            return Err(Error::config("every data center needs at least one PM"));
        }
        if self.pm_capacity == 0 {
            return Err(Error::config("pm_capacity must be at least 1"));
        }
        if self.vms.is_empty() {
            return Err(Error::config("cloud spec needs at least one VM"));
        }
        if self.horizon_hours < 24 {
            return Err(Error::config("horizon must cover at least one day"));
        }
        let slots = self.total_pms() * self.pm_capacity;
        if slots < self.vms.len() {
            return Err(Error::config(format!(
                "{} VMs do not fit into {} slots",
                self.vms.len(),
                slots
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for vm in &self.vms {
            if !seen.insert(vm.id.as_str()) {
                return Err(Error::config(format!("duplicate vm id {}", vm.id)));
            }
        }
        Ok(())
    }
}

/// Linear PM power model between idle and peak draw.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModel {
    pub p_idle_w: f64,
    pub p_peak_w: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_idle_w: 100.0,
            p_peak_w: 200.0,
        }
    }
}

impl PowerModel {
    /// Electrical draw in watts at `util` in [0, 1]. A PM hosting no VMs is
    /// suspended and draws nothing; that case is handled by the accounting,
    /// not here.
    #[must_use]
    pub fn power_w(&self, util: f64) -> f64 {
        self.p_idle_w + util.clamp(0.0, 1.0) * (self.p_peak_w - self.p_idle_w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_idle_w >= 0.0 && self.p_peak_w >= self.p_idle_w) {
            return Err(Error::config("power model needs 0 <= p_idle <= p_peak"));
        }
        Ok(())
    }
}

/// Partial PUE of the cooling infrastructure as a function of outside
/// temperature in Celsius; quadratic fit for an air-economized data center.
#[must_use]
pub fn ppue(temp_c: f64) -> f64 {
    7.1705e-5 * temp_c * temp_c + 4.1e-3 * temp_c + 1.0743
}

/// What happened to one VM at one hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Migrate { src_pm: usize, dst_pm: usize },
    Pause,
    Resume,
}

/// A management action; `hour` is the hour at whose start it takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub hour: usize,
    pub vm: usize,
    pub kind: EventKind,
}

/// Output of a policy run: per-hour placements, the action log and (after
/// accounting) per-hour energy cost per treatment category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManagementTrace {
    /// VM ids, index-aligned with all per-VM vectors.
    pub vm_ids: Vec<String>,
    /// Treatment category of each VM.
    pub vm_tcs: Vec<String>,
    pub horizon_hours: usize,
    pub events: Vec<Event>,
    /// `placements[hour][vm]` is the PM hosting the VM, `None` while paused.
    pub placements: Vec<Vec<Option<usize>>>,
    /// `hourly_tc_cost[hour][tc]` in USD; empty until accounting ran.
    pub hourly_tc_cost: Vec<BTreeMap<String, f64>>,
}

impl ManagementTrace {
    /// Trace with no VMs and no events, useful as a neutral baseline.
    #[must_use]
    pub fn empty(horizon_hours: usize) -> Self {
        Self {
            vm_ids: Vec::new(),
            vm_tcs: Vec::new(),
            horizon_hours,
            events: Vec::new(),
            placements: vec![Vec::new(); horizon_hours],
            hourly_tc_cost: Vec::new(),
        }
    }

    /// Trace skeleton for `spec`: VM identities filled in, no events, and an
    /// all-paused placement matrix for policies to overwrite.
    #[must_use]
    pub fn for_spec(spec: &CloudSpec) -> Self {
        Self {
            vm_ids: spec.vms.iter().map(|v| v.id.clone()).collect(),
            vm_tcs: spec.vms.iter().map(|v| v.tc.clone()).collect(),
            horizon_hours: spec.horizon_hours,
            events: Vec::new(),
            placements: vec![vec![None; spec.vms.len()]; spec.horizon_hours],
            hourly_tc_cost: Vec::new(),
        }
    }

    /// Per-VM fraction of the horizon spent unpaused.
    #[must_use]
    pub fn measured_availability(&self) -> Vec<f64> {
        let n = self.vm_ids.len();
        let mut up = vec![0usize; n];
        for hour in &self.placements {
            for (vm, pm) in hour.iter().enumerate() {
                if pm.is_some() {
                    up[vm] += 1;
                }
            }
        }
        up.iter()
            .map(|&u| u as f64 / self.horizon_hours as f64)
            .collect()
    }

    /// Checks structural consistency against the spec: placements cover the
    /// horizon, capacity is respected, and migrate/pause/resume events agree
    /// with the placement matrix. Used heavily by tests.
    pub fn validate(&self, spec: &CloudSpec) -> Result<()> {
        let n_pms = spec.total_pms();
        if self.placements.len() != self.horizon_hours {
            return Err(Error::Internal("placement rows != horizon".into()));
        }
        for (h, row) in self.placements.iter().enumerate() {
            if row.len() != self.vm_ids.len() {
                return Err(Error::Internal(format!("placement row {h} has wrong width")));
            }
            let mut counts = vec![0usize; n_pms];
            for pm in row.iter().flatten() {
                if *pm >= n_pms {
                    return Err(Error::Internal(format!("pm index {pm} out of range at hour {h}")));
                }
                counts[*pm] += 1;
            }
            if counts.iter().any(|&c| c > spec.pm_capacity) {
                return Err(Error::Internal(format!("capacity violated at hour {h}")));
            }
        }
        for (idx, w) in self.placements.windows(2).enumerate() {
            let (prev, cur) = (&w[0], &w[1]);
            let hour = idx + 1;
            for vm in 0..self.vm_ids.len() {
                match (prev[vm], cur[vm]) {
                    (Some(a), Some(b)) if a != b => {
                        let found = self.events.iter().any(|e| {
                            e.vm == vm
                                && e.hour == hour
                                && e.kind == EventKind::Migrate { src_pm: a, dst_pm: b }
                        });
                        if !found {
                            return Err(Error::Internal(format!(
                                "vm {vm} moved {a}->{b} at hour {hour} without a migrate event"
                            )));
                        }
                    }
                    (Some(_), None) => {
                        let found = self
                            .events
                            .iter()
                            .any(|e| e.vm == vm && e.hour == hour && e.kind == EventKind::Pause);
                        if !found {
                            return Err(Error::Internal(format!(
                                "vm {vm} paused at hour {hour} without a pause event"
                            )));
                        }
                    }
                    (None, Some(_)) => {
                        let found = self
                            .events
                            .iter()
                            .any(|e| e.vm == vm && e.hour == hour && e.kind == EventKind::Resume);
                        if !found {
                            return Err(Error::Internal(format!(
                                "vm {vm} resumed at hour {hour} without a resume event"
                            )));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Number of migrate events per VM within `[from_hour, to_hour)`.
    #[must_use]
    pub fn migrations_per_vm(&self, from_hour: usize, to_hour: usize) -> Vec<u32> {
        let mut counts = vec![0u32; self.vm_ids.len()];
        for e in &self.events {
            if e.hour >= from_hour && e.hour < to_hour {
                if let EventKind::Migrate { .. } = e.kind {
                    counts[e.vm] += 1;
                }
            }
        }
        counts
    }
}

/// Looks up the series for every data center (matched by location id) and
/// checks that each covers the horizon.
pub(crate) fn series_per_dc<'a>(
    spec: &CloudSpec,
    series: &'a [GeotemporalSeries],
) -> Result<Vec<&'a GeotemporalSeries>> {
    spec.data_centers
        .iter()
        .map(|dc| {
            let s = series
                .iter()
                .find(|s| s.location_id == dc.location.id)
                .ok_or_else(|| {
                    Error::data(format!("no geotemporal series for location {}", dc.location.id))
                })?;
            if s.len() < spec.horizon_hours {
                return Err(Error::data(format!(
                    "series for {} covers {} hours, horizon needs {}",
                    dc.location.id,
                    s.len(),
                    spec.horizon_hours
                )));
            }
            Ok(s)
        })
        .collect()
}

/// Effective unit price per kWh (electricity price times cooling overhead)
/// per data center and hour; the quantity every policy minimizes against.
pub(crate) fn effective_prices(
    spec: &CloudSpec,
    series: &[&GeotemporalSeries],
) -> Vec<Vec<f64>> {
    series
        .iter()
        .map(|s| {
            (0..spec.horizon_hours)
                .map(|h| s.prices_usd_per_kwh[h] * ppue(s.temps_c[h]))
                .collect()
        })
        .collect()
}

/// Round-robin spread of VMs over all PMs, the placement a cloud without
/// energy-aware management would keep. Deterministic.
pub(crate) fn spread_placement(spec: &CloudSpec) -> Vec<usize> {
    let n_pms = spec.total_pms();
    let mut counts = vec![0usize; n_pms];
    let mut placement = Vec::with_capacity(spec.vms.len());
    for vm in 0..spec.vms.len() {
        let mut pm = vm % n_pms;
        // Wrap until a free slot shows up; total slots are validated to suffice.
        while counts[pm] >= spec.pm_capacity {
            pm = (pm + 1) % n_pms;
        }
        counts[pm] += 1;
        placement.push(pm);
    }
    placement
}

fn write_or_io<P: AsRef<Path>>(path: P, body: String) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes the action log as `hour,vm_id,event,src_pm,dst_pm`.
pub fn write_events_csv<P: AsRef<Path>>(trace: &ManagementTrace, path: P) -> Result<()> {
    let mut out = String::from("hour,vm_id,event,src_pm,dst_pm\n");
    for e in &trace.events {
        let vm = &trace.vm_ids[e.vm];
        match e.kind {
            EventKind::Migrate { src_pm, dst_pm } => {
                out.push_str(&format!("{},{},migrate,pm-{},pm-{}\n", e.hour, vm, src_pm, dst_pm));
            }
            EventKind::Pause => out.push_str(&format!("{},{},pause,,\n", e.hour, vm)),
            EventKind::Resume => out.push_str(&format!("{},{},resume,,\n", e.hour, vm)),
        }
    }
    write_or_io(path, out)
}

/// Writes the placement matrix as `hour,vm_id,pm_id` with `PAUSED` for
/// paused VMs.
pub fn write_placements_csv<P: AsRef<Path>>(trace: &ManagementTrace, path: P) -> Result<()> {
    let mut out = String::from("hour,vm_id,pm_id\n");
    for (h, row) in trace.placements.iter().enumerate() {
        for (vm, pm) in row.iter().enumerate() {
            match pm {
                Some(pm) => out.push_str(&format!("{},{},pm-{}\n", h, trace.vm_ids[vm], pm)),
                None => out.push_str(&format!("{},{},PAUSED\n", h, trace.vm_ids[vm])),
            }
        }
    }
    write_or_io(path, out)
}

/// Writes accounted costs as `hour,tc_id,cost_usd`.
pub fn write_costs_csv<P: AsRef<Path>>(trace: &ManagementTrace, path: P) -> Result<()> {
    let mut out = String::from("hour,tc_id,cost_usd\n");
    for (h, per_tc) in trace.hourly_tc_cost.iter().enumerate() {
        for (tc, cost) in per_tc {
            out.push_str(&format!("{h},{tc},{cost:.9}\n"));
        }
    }
    write_or_io(path, out)
}
