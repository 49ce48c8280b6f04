//! TOML pipeline configuration.
//!
//! Every knob has a default, so `greensla pipeline` runs without any config
//! file. A file overrides the defaults section by section; command-line
//! flags override the file. Unknown keys are rejected so typos fail loudly
//! instead of silently running with defaults.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use greensla_core::cloudsim::{CloudSpec, DataCenter, GaParams, PowerModel, VmSpec};
use greensla_core::downtime::{log_space, DowntimeParams, SLA_MIGRATION_DOWNTIME_S};
use greensla_core::geotemporal::{Location, SynthParams};
use greensla_core::selection::{SelectionConfig, SweepParams};
use greensla_core::users::PopulationParams;
use greensla_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Configuration for the whole pipeline; each section falls back to its
/// default when omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stochastic stage derives its own stream from it.
    pub master_seed: u64,
    pub geotemporal: GeoConfig,
    pub cloud: CloudConfig,
    pub power: PowerModel,
    pub ga: GaParams,
    pub pauser: PauserConfig,
    pub downtime: DowntimeConfig,
    pub catalog: CatalogConfig,
    pub workloads: WorkloadConfig,
    pub population: PopulationParams,
    pub selection: SelectionConfig,
    pub sweep: SweepParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            geotemporal: GeoConfig::default(),
            cloud: CloudConfig::default(),
            power: PowerModel::default(),
            ga: GaParams::default(),
            pauser: PauserConfig::default(),
            downtime: DowntimeConfig::default(),
            catalog: CatalogConfig::default(),
            workloads: WorkloadConfig::default(),
            population: PopulationParams::default(),
            selection: SelectionConfig::default(),
            sweep: SweepParams::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads the file when given, otherwise returns the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Checks every section once, up front, so stages can assume a sane
    /// configuration.
    pub fn validate(&self) -> Result<()> {
        self.geotemporal.validate()?;
        self.cloud.validate()?;
        // Building a spec exercises the cross-field checks (capacity vs VM
        // count, series coverage comes later).
        self.cloud.spec("sla1", self.geotemporal.hours).validate()?;
        self.power.validate()?;
        self.ga.validate()?;
        self.pauser.validate()?;
        self.downtime.validate()?;
        self.catalog.validate()?;
        self.workloads.validate()?;
        self.population.validate()?;
        self.selection.validate()?;
        self.sweep.validate()?;
        Ok(())
    }
}

/// Price and temperature series: either synthesised or loaded from a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Measured series to load instead of synthesising. Must cover every
    /// configured data center for the whole horizon.
    pub input_csv: Option<PathBuf>,
    /// Management horizon in hours; whole days only.
    pub hours: usize,
    /// UTC start of the series, RFC 3339.
    pub start: String,
    pub synth: SynthParams,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            input_csv: None,
            hours: 336,
            start: "2025-01-01T00:00:00Z".into(),
            // Slightly stronger daily swing than the library default: the
            // pipeline models day-ahead spot markets, where a 35% intraday
            // amplitude is unremarkable.
            synth: SynthParams {
                price_daily_amplitude: 0.35,
                ..SynthParams::default()
            },
        }
    }
}

impl GeoConfig {
    pub fn start_utc(&self) -> Result<DateTime<Utc>> {
        self.start
            .parse()
            .map_err(|e| Error::Config(format!("geotemporal start `{}`: {e}", self.start)))
    }

    pub fn validate(&self) -> Result<()> {
        self.start_utc()?;
        if self.hours < 24 || self.hours % 24 != 0 {
            return Err(Error::Config(format!(
                "horizon must be a positive multiple of 24 hours, got {}",
                self.hours
            )));
        }
        Ok(())
    }
}

/// One data center: its location and how many machines it runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenterConfig {
    pub id: String,
    pub region_offset_hours: f64,
    pub price_mean_usd_per_kwh: f64,
    pub temp_mean_c: f64,
    pub pm_count: usize,
}

impl DataCenterConfig {
    pub fn location(&self) -> Location {
        Location {
            id: self.id.clone(),
            region_offset_hours: self.region_offset_hours,
            price_mean_usd_per_kwh: self.price_mean_usd_per_kwh,
            temp_mean_c: self.temp_mean_c,
        }
    }
}

/// Simulated cloud topology and the managed VM fleet.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    /// VM slots per physical machine.
    pub pm_capacity: usize,
    /// VMs managed by every policy run.
    pub vm_count: usize,
    pub vm_memory_bits: f64,
    pub data_centers: Vec<DataCenterConfig>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            pm_capacity: 4,
            vm_count: 64,
            vm_memory_bits: 32e9,
            data_centers: vec![
                DataCenterConfig {
                    id: "us-east".into(),
                    region_offset_hours: -5.0,
                    price_mean_usd_per_kwh: 0.085,
                    temp_mean_c: 14.0,
                    pm_count: 12,
                },
                DataCenterConfig {
                    id: "eu-central".into(),
                    region_offset_hours: 1.0,
                    price_mean_usd_per_kwh: 0.115,
                    temp_mean_c: 9.0,
                    pm_count: 12,
                },
                DataCenterConfig {
                    id: "ap-southeast".into(),
                    region_offset_hours: 8.0,
                    price_mean_usd_per_kwh: 0.095,
                    temp_mean_c: 27.0,
                    pm_count: 12,
                },
            ],
        }
    }
}

impl CloudConfig {
    /// Cloud spec with every VM in the given treatment category.
    pub fn spec(&self, tc: &str, horizon_hours: usize) -> CloudSpec {
        CloudSpec {
            data_centers: self
                .data_centers
                .iter()
                .map(|d| DataCenter {
                    location: d.location(),
                    pm_count: d.pm_count,
                })
                .collect(),
            pm_capacity: self.pm_capacity,
            vms: (0..self.vm_count)
                .map(|i| VmSpec {
                    id: format!("vm-{i}"),
                    tc: tc.into(),
                    memory_bits: self.vm_memory_bits,
                })
                .collect(),
            horizon_hours,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_centers.is_empty() {
            return Err(Error::Config("at least one data center is required".into()));
        }
        if self.vm_count == 0 {
            return Err(Error::Config("vm_count must be positive".into()));
        }
        Ok(())
    }
}

/// Peak-pausing policy knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauserConfig {
    /// Trailing days of effective prices used to rank the hours of the day.
    pub window_days: usize,
}

impl Default for PauserConfig {
    fn default() -> Self {
        Self { window_days: 3 }
    }
}

impl PauserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_days == 0 {
            return Err(Error::Config("pauser window must cover at least one day".into()));
        }
        Ok(())
    }
}

/// Migration downtime model and the rate grids it is scanned over.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DowntimeConfig {
    pub v_mem_bits: f64,
    pub v_thd_bits: f64,
    pub t_resume_s: f64,
    pub r_grid_min_bps: f64,
    pub r_grid_max_bps: f64,
    pub r_grid_points: usize,
    pub d_grid_min_bps: f64,
    pub d_grid_max_bps: f64,
    pub d_grid_points: usize,
    /// Worst-case migrations per day the SLA promises to stay under.
    pub budget_migrations_per_day: f64,
    /// Contractual downtime charged per migration, seconds.
    pub budget_downtime_s: f64,
}

impl Default for DowntimeConfig {
    fn default() -> Self {
        Self {
            v_mem_bits: 32e9,
            v_thd_bits: 8e9,
            t_resume_s: 5.0,
            r_grid_min_bps: 10e6,
            r_grid_max_bps: 1e9,
            r_grid_points: 25,
            d_grid_min_bps: 1e3,
            d_grid_max_bps: 1e9,
            d_grid_points: 25,
            budget_migrations_per_day: 4.0,
            budget_downtime_s: SLA_MIGRATION_DOWNTIME_S,
        }
    }
}

impl DowntimeConfig {
    pub fn params(&self) -> Result<DowntimeParams> {
        DowntimeParams::new(self.v_mem_bits, self.v_thd_bits, self.t_resume_s)
    }

    pub fn r_grid(&self) -> Vec<f64> {
        log_space(self.r_grid_min_bps, self.r_grid_max_bps, self.r_grid_points)
    }

    pub fn d_grid(&self) -> Vec<f64> {
        log_space(self.d_grid_min_bps, self.d_grid_max_bps, self.d_grid_points)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        for (name, lo, hi, n) in [
            ("r", self.r_grid_min_bps, self.r_grid_max_bps, self.r_grid_points),
            ("d", self.d_grid_min_bps, self.d_grid_max_bps, self.d_grid_points),
        ] {
            if !(lo.is_finite() && lo > 0.0 && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "{name} grid bounds must be positive and ascending"
                )));
            }
            if n < 2 {
                return Err(Error::Config(format!("{name} grid needs at least 2 points")));
            }
        }
        if !(self.budget_migrations_per_day > 0.0 && self.budget_downtime_s > 0.0) {
            return Err(Error::Config("migration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Catalog shape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    /// Number of tiers offered.
    pub size: usize,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self { size: 8 }
    }
}

impl CatalogConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("catalog size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Synthetic workload corpora behind the user population.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub web_count: usize,
    pub hpc_count: usize,
    /// Hours each web service is observed for.
    pub observed_hours: usize,
    /// Mean availability gap of the synthetic web services.
    pub web_offset_scale: f64,
    /// Mean load (VM-hours per hour) of the synthetic HPC users.
    pub hpc_load_mean: f64,
    /// Log-space spread of the HPC loads (heavy tail: few whales, many
    /// light users).
    pub hpc_load_sigma: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            web_count: 400,
            hpc_count: 600,
            observed_hours: 336,
            web_offset_scale: 0.025,
            hpc_load_mean: 0.02,
            hpc_load_sigma: 1.6,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.web_count == 0 || self.hpc_count == 0 {
            return Err(Error::Config("both workload corpora need at least one entry".into()));
        }
        if self.observed_hours == 0 {
            return Err(Error::Config("observed_hours must be positive".into()));
        }
        if !(self.web_offset_scale > 0.0 && self.hpc_load_mean > 0.0) {
            return Err(Error::Config("workload scales must be positive".into()));
        }
        if !(self.hpc_load_sigma >= 0.0) {
            return Err(Error::Config("HPC load sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.master_seed, cfg.master_seed);
        assert_eq!(back.cloud.data_centers.len(), cfg.cloud.data_centers.len());
        assert_eq!(back.catalog.size, cfg.catalog.size);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<PipelineConfig>("master_sede = 7\n").unwrap_err();
        assert!(err.to_string().contains("master_sede"));
    }

    #[test]
    fn partial_files_keep_the_other_defaults() {
        let cfg: PipelineConfig =
            toml::from_str("master_seed = 7\n[catalog]\nsize = 4\n").unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.catalog.size, 4);
        assert_eq!(cfg.geotemporal.hours, 336);
        assert_eq!(cfg.cloud.vm_count, 64);
    }

    #[test]
    fn odd_horizons_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.geotemporal.hours = 100;
        assert!(cfg.validate().is_err());
    }
}
