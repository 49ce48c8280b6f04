//! Synthetic user population with availability requirements and
//! willingness to pay.
//!
//! Two archetypes are modeled. Web users run request-serving workloads:
//! the busier the service, the closer to always-on it must be, so the
//! required availability grows with the mean request rate and saturates
//! towards one. HPC users run batch jobs: they tolerate pauses, so their
//! requirement starts at a floor of one half and climbs with how loaded
//! they are relative to the busiest of their peers. Requirements observed
//! in workload corpora are condensed into distribution fits from which
//! arbitrarily large populations can be resampled.

use crate::tracestats::Statistic;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

/// Request rate one fully available VM absorbs; below it uptime stops
/// mattering.
pub const WEB_RATE_FLOOR: f64 = 100.0;

/// Required availability of a web workload with the given mean request
/// rate: zero up to the floor rate, then `1 - floor/rate`.
#[must_use]
pub fn web_requirement(mean_rate: f64) -> f64 {
    if mean_rate <= WEB_RATE_FLOOR {
        0.0
    } else {
        1.0 - WEB_RATE_FLOOR / mean_rate
    }
}

/// Reference load of an HPC corpus: the 95th percentile (nearest rank) of
/// the individual loads.
pub fn hpc_load_reference(loads: &[f64]) -> Result<f64> {
    if loads.is_empty() {
        return Err(Error::data("cannot take a load reference of no loads"));
    }
    Ok(Statistic::Quantile(0.95).evaluate(loads))
}

/// Required availability of an HPC workload: a floor of 0.5 plus a share
/// that grows linearly with load up to the reference load.
#[must_use]
pub fn hpc_requirement(load: f64, load_ref: f64) -> f64 {
    let ratio = if load_ref > 0.0 {
        (load / load_ref).min(1.0)
    } else if load > 0.0 {
        1.0
    } else {
        0.0
    };
    0.5 + 0.5 * ratio
}

/// An observed request-serving workload: one request-rate sample per hour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WebWorkload {
    pub id: String,
    pub hourly_requests: Vec<u32>,
}

impl WebWorkload {
    #[must_use]
    pub fn mean_rate(&self) -> f64 {
        if self.hourly_requests.is_empty() {
            return 0.0;
        }
        self.hourly_requests.iter().map(|&r| r as f64).sum::<f64>()
            / self.hourly_requests.len() as f64
    }
}

/// An observed batch workload, reduced to its mean job duration and job
/// arrival rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpcWorkload {
    pub id: String,
    pub mean_job_duration_h: f64,
    pub jobs_per_hour: f64,
}

impl HpcWorkload {
    /// Expected VM-hours demanded per hour; the utilization of the user.
    #[must_use]
    pub fn load(&self) -> f64 {
        self.mean_job_duration_h * self.jobs_per_hour
    }
}

/// Exponential summaries of a workload corpus, enough to resample any
/// number of users.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RequirementFits {
    /// Mean availability gap `1 - requirement` of web users.
    pub web_offset_scale: f64,
    /// Mean HPC load (VM-hours per hour).
    pub hpc_load_mean: f64,
    /// Log-space dispersion of the HPC loads. Real HPC populations are
    /// heavy-tailed — a few whales next to many light users — so the bulk
    /// of the requirements sits close to the floor.
    pub hpc_load_sigma: f64,
    /// Availability every HPC user needs regardless of load.
    pub hpc_floor: f64,
}

impl Default for RequirementFits {
    fn default() -> Self {
        Self {
            web_offset_scale: 0.025,
            hpc_load_mean: 0.02,
            hpc_load_sigma: 1.6,
            hpc_floor: 0.5,
        }
    }
}

impl RequirementFits {
    pub fn validate(&self) -> Result<()> {
        if !(self.web_offset_scale > 0.0) || !(self.hpc_load_mean > 0.0) {
            return Err(Error::config("requirement fit scales must be positive"));
        }
        if !(self.hpc_load_sigma >= 0.0) {
            return Err(Error::config("HPC load sigma must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.hpc_floor) {
            return Err(Error::config("HPC availability floor must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Fits the requirement distributions to observed corpora: the mean
/// availability gap of the web workloads, and mean plus log-space spread
/// of the HPC loads.
pub fn fit_requirements(web: &[WebWorkload], hpc: &[HpcWorkload]) -> Result<RequirementFits> {
    if web.is_empty() || hpc.is_empty() {
        return Err(Error::data("fitting requirements needs both web and HPC workloads"));
    }
    let web_offset_scale = web
        .iter()
        .map(|w| 1.0 - web_requirement(w.mean_rate()))
        .sum::<f64>()
        / web.len() as f64;
    let hpc_load_mean = hpc.iter().map(HpcWorkload::load).sum::<f64>() / hpc.len() as f64;
    let ln_loads: Vec<f64> = hpc
        .iter()
        .map(|w| w.load().max(f64::MIN_POSITIVE).ln())
        .collect();
    let ln_mean = ln_loads.iter().sum::<f64>() / ln_loads.len() as f64;
    let hpc_load_sigma = (ln_loads.iter().map(|l| (l - ln_mean).powi(2)).sum::<f64>()
        / ln_loads.len() as f64)
        .sqrt();
    let fits = RequirementFits {
        web_offset_scale,
        hpc_load_mean,
        hpc_load_sigma,
        ..RequirementFits::default()
    };
    fits.validate()?;
    Ok(fits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    Web,
    Hpc,
}

/// One simulated customer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub kind: UserKind,
    pub required_availability: f64,
    /// Fraction of the year the user actually leases VMs for.
    pub lease_share: f64,
    /// Willingness to pay in USD per VM-hour.
    pub wtp_usd_per_hour: f64,
}

/// Size and mix of the sampled population.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationParams {
    pub size: usize,
    pub web_weight: f64,
    pub hpc_weight: f64,
    /// Price anchor of the willingness to pay, USD per VM-hour.
    pub wtp_base_usd_per_hour: f64,
    pub wtp_noise_sigma: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            size: 1000,
            web_weight: 1.0,
            hpc_weight: 1.5,
            wtp_base_usd_per_hour: 0.28,
            wtp_noise_sigma: 0.05,
        }
    }
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("population size must be positive"));
        }
        if !(self.web_weight >= 0.0 && self.hpc_weight >= 0.0)
            || self.web_weight + self.hpc_weight <= 0.0
        {
            return Err(Error::config("population weights must be nonnegative and not both zero"));
        }
        if !(self.wtp_base_usd_per_hour > 0.0) {
            return Err(Error::config("willingness-to-pay anchor must be positive"));
        }
        if self.wtp_noise_sigma < 0.0 {
            return Err(Error::config("willingness-to-pay noise must be nonnegative"));
        }
        Ok(())
    }

    /// Number of web users; the remainder of the population is HPC.
    #[must_use]
    pub fn web_count(&self) -> usize {
        let share = self.web_weight / (self.web_weight + self.hpc_weight);
        ((self.size as f64 * share).round() as usize).min(self.size)
    }
}

/// Lognormal with the given arithmetic mean: `exp(N(ln mean - sigma^2/2,
/// sigma^2))`. Zero sigma degenerates to the constant `mean`.
fn lognormal_with_mean(mean: f64, sigma: f64) -> Result<LogNormal<f64>> {
    LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma)
        .map_err(|e| Error::config(format!("load distribution: {e}")))
}

/// Willingness to pay anchored at what the required availability is worth,
/// plus Gaussian noise, redrawn until positive. With zero noise the exact
/// anchor is kept even when it is zero.
fn draw_wtp(
    rng: &mut ChaCha8Rng,
    availability: f64,
    params: &PopulationParams,
    noise: Option<&Normal<f64>>,
) -> Result<f64> {
    let anchor = availability * params.wtp_base_usd_per_hour;
    let Some(noise) = noise else {
        return Ok(anchor);
    };
    for _ in 0..1000 {
        let wtp = anchor + noise.sample(rng);
        if wtp > 0.0 {
            return Ok(wtp);
        }
    }
    Err(Error::Internal(format!(
        "willingness to pay around {anchor} stayed nonpositive after 1000 draws"
    )))
}

/// Samples a population from the fitted requirement distributions: web
/// users first (ids from 0), then HPC users. Deterministic in
/// `(params, fits, seed)`.
///
/// HPC loads are drawn first so the load reference is the 95th percentile
/// of the sampled peers, mirroring how the fit treats an observed corpus.
pub fn sample_population(
    params: &PopulationParams,
    fits: &RequirementFits,
    seed: u64,
) -> Result<Vec<User>> {
    params.validate()?;
    fits.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if params.wtp_noise_sigma > 0.0 {
        Some(
            Normal::new(0.0, params.wtp_noise_sigma)
                .map_err(|e| Error::config(format!("willingness-to-pay noise: {e}")))?,
        )
    } else {
        None
    };
    let web_offset = Exp::new(1.0 / fits.web_offset_scale)
        .map_err(|e| Error::config(format!("web offset distribution: {e}")))?;
    let hpc_load = lognormal_with_mean(fits.hpc_load_mean, fits.hpc_load_sigma)?;

    let n_web = params.web_count();
    let n_hpc = params.size - n_web;
    let mut users = Vec::with_capacity(params.size);

    for id in 0..n_web {
        let offset: f64 = web_offset.sample(&mut rng);
        let required = (1.0 - offset).max(0.0);
        let wtp = draw_wtp(&mut rng, required, params, noise.as_ref())?;
        users.push(User {
            id,
            kind: UserKind::Web,
            required_availability: required,
            lease_share: 1.0,
            wtp_usd_per_hour: wtp,
        });
    }

    let loads: Vec<f64> = (0..n_hpc).map(|_| hpc_load.sample(&mut rng)).collect();
    let load_ref = if loads.is_empty() {
        0.0
    } else {
        hpc_load_reference(&loads)?
    };
    for (i, &load) in loads.iter().enumerate() {
        let ratio = if load_ref > 0.0 { (load / load_ref).min(1.0) } else { 0.0 };
        let required = fits.hpc_floor + (1.0 - fits.hpc_floor) * ratio;
        let wtp = draw_wtp(&mut rng, required, params, noise.as_ref())?;
        users.push(User {
            id: n_web + i,
            kind: UserKind::Hpc,
            required_availability: required,
            lease_share: load.min(1.0),
            wtp_usd_per_hour: wtp,
        });
    }
    Ok(users)
}

/// Synthetic web corpus: traces whose mean rates are spread so that the
/// implied requirements follow an exponential availability gap, with a
/// daily sinusoidal load shape on top.
pub fn synth_web_workloads(
    count: usize,
    observed_hours: usize,
    offset_scale: f64,
    seed: u64,
) -> Result<Vec<WebWorkload>> {
    if count == 0 || observed_hours < 24 {
        return Err(Error::config("web corpus needs workloads and at least a day of hours"));
    }
    if !(offset_scale > 0.0) {
        return Err(Error::config("offset scale must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset_dist = Exp::new(1.0 / offset_scale)
        .map_err(|e| Error::config(format!("offset distribution: {e}")))?;
    let tau = 2.0 * std::f64::consts::PI / 24.0;
    Ok((0..count)
        .map(|i| {
            let offset: f64 = offset_dist.sample(&mut rng).max(1e-5);
            let mean_rate = (WEB_RATE_FLOOR / offset).min(1e7);
            let phase: f64 = rand::Rng::random_range(&mut rng, 0.0..24.0);
            let hourly_requests = (0..observed_hours)
                .map(|h| {
                    let shape = 1.0 + 0.4 * (tau * (h as f64 + phase)).sin();
                    (mean_rate * shape).round().max(0.0) as u32
                })
                .collect();
            WebWorkload {
                id: format!("web-{i:04}"),
                hourly_requests,
            }
        })
        .collect())
}

/// Synthetic HPC corpus: heavy-tailed lognormal loads — many light users,
/// a few whales — split into a job duration and an arrival rate.
pub fn synth_hpc_workloads(
    count: usize,
    load_mean: f64,
    load_sigma: f64,
    seed: u64,
) -> Result<Vec<HpcWorkload>> {
    if count == 0 {
        return Err(Error::config("HPC corpus needs at least one workload"));
    }
    if !(load_mean > 0.0) {
        return Err(Error::config("load mean must be positive"));
    }
    if !(load_sigma >= 0.0) {
        return Err(Error::config("load sigma must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let load_dist = lognormal_with_mean(load_mean, load_sigma)?;
    let duration_dist =
        Exp::new(1.0 / 2.0).map_err(|e| Error::config(format!("duration distribution: {e}")))?;
    Ok((0..count)
        .map(|i| {
            let load: f64 = load_dist.sample(&mut rng);
            let duration = 0.25 + duration_dist.sample(&mut rng);
            HpcWorkload {
                id: format!("hpc-{i:04}"),
                mean_job_duration_h: duration,
                jobs_per_hour: load / duration,
            }
        })
        .collect())
}

const WEB_CSV_HEADER: &str = "workload_id,hour,requests";
const HPC_CSV_HEADER: &str = "workload_id,mean_job_duration_h,jobs_per_hour";
const POPULATION_CSV_HEADER: &str =
    "user_id,kind,required_availability,lease_share,wtp_usd_per_hour";

/// Writes a web corpus as `workload_id,hour,requests`.
pub fn write_web_workloads_csv<P: AsRef<Path>>(workloads: &[WebWorkload], path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(WEB_CSV_HEADER);
    out.push('\n');
    for w in workloads {
        for (hour, r) in w.hourly_requests.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", w.id, hour, r));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads a web corpus; each workload's hours must start at zero and be
/// contiguous.
pub fn load_web_workloads<P: AsRef<Path>>(path: P) -> Result<Vec<WebWorkload>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut workloads: Vec<WebWorkload> = Vec::new();
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim() != WEB_CSV_HEADER {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `{WEB_CSV_HEADER}`, got `{header}`"),
        ));
    }
    for (idx, line) in lines {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(path, line_no, "expected 3 fields"));
        }
        let hour: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad hour: {e}")))?;
        let requests: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad request count: {e}")))?;
        let id = fields[0].trim();
        match workloads.last_mut() {
            Some(w) if w.id == id => {
                if hour != w.hourly_requests.len() {
                    return Err(Error::malformed(
                        path,
                        line_no,
                        format!("workload {id}: expected hour {}, got {hour}", w.hourly_requests.len()),
                    ));
                }
                w.hourly_requests.push(requests);
            }
            _ => {
                if workloads.iter().any(|w| w.id == id) {
                    return Err(Error::malformed(
                        path,
                        line_no,
                        format!("workload {id}: rows are not contiguous"),
                    ));
                }
                if hour != 0 {
                    return Err(Error::malformed(
                        path,
                        line_no,
                        format!("workload {id}: first hour must be 0, got {hour}"),
                    ));
                }
                workloads.push(WebWorkload {
                    id: id.to_string(),
                    hourly_requests: vec![requests],
                });
            }
        }
    }
    if workloads.is_empty() {
        return Err(Error::malformed(path, 1, "no data rows"));
    }
    Ok(workloads)
}

/// Writes an HPC corpus as `workload_id,mean_job_duration_h,jobs_per_hour`.
pub fn write_hpc_workloads_csv<P: AsRef<Path>>(workloads: &[HpcWorkload], path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(HPC_CSV_HEADER);
    out.push('\n');
    for w in workloads {
        // Shortest-round-trip formatting: loads computed from a reloaded
        // corpus must match the originals exactly.
        out.push_str(&format!(
            "{},{},{}\n",
            w.id, w.mean_job_duration_h, w.jobs_per_hour
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads an HPC corpus.
pub fn load_hpc_workloads<P: AsRef<Path>>(path: P) -> Result<Vec<HpcWorkload>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut workloads = Vec::new();
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim() != HPC_CSV_HEADER {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `{HPC_CSV_HEADER}`, got `{header}`"),
        ));
    }
    for (idx, line) in lines {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(path, line_no, "expected 3 fields"));
        }
        let duration: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad duration: {e}")))?;
        let rate: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad rate: {e}")))?;
        if duration < 0.0 || rate < 0.0 {
            return Err(Error::malformed(path, line_no, "durations and rates must be nonnegative"));
        }
        workloads.push(HpcWorkload {
            id: fields[0].trim().to_string(),
            mean_job_duration_h: duration,
            jobs_per_hour: rate,
        });
    }
    if workloads.is_empty() {
        return Err(Error::malformed(path, 1, "no data rows"));
    }
    Ok(workloads)
}

/// Writes a sampled population as
/// `user_id,kind,required_availability,lease_share,wtp_usd_per_hour`.
pub fn write_population_csv<P: AsRef<Path>>(users: &[User], path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(POPULATION_CSV_HEADER);
    out.push('\n');
    for u in users {
        let kind = match u.kind {
            UserKind::Web => "web",
            UserKind::Hpc => "hpc",
        };
        // Shortest-round-trip formatting keeps reloaded populations exact.
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            u.id, kind, u.required_availability, u.lease_share, u.wtp_usd_per_hour
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads a population written by [`write_population_csv`].
pub fn load_population_csv<P: AsRef<Path>>(path: P) -> Result<Vec<User>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut users = Vec::new();
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim() != POPULATION_CSV_HEADER {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `{POPULATION_CSV_HEADER}`, got `{header}`"),
        ));
    }
    for (idx, line) in lines {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::malformed(path, line_no, "expected 5 fields"));
        }
        let id: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad user id: {e}")))?;
        let kind = match fields[1].trim() {
            "web" => UserKind::Web,
            "hpc" => UserKind::Hpc,
            other => {
                return Err(Error::malformed(
                    path,
                    line_no,
                    format!("unknown user kind `{other}`"),
                ))
            }
        };
        let float = |i: usize, what: &str| -> Result<f64> {
            fields[i]
                .trim()
                .parse()
                .map_err(|e| Error::malformed(path, line_no, format!("bad {what}: {e}")))
        };
        let required_availability = float(2, "availability")?;
        let lease_share = float(3, "lease share")?;
        let wtp_usd_per_hour = float(4, "willingness to pay")?;
        if !(0.0..=1.0).contains(&required_availability) || !(0.0..=1.0).contains(&lease_share) {
            return Err(Error::malformed(
                path,
                line_no,
                "availability and lease share must lie in [0, 1]",
            ));
        }
        users.push(User {
            id,
            kind,
            required_availability,
            lease_share,
            wtp_usd_per_hour,
        });
    }
    if users.is_empty() {
        return Err(Error::malformed(path, 1, "no data rows"));
    }
    Ok(users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn busy_web_services_need_to_be_nearly_always_on() {
        assert_relative_eq!(web_requirement(120_000.0), 1.0 - 100.0 / 120_000.0, max_relative = 1e-12);
        assert!((web_requirement(120_000.0) - 0.999167).abs() < 1e-6);
        assert!((web_requirement(667.0) - 0.85).abs() < 1e-3);
    }

    #[test]
    fn idle_web_services_need_nothing() {
        assert_eq!(web_requirement(100.0), 0.0);
        assert_eq!(web_requirement(12.0), 0.0);
        assert_eq!(web_requirement(0.0), 0.0);
    }

    #[test]
    fn hpc_requirements_climb_from_the_floor_to_one() {
        let load_ref = 3.0;
        assert_relative_eq!(hpc_requirement(0.0, load_ref), 0.5, max_relative = 1e-15);
        assert_relative_eq!(hpc_requirement(load_ref, load_ref), 1.0, max_relative = 1e-15);
        assert_relative_eq!(hpc_requirement(load_ref / 2.0, load_ref), 0.75, max_relative = 1e-15);
        // Above the reference the requirement saturates.
        assert_relative_eq!(hpc_requirement(10.0 * load_ref, load_ref), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn the_load_reference_is_the_ninety_fifth_percentile() {
        let loads: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(hpc_load_reference(&loads).unwrap(), 95.0);
        assert!(hpc_load_reference(&[]).is_err());
    }

    #[test]
    fn the_default_population_splits_four_hundred_to_six_hundred() {
        let users =
            sample_population(&PopulationParams::default(), &RequirementFits::default(), 42)
                .unwrap();
        assert_eq!(users.len(), 1000);
        let webs = users.iter().filter(|u| u.kind == UserKind::Web).count();
        let hpcs = users.iter().filter(|u| u.kind == UserKind::Hpc).count();
        assert_eq!(webs, 400);
        assert_eq!(hpcs, 600);
        // ids are the vector order.
        for (i, u) in users.iter().enumerate() {
            assert_eq!(u.id, i);
        }
        // Web users lease year-round; HPC users lease their load share.
        assert!(users
            .iter()
            .filter(|u| u.kind == UserKind::Web)
            .all(|u| u.lease_share == 1.0));
        assert!(users
            .iter()
            .filter(|u| u.kind == UserKind::Hpc)
            .all(|u| (0.0..=1.0).contains(&u.lease_share)));
    }

    #[test]
    fn zero_noise_pins_willingness_to_pay_to_the_anchor() {
        let params = PopulationParams {
            wtp_noise_sigma: 0.0,
            ..PopulationParams::default()
        };
        let users = sample_population(&params, &RequirementFits::default(), 7).unwrap();
        for u in users {
            assert_eq!(u.wtp_usd_per_hour, u.required_availability * 0.28);
        }
    }

    #[test]
    fn web_users_need_more_availability_than_hpc_users() {
        for seed in 0..10 {
            let users =
                sample_population(&PopulationParams::default(), &RequirementFits::default(), seed)
                    .unwrap();
            let mean = |kind: UserKind| {
                let xs: Vec<f64> = users
                    .iter()
                    .filter(|u| u.kind == kind)
                    .map(|u| u.required_availability)
                    .collect();
                xs.iter().sum::<f64>() / xs.len() as f64
            };
            assert!(
                mean(UserKind::Web) > mean(UserKind::Hpc),
                "seed {seed}: web mean should exceed HPC mean"
            );
        }
    }

    #[test]
    fn requirement_supports_overlap_across_kinds() {
        let users =
            sample_population(&PopulationParams::default(), &RequirementFits::default(), 3)
                .unwrap();
        let web_min = users
            .iter()
            .filter(|u| u.kind == UserKind::Web)
            .map(|u| u.required_availability)
            .fold(f64::MAX, f64::min);
        let hpc_max = users
            .iter()
            .filter(|u| u.kind == UserKind::Hpc)
            .map(|u| u.required_availability)
            .fold(f64::MIN, f64::max);
        // The toughest HPC users demand more than the laxest web users.
        assert!(hpc_max > web_min);
        // Positive willingness to pay everywhere under default noise.
        assert!(users.iter().all(|u| u.wtp_usd_per_hour > 0.0));
    }

    #[test]
    fn a_twentieth_of_hpc_users_saturate_their_requirement() {
        let users =
            sample_population(&PopulationParams::default(), &RequirementFits::default(), 11)
                .unwrap();
        let saturated = users
            .iter()
            .filter(|u| u.kind == UserKind::Hpc && u.required_availability == 1.0)
            .count();
        // Nearest-rank 95th percentile: roughly 5% of 600 at or above it.
        assert!((15..=60).contains(&saturated), "saturated: {saturated}");
    }

    #[test]
    fn equal_seeds_reproduce_the_population() {
        let a = sample_population(&PopulationParams::default(), &RequirementFits::default(), 9)
            .unwrap();
        let b = sample_population(&PopulationParams::default(), &RequirementFits::default(), 9)
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.required_availability, y.required_availability);
            assert_eq!(x.wtp_usd_per_hour, y.wtp_usd_per_hour);
        }
        let c = sample_population(&PopulationParams::default(), &RequirementFits::default(), 10)
            .unwrap();
        assert!(a
            .iter()
            .zip(&c)
            .any(|(x, y)| x.required_availability != y.required_availability));
    }

    #[test]
    fn fits_recover_the_generating_scales() {
        // The lognormal's heavy tail makes the load mean a noisy estimate,
        // so the corpus here is much larger than the defaults.
        let web = synth_web_workloads(400, 48, 0.025, 21).unwrap();
        let hpc = synth_hpc_workloads(20_000, 0.02, 2.0, 22).unwrap();
        let fits = fit_requirements(&web, &hpc).unwrap();
        assert!(
            (fits.web_offset_scale - 0.025).abs() / 0.025 < 0.25,
            "web scale {}",
            fits.web_offset_scale
        );
        assert!(
            (fits.hpc_load_mean - 0.02).abs() / 0.02 < 0.25,
            "hpc mean {}",
            fits.hpc_load_mean
        );
        assert!(
            (fits.hpc_load_sigma - 2.0).abs() / 2.0 < 0.1,
            "hpc sigma {}",
            fits.hpc_load_sigma
        );
        assert!(fit_requirements(&[], &hpc).is_err());
    }

    #[test]
    fn web_corpus_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("web.csv");
        let corpus = synth_web_workloads(5, 24, 0.025, 1).unwrap();
        write_web_workloads_csv(&corpus, &path).unwrap();
        let loaded = load_web_workloads(&path).unwrap();
        assert_eq!(loaded.len(), 5);
        for (a, b) in loaded.iter().zip(&corpus) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.hourly_requests, b.hourly_requests);
        }
    }

    #[test]
    fn hpc_corpus_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hpc.csv");
        let corpus = synth_hpc_workloads(7, 0.02, 2.0, 2).unwrap();
        write_hpc_workloads_csv(&corpus, &path).unwrap();
        let loaded = load_hpc_workloads(&path).unwrap();
        assert_eq!(loaded.len(), 7);
        for (a, b) in loaded.iter().zip(&corpus) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.mean_job_duration_h, b.mean_job_duration_h);
            assert_eq!(a.jobs_per_hour, b.jobs_per_hour);
        }
    }

    #[test]
    fn population_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.csv");
        let users =
            sample_population(&PopulationParams::default(), &RequirementFits::default(), 5)
                .unwrap();
        write_population_csv(&users, &path).unwrap();
        let loaded = load_population_csv(&path).unwrap();
        assert_eq!(loaded.len(), users.len());
        for (a, b) in loaded.iter().zip(&users) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.required_availability, b.required_availability);
            assert_eq!(a.lease_share, b.lease_share);
            assert_eq!(a.wtp_usd_per_hour, b.wtp_usd_per_hour);
        }
    }

    #[test]
    fn malformed_population_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.csv");
        let write = |body: &str| std::fs::write(&path, body).unwrap();

        write("user_id,kind\n");
        assert!(matches!(load_population_csv(&path), Err(Error::Malformed { line: 1, .. })));

        write("user_id,kind,required_availability,lease_share,wtp_usd_per_hour\n0,batch,0.9,1.0,0.2\n");
        assert!(matches!(load_population_csv(&path), Err(Error::Malformed { line: 2, .. })));

        write("user_id,kind,required_availability,lease_share,wtp_usd_per_hour\n0,web,1.9,1.0,0.2\n");
        assert!(matches!(load_population_csv(&path), Err(Error::Malformed { line: 2, .. })));
    }

    #[test]
    fn malformed_corpora_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("web.csv");
        std::fs::write(
            &path,
            "workload_id,hour,requests\nweb-0,0,5\nweb-0,2,6\n",
        )
        .unwrap();
        match load_web_workloads(&path) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a gap error, got {other:?}"),
        }

        let hpc_path = dir.path().join("hpc.csv");
        std::fs::write(
            &hpc_path,
            "workload_id,mean_job_duration_h,jobs_per_hour\nhpc-0,-1.0,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            load_hpc_workloads(&hpc_path),
            Err(Error::Malformed { line: 2, .. })
        ));
    }
}
