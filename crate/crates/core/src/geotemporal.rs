//! Hourly electricity price and outside temperature series per location.
//!
//! Series either come from CSV files or from a synthetic generator that
//! layers a daily sinusoid and Gaussian noise on a per-location mean, with
//! the daily peak phase following the location's UTC offset. Temperatures
//! additionally carry an annual sinusoid.

use crate::{Error, Result};
use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

/// A data-center location with its electricity market and climate summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    /// UTC offset of the region in hours, in [-12, 14].
    pub region_offset_hours: f64,
    /// Mean electricity price in USD per kWh; must be positive.
    pub price_mean_usd_per_kwh: f64,
    /// Annual mean outside temperature in Celsius.
    pub temp_mean_c: f64,
}

impl Location {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::config("location id must not be empty"));
        }
        if !(-12.0..=14.0).contains(&self.region_offset_hours) {
            return Err(Error::config(format!(
                "region offset {} outside [-12, 14]",
                self.region_offset_hours
            )));
        }
        if !(self.price_mean_usd_per_kwh > 0.0) {
            return Err(Error::config("price mean must be positive"));
        }
        Ok(())
    }
}

/// Hourly price and temperature series for one location. Timestamps are
/// implied: `start` plus the index in hours, which keeps the "hourly,
/// strictly increasing" invariant true by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeotemporalSeries {
    pub location_id: String,
    pub start: DateTime<Utc>,
    pub prices_usd_per_kwh: Vec<f64>,
    pub temps_c: Vec<f64>,
}

impl GeotemporalSeries {
    #[must_use]
    pub fn len(&self) -> usize {
        self.prices_usd_per_kwh.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.prices_usd_per_kwh.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.prices_usd_per_kwh.len() != self.temps_c.len() {
            return Err(Error::data(format!(
                "series {}: {} prices vs {} temperatures",
                self.location_id,
                self.prices_usd_per_kwh.len(),
                self.temps_c.len()
            )));
        }
        if let Some(p) = self
            .prices_usd_per_kwh
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::data(format!(
                "series {}: invalid price {p}",
                self.location_id
            )));
        }
        Ok(())
    }
}

/// Shape parameters of the synthetic generator. Amplitudes for prices are
/// relative to the location mean, temperature amplitudes are in Celsius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub price_daily_amplitude: f64,
    pub price_noise_sigma: f64,
    pub temp_daily_amplitude_c: f64,
    pub temp_annual_amplitude_c: f64,
    pub temp_noise_sigma_c: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            price_daily_amplitude: 0.3,
            price_noise_sigma: 0.1,
            temp_daily_amplitude_c: 8.0,
            temp_annual_amplitude_c: 10.0,
            temp_noise_sigma_c: 1.0,
        }
    }
}

const HOURS_PER_DAY: f64 = 24.0;
const HOURS_PER_YEAR: f64 = 8760.0;
/// Prices peak at 15:00 local time, temperatures at 14:00.
const PRICE_PEAK_LOCAL_HOUR: f64 = 15.0;
const TEMP_PEAK_LOCAL_HOUR: f64 = 14.0;

fn daily_phase(offset_hours: f64, peak_local_hour: f64) -> f64 {
    // sin peaks a quarter period into its argument; shift so the peak lands
    // on the requested local hour, which moves with the region's UTC offset.
    offset_hours - (peak_local_hour - HOURS_PER_DAY / 4.0)
}

/// Synthesises `hours` of data for `location` with the default shape
/// parameters. Pure function of its arguments.
pub fn synth_series(
    location: &Location,
    start: DateTime<Utc>,
    hours: usize,
    seed: u64,
) -> Result<GeotemporalSeries> {
    synth_series_with(location, start, hours, &SynthParams::default(), seed)
}

/// Synthesises `hours` (at least one day) of hourly data.
///
/// Prices follow `mean * (1 + a*sin(2*pi*(t+phi)/24) + eps)` with
/// `eps ~ N(0, sigma^2)`, clamped at zero; `phi` derives from the region's
/// UTC offset so different regions peak at different UTC hours.
/// Temperatures follow the mean plus a daily and an annual sinusoid plus
/// noise. One noise pair is drawn per hour (price first), so equal seeds
/// give equal series.
pub fn synth_series_with(
    location: &Location,
    start: DateTime<Utc>,
    hours: usize,
    params: &SynthParams,
    seed: u64,
) -> Result<GeotemporalSeries> {
    location.validate()?;
    if hours < 24 {
        return Err(Error::config("synthetic series need at least 24 hours"));
    }
    if params.price_noise_sigma < 0.0 || params.temp_noise_sigma_c < 0.0 {
        return Err(Error::config("noise sigmas must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let price_noise = Normal::new(0.0, params.price_noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(format!("price noise: {e}")))?;
    let temp_noise = Normal::new(0.0, params.temp_noise_sigma_c.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(format!("temperature noise: {e}")))?;

    let price_phi = daily_phase(location.region_offset_hours, PRICE_PEAK_LOCAL_HOUR);
    let temp_phi = daily_phase(location.region_offset_hours, TEMP_PEAK_LOCAL_HOUR);
    let tau_day = 2.0 * std::f64::consts::PI / HOURS_PER_DAY;
    let tau_year = 2.0 * std::f64::consts::PI / HOURS_PER_YEAR;

    let mut prices = Vec::with_capacity(hours);
    let mut temps = Vec::with_capacity(hours);
    for t in 0..hours {
        let t = t as f64;
        let eps_p = if params.price_noise_sigma == 0.0 {
            0.0
        } else {
            price_noise.sample(&mut rng)
        };
        let eps_t = if params.temp_noise_sigma_c == 0.0 {
            0.0
        } else {
            temp_noise.sample(&mut rng)
        };
        let price = location.price_mean_usd_per_kwh
            * (1.0 + params.price_daily_amplitude * (tau_day * (t + price_phi)).sin() + eps_p);
        prices.push(price.max(0.0));
        let temp = location.temp_mean_c
            + params.temp_daily_amplitude_c * (tau_day * (t + temp_phi)).sin()
            + params.temp_annual_amplitude_c * (tau_year * t - std::f64::consts::FRAC_PI_2).sin()
            + eps_t;
        temps.push(temp);
    }
    Ok(GeotemporalSeries {
        location_id: location.id.clone(),
        start,
        prices_usd_per_kwh: prices,
        temps_c: temps,
    })
}

const CSV_HEADER: &str = "timestamp,location,price_usd_per_kwh,temperature_c";

/// Loads hourly series from a CSV file with columns
/// `timestamp,location,price_usd_per_kwh,temperature_c`; rows of different
/// locations may interleave but each location's rows must be hourly and
/// strictly increasing. Timestamps are ISO-8601 UTC with a `Z` suffix.
pub fn load_series<P: AsRef<Path>>(path: P) -> Result<Vec<GeotemporalSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    struct Partial {
        start: DateTime<Utc>,
        last: DateTime<Utc>,
        prices: Vec<f64>,
        temps: Vec<f64>,
    }
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `{CSV_HEADER}`, got `{header}`"),
        ));
    }

    for (idx, line) in lines {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::malformed(
                path,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let ts = DateTime::parse_from_rfc3339(fields[0])
            .map_err(|e| Error::malformed(path, line_no, format!("bad timestamp: {e}")))?
            .with_timezone(&Utc);
        let location = fields[1].trim();
        if location.is_empty() {
            return Err(Error::malformed(path, line_no, "empty location"));
        }
        let price: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad price: {e}")))?;
        if !price.is_finite() || price < 0.0 {
            return Err(Error::malformed(
                path,
                line_no,
                format!("price must be nonnegative, got {price}"),
            ));
        }
        let temp: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line_no, format!("bad temperature: {e}")))?;

        match partials.get_mut(location) {
            None => {
                order.push(location.to_string());
                partials.insert(
                    location.to_string(),
                    Partial {
                        start: ts,
                        last: ts,
                        prices: vec![price],
                        temps: vec![temp],
                    },
                );
            }
            Some(p) => {
                let expected = p.last + Duration::hours(1);
                if ts != expected {
                    return Err(Error::malformed(
                        path,
                        line_no,
                        format!(
                            "location {location}: expected hourly timestamp {}, got {}",
                            expected.format("%Y-%m-%dT%H:%M:%SZ"),
                            ts.format("%Y-%m-%dT%H:%M:%SZ")
                        ),
                    ));
                }
                p.last = ts;
                p.prices.push(price);
                p.temps.push(temp);
            }
        }
    }

    if partials.is_empty() {
        return Err(Error::malformed(path, 1, "no data rows"));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let p = partials.remove(&id).expect("tracked location");
            GeotemporalSeries {
                location_id: id,
                start: p.start,
                prices_usd_per_kwh: p.prices,
                temps_c: p.temps,
            }
        })
        .collect())
}

/// Writes series to the CSV format read by [`load_series`], grouped by
/// location in the given order.
pub fn write_series<P: AsRef<Path>>(series: &[GeotemporalSeries], path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in series {
        for (i, (price, temp)) in s
            .prices_usd_per_kwh
            .iter()
            .zip(s.temps_c.iter())
            .enumerate()
        {
            let ts = s.start + Duration::hours(i as i64);
            // Shortest-round-trip float formatting so a load after a write
            // reproduces the series bit for bit.
            out.push_str(&format!(
                "{},{},{},{}\n",
                ts.format("%Y-%m-%dT%H:%M:%SZ"),
                s.location_id,
                price,
                temp
            ));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
