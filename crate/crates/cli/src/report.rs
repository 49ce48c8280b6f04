//! Artifact writers: JSON for structured results, CSV for anything meant
//! to be plotted, and the human-readable run summary.
//!
//! Machine-readable floats are written with shortest-round-trip formatting
//! so re-reading an artifact reproduces the value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use greensla_core::downtime::{downtime, DowntimeParams};
use greensla_core::slamodel::Catalog;
use greensla_core::users::{User, UserKind};
use greensla_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Worst case per hour over all VM migration traces.
pub fn write_aggregated_migrations_csv(counts: &[u32], path: &Path) -> Result<()> {
    let mut out = String::from("hour,worst_case_migrations\n");
    for (hour, n) in counts.iter().enumerate() {
        let _ = writeln!(out, "{hour},{n}");
    }
    write_text(&out, path)
}

/// Distribution of daily migration counts, in percent.
pub fn write_rate_histogram_csv(hist: &BTreeMap<u32, f64>, path: &Path) -> Result<()> {
    let mut out = String::from("migrations_per_day,percent\n");
    for (rate, pct) in hist {
        let _ = writeln!(out, "{rate},{pct}");
    }
    write_text(&out, path)
}

/// Migration downtime over the full (link rate, dirtying rate) grid.
/// Points with `d >= r` never converge and are marked with an empty cell.
pub fn write_downtime_surface_csv(
    params: &DowntimeParams,
    r_grid: &[f64],
    d_grid: &[f64],
    path: &Path,
) -> Result<()> {
    let mut out = String::from("r_bps,d_bps,downtime_s\n");
    for &r in r_grid {
        for &d in d_grid {
            if d >= r {
                let _ = writeln!(out, "{r},{d},");
            } else {
                let _ = writeln!(out, "{r},{d},{}", downtime(params, r, d)?);
            }
        }
    }
    write_text(&out, path)
}

/// Willingness-to-pay histogram split by user kind; fixed-width bins.
pub fn write_wtp_histogram_csv(users: &[User], bin_usd: f64, path: &Path) -> Result<()> {
    let mut bins: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for u in users {
        let bin = (u.wtp_usd_per_hour / bin_usd).floor().max(0.0) as u64;
        let slot = bins.entry(bin).or_default();
        match u.kind {
            UserKind::Web => slot.0 += 1,
            UserKind::Hpc => slot.1 += 1,
        }
    }
    let mut out = String::from("bin_lo_usd_per_hour,bin_hi_usd_per_hour,web,hpc\n");
    for (bin, (web, hpc)) in bins {
        let lo = bin as f64 * bin_usd;
        let hi = (bin + 1) as f64 * bin_usd;
        let _ = writeln!(out, "{lo:.3},{hi:.3},{web},{hpc}");
    }
    write_text(&out, path)
}

/// Subscription counts per tier plus the two terminal outcomes, split by
/// user kind. `counts` maps a row label to (web, hpc).
pub fn write_selection_by_tier_csv(
    catalog: &Catalog,
    counts: &BTreeMap<String, (usize, usize)>,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("tier_id,web,hpc,total\n");
    let mut row = |label: &str| {
        let (web, hpc) = counts.get(label).copied().unwrap_or((0, 0));
        let _ = writeln!(out, "{label},{web},{hpc},{}", web + hpc);
    };
    for tier in &catalog.tiers {
        row(&tier.id);
    }
    row("quit");
    row("unmatched");
    write_text(&out, path)
}

/// One row per user: requirement, willingness to pay and how the scan ended.
pub fn write_users_scatter_csv(rows: &[(User, String)], path: &Path) -> Result<()> {
    let mut out =
        String::from("user_id,kind,required_availability,lease_share,wtp_usd_per_hour,outcome\n");
    for (u, outcome) in rows {
        let kind = match u.kind {
            UserKind::Web => "web",
            UserKind::Hpc => "hpc",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            u.id, kind, u.required_availability, u.lease_share, u.wtp_usd_per_hour, outcome
        );
    }
    write_text(&out, path)
}

/// Conversion of every (size, run) cell of the sweep.
pub fn write_sweep_csv(sizes: &[usize], conversion_per_run: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut out = String::from("size,run,conversion\n");
    for (i, size) in sizes.iter().enumerate() {
        for (run, row) in conversion_per_run.iter().enumerate() {
            let _ = writeln!(out, "{size},{run},{}", row[i]);
        }
    }
    write_text(&out, path)
}
