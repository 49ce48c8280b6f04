//! The pipeline stages behind the subcommands.
//!
//! Each stage reads earlier artifacts from the shared output directory and
//! writes its own. Running `pipeline` chains all of them; running a single
//! subcommand re-runs just its stage, so expensive steps (the simulations,
//! the sweep) can be iterated on without recomputing the rest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use greensla_core::cloudsim::{
    self, energy_cost_accounting, run_migration_scheduler, run_peak_pauser, CloudSpec,
    CostSummary, EventKind, ManagementTrace,
};
use greensla_core::downtime::{worst_case_downtime, WorstCase};
use greensla_core::geotemporal::{load_series, synth_series_with, write_series, GeotemporalSeries};
use greensla_core::seed::{self, stream};
use greensla_core::selection::{
    simulate_selection, sweep_catalog_sizes, Outcome, SelectionResult, SweepResult,
};
use greensla_core::slamodel::{
    build_catalog_8, build_catalog_n, catalog8_fractions, energy_savings, read_catalog_json,
    write_catalog_csv, write_catalog_json, BaseVm, Catalog, MigrationStats, PauserSavingsModel,
    PolicyKind,
};
use greensla_core::tracestats::{aggregate_worst_case, rate_histogram};
use greensla_core::users::{
    fit_requirements, load_population_csv, sample_population, synth_hpc_workloads,
    synth_web_workloads, write_hpc_workloads_csv, write_population_csv, write_web_workloads_csv,
    RequirementFits, UserKind,
};
use greensla_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::report;

/// Everything a stage needs: the effective configuration and the shared
/// artifact directory.
pub struct Ctx {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn trace_dir(&self, tc: &str) -> PathBuf {
        self.out.join("traces").join(tc)
    }
}

/// One pipeline step with a declared output set.
#[derive(Clone, Copy)]
pub struct Stage {
    pub name: &'static str,
    run: fn(&Ctx) -> Result<()>,
    /// Everything the stage writes; removed again on failure so a broken
    /// run never leaves half-written artifacts for later stages to trip on.
    outputs: fn(&Ctx) -> Vec<PathBuf>,
}

pub const SYNTH_GEO: Stage = Stage {
    name: "synth-geo",
    run: run_synth_geo,
    outputs: |ctx| vec![ctx.path("geo.csv")],
};
pub const SIMULATE: Stage = Stage {
    name: "simulate",
    run: run_simulate,
    outputs: |ctx| vec![ctx.path("traces")],
};
pub const ANALYZE: Stage = Stage {
    name: "analyze",
    run: run_analyze,
    outputs: |ctx| {
        vec![
            ctx.path("aggregated_migrations.csv"),
            ctx.path("migration_rate_histogram.csv"),
            ctx.path("downtime_surface.csv"),
            ctx.path("measured_stats.json"),
        ]
    },
};
pub const CATALOG: Stage = Stage {
    name: "catalog",
    run: run_catalog,
    outputs: |ctx| vec![ctx.path("catalog.json"), ctx.path("catalog.csv")],
};
pub const USERS: Stage = Stage {
    name: "users",
    run: run_users,
    outputs: |ctx| {
        vec![
            ctx.path("web_workloads.csv"),
            ctx.path("hpc_workloads.csv"),
            ctx.path("requirement_fits.json"),
            ctx.path("users.csv"),
            ctx.path("wtp_histogram.csv"),
        ]
    },
};
pub const SELECT: Stage = Stage {
    name: "select",
    run: run_select,
    outputs: |ctx| {
        vec![
            ctx.path("outcome.json"),
            ctx.path("selection_by_tier.csv"),
            ctx.path("users_scatter.csv"),
        ]
    },
};
pub const SWEEP: Stage = Stage {
    name: "sweep",
    run: run_sweep,
    outputs: |ctx| vec![ctx.path("sweep.csv"), ctx.path("sweep_summary.json")],
};
pub const SUMMARY: Stage = Stage {
    name: "summary",
    run: run_summary,
    outputs: |ctx| vec![ctx.path("summary.txt")],
};

/// All stages in dependency order.
pub const PIPELINE: &[Stage] = &[
    SYNTH_GEO, SIMULATE, ANALYZE, CATALOG, USERS, SELECT, SWEEP, SUMMARY,
];

/// Runs one stage, cleaning up its partial outputs on failure.
pub fn run_stage(ctx: &Ctx, stage: &Stage) -> Result<()> {
    fs::create_dir_all(&ctx.out).map_err(|e| Error::Io {
        path: ctx.out.display().to_string(),
        source: e,
    })?;
    let result = (stage.run)(ctx);
    if result.is_err() {
        for p in (stage.outputs)(ctx) {
            if p.is_dir() {
                let _ = fs::remove_dir_all(&p);
            } else {
                let _ = fs::remove_file(&p);
            }
        }
    }
    result
}

/// Resolves an artifact a stage depends on, with a hint on how to make it.
fn require(ctx: &Ctx, name: &str, produced_by: &str) -> Result<PathBuf> {
    let p = ctx.path(name);
    if !p.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `greensla {produced_by}` with the same --out first",
            p.display()
        )));
    }
    Ok(p)
}

// ---------------------------------------------------------------- synth-geo

fn run_synth_geo(ctx: &Ctx) -> Result<()> {
    let g = &ctx.cfg.geotemporal;
    let series = match &g.input_csv {
        Some(input) => {
            let series = load_series(input)?;
            for dc in &ctx.cfg.cloud.data_centers {
                let found = series.iter().find(|s| s.location_id == dc.id).ok_or_else(|| {
                    Error::Data(format!(
                        "{}: no series for data center {}",
                        input.display(),
                        dc.id
                    ))
                })?;
                if found.len() < g.hours {
                    return Err(Error::Data(format!(
                        "{}: series {} covers {} hours, the horizon needs {}",
                        input.display(),
                        dc.id,
                        found.len(),
                        g.hours
                    )));
                }
            }
            series
        }
        None => {
            let start = g.start_utc()?;
            ctx.cfg
                .cloud
                .data_centers
                .iter()
                .enumerate()
                .map(|(i, dc)| {
                    synth_series_with(
                        &dc.location(),
                        start,
                        g.hours,
                        &g.synth,
                        seed::derive2(ctx.cfg.master_seed, stream::GEOTEMPORAL, i as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    write_series(&series, ctx.path("geo.csv"))
}

// ----------------------------------------------------------------- simulate

/// Treatment categories of the pausing runs: the six canonical downtime
/// fractions, named like the tiers they feed. The savings model is always
/// fitted on these six points, no matter how many tiers the catalog has.
fn pauser_tcs() -> Vec<(String, f64)> {
    catalog8_fractions()
        .into_iter()
        .enumerate()
        .map(|(k, f)| (format!("sla{}", k + 3), f))
        .collect()
}

fn run_simulate(ctx: &Ctx) -> Result<()> {
    require(ctx, "geo.csv", "synth-geo")?;
    let series = load_series(ctx.path("geo.csv"))?;
    let horizon = ctx.cfg.geotemporal.hours;

    // Static baseline: a pauser that never pauses keeps the spread
    // placement for the whole horizon.
    let spec = ctx.cfg.cloud.spec("sla1", horizon);
    let trace = run_peak_pauser(&spec, &series, 0.0, ctx.cfg.pauser.window_days)?;
    write_tc(ctx, "sla1", &spec, &series, trace)?;

    let spec = ctx.cfg.cloud.spec("sla2", horizon);
    let trace = run_migration_scheduler(
        &spec,
        &series,
        &ctx.cfg.power,
        &ctx.cfg.ga,
        seed::derive(ctx.cfg.master_seed, stream::MIGRATION_SCHEDULER),
    )?;
    write_tc(ctx, "sla2", &spec, &series, trace)?;

    for (tc, fraction) in pauser_tcs() {
        let spec = ctx.cfg.cloud.spec(&tc, horizon);
        let trace = run_peak_pauser(&spec, &series, fraction, ctx.cfg.pauser.window_days)?;
        write_tc(ctx, &tc, &spec, &series, trace)?;
    }
    Ok(())
}

fn write_tc(
    ctx: &Ctx,
    tc: &str,
    spec: &CloudSpec,
    series: &[GeotemporalSeries],
    mut trace: ManagementTrace,
) -> Result<()> {
    let summary = energy_cost_accounting(spec, series, &ctx.cfg.power, &mut trace)?;
    let dir = ctx.trace_dir(tc);
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    cloudsim::write_events_csv(&trace, dir.join("events.csv"))?;
    cloudsim::write_placements_csv(&trace, dir.join("placements.csv"))?;
    cloudsim::write_costs_csv(&trace, dir.join("costs.csv"))?;
    report::write_json(&trace, &dir.join("trace.json"))?;
    report::write_json(&summary, &dir.join("cost_summary.json"))
}

// ------------------------------------------------------------------ analyze

/// Everything later stages need from the simulated traces, in one file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasuredStats {
    /// Live-migration tier inputs: promised availability, measured savings.
    pub migration: MigrationStats,
    /// Highest daily migration count any VM saw in the trace.
    pub measured_worst_migrations_per_day: u32,
    /// Daily migrations the SLA promises to stay under; the availability
    /// above is computed from the larger of budget and measurement.
    pub budget_migrations_per_day: f64,
    /// Contractual downtime charged per migration, seconds.
    pub budget_downtime_s: f64,
    /// Analytic worst case over the configured rate grids.
    pub grid_worst_case: WorstCase,
    pub static_cost_usd: f64,
    pub migration_cost_usd: f64,
    /// (downtime fraction, measured savings) of each pausing run.
    pub pauser_points: Vec<(f64, f64)>,
    pub pauser_model: PauserSavingsModel,
}

fn cost_summary(ctx: &Ctx, tc: &str) -> Result<CostSummary> {
    let p = ctx.trace_dir(tc).join("cost_summary.json");
    if !p.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `greensla simulate` with the same --out first",
            p.display()
        )));
    }
    report::read_json(&p)
}

fn run_analyze(ctx: &Ctx) -> Result<()> {
    let trace_path = ctx.trace_dir("sla2").join("trace.json");
    if !trace_path.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `greensla simulate` with the same --out first",
            trace_path.display()
        )));
    }
    let trace: ManagementTrace = report::read_json(&trace_path)?;
    let horizon = trace.horizon_hours;
    let days = horizon / 24;

    // Hourly migration counts per VM, folded into the hourly worst case.
    let n_vms = trace.vm_ids.len();
    let mut hourly = vec![vec![0u32; horizon]; n_vms];
    for e in &trace.events {
        if matches!(e.kind, EventKind::Migrate { .. }) {
            hourly[e.vm][e.hour] += 1;
        }
    }
    report::write_aggregated_migrations_csv(
        &aggregate_worst_case(&hourly),
        &ctx.path("aggregated_migrations.csv"),
    )?;

    // Daily counts per (VM, day) give the rate distribution and the
    // measured worst case the promised rate is checked against.
    let mut daily = Vec::with_capacity(n_vms * days);
    for day in 0..days {
        daily.extend(trace.migrations_per_vm(day * 24, (day + 1) * 24));
    }
    report::write_rate_histogram_csv(
        &rate_histogram(&daily),
        &ctx.path("migration_rate_histogram.csv"),
    )?;
    let measured_worst = daily.iter().copied().max().unwrap_or(0);

    let static_cost = cost_summary(ctx, "sla1")?.total_usd;
    let migration_cost = cost_summary(ctx, "sla2")?.total_usd;
    let s_mig = energy_savings(migration_cost, static_cost)?;

    // The promised rate never undercuts what the trace actually showed.
    let dt = &ctx.cfg.downtime;
    let promised = f64::from(measured_worst).max(dt.budget_migrations_per_day);
    let migration = MigrationStats::from_measurements(promised, dt.budget_downtime_s, s_mig);

    let mut pauser_points = Vec::new();
    for (tc, fraction) in pauser_tcs() {
        let cost = cost_summary(ctx, &tc)?.total_usd;
        pauser_points.push((fraction, energy_savings(cost, static_cost)?));
    }
    let pauser_model = PauserSavingsModel::fit(&pauser_points)?;

    let params = dt.params()?;
    let (r_grid, d_grid) = (dt.r_grid(), dt.d_grid());
    report::write_downtime_surface_csv(&params, &r_grid, &d_grid, &ctx.path("downtime_surface.csv"))?;
    let grid_worst_case = worst_case_downtime(&params, &r_grid, &d_grid)?;

    let stats = MeasuredStats {
        migration,
        measured_worst_migrations_per_day: measured_worst,
        budget_migrations_per_day: dt.budget_migrations_per_day,
        budget_downtime_s: dt.budget_downtime_s,
        grid_worst_case,
        static_cost_usd: static_cost,
        migration_cost_usd: migration_cost,
        pauser_points,
        pauser_model,
    };
    report::write_json(&stats, &ctx.path("measured_stats.json"))
}

// ------------------------------------------------------------------ catalog

fn run_catalog(ctx: &Ctx) -> Result<()> {
    let stats: MeasuredStats = report::read_json(&require(ctx, "measured_stats.json", "analyze")?)?;
    let base = BaseVm::default();
    let catalog = if ctx.cfg.catalog.size == 8 {
        // The classic eight-tier layout uses the directly measured savings;
        // every other size interpolates through the fitted model.
        let measured: Vec<Option<f64>> =
            stats.pauser_points.iter().map(|&(_, s)| Some(s)).collect();
        build_catalog_8(&base, &stats.migration, &measured)?
    } else {
        build_catalog_n(&base, &stats.migration, &stats.pauser_model, ctx.cfg.catalog.size)?
    };
    write_catalog_json(&catalog, ctx.path("catalog.json"))?;
    write_catalog_csv(&catalog, ctx.path("catalog.csv"))
}

// -------------------------------------------------------------------- users

fn run_users(ctx: &Ctx) -> Result<()> {
    let w = &ctx.cfg.workloads;
    let web = synth_web_workloads(
        w.web_count,
        w.observed_hours,
        w.web_offset_scale,
        seed::derive2(ctx.cfg.master_seed, stream::WORKLOADS, 0),
    )?;
    let hpc = synth_hpc_workloads(
        w.hpc_count,
        w.hpc_load_mean,
        w.hpc_load_sigma,
        seed::derive2(ctx.cfg.master_seed, stream::WORKLOADS, 1),
    )?;
    write_web_workloads_csv(&web, ctx.path("web_workloads.csv"))?;
    write_hpc_workloads_csv(&hpc, ctx.path("hpc_workloads.csv"))?;

    let fits = fit_requirements(&web, &hpc)?;
    report::write_json(&fits, &ctx.path("requirement_fits.json"))?;

    let users = sample_population(
        &ctx.cfg.population,
        &fits,
        seed::derive(ctx.cfg.master_seed, stream::POPULATION),
    )?;
    write_population_csv(&users, ctx.path("users.csv"))?;
    report::write_wtp_histogram_csv(&users, 0.02, &ctx.path("wtp_histogram.csv"))
}

// ------------------------------------------------------------------- select

fn run_select(ctx: &Ctx) -> Result<()> {
    let catalog = read_catalog_json(require(ctx, "catalog.json", "catalog")?)?;
    let users = load_population_csv(require(ctx, "users.csv", "users")?)?;
    let result = simulate_selection(
        &catalog,
        &users,
        &ctx.cfg.selection,
        seed::derive(ctx.cfg.master_seed, stream::SELECTION),
    )?;
    report::write_json(&result, &ctx.path("outcome.json"))?;

    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut scatter = Vec::with_capacity(users.len());
    for (user, outcome) in users.iter().zip(&result.outcomes) {
        let label = match outcome {
            Outcome::Chosen { tier } => catalog.tiers[*tier].id.clone(),
            Outcome::Quit { .. } => "quit".into(),
            Outcome::Unmatched => "unmatched".into(),
        };
        let slot = counts.entry(label.clone()).or_default();
        match user.kind {
            UserKind::Web => slot.0 += 1,
            UserKind::Hpc => slot.1 += 1,
        }
        scatter.push((user.clone(), label));
    }
    report::write_selection_by_tier_csv(&catalog, &counts, &ctx.path("selection_by_tier.csv"))?;
    report::write_users_scatter_csv(&scatter, &ctx.path("users_scatter.csv"))
}

// -------------------------------------------------------------------- sweep

fn run_sweep(ctx: &Ctx) -> Result<()> {
    let stats: MeasuredStats = report::read_json(&require(ctx, "measured_stats.json", "analyze")?)?;
    let fits: RequirementFits = report::read_json(&require(ctx, "requirement_fits.json", "users")?)?;
    let base = BaseVm::default();
    let result = sweep_catalog_sizes(
        |n| build_catalog_n(&base, &stats.migration, &stats.pauser_model, n),
        &ctx.cfg.population,
        &fits,
        &ctx.cfg.selection,
        &ctx.cfg.sweep,
        ctx.cfg.master_seed,
    )?;
    report::write_sweep_csv(&result.sizes, &result.conversion_per_run, &ctx.path("sweep.csv"))?;
    report::write_json(&result, &ctx.path("sweep_summary.json"))
}

// ------------------------------------------------------------------ summary

fn run_summary(ctx: &Ctx) -> Result<()> {
    let catalog = read_catalog_json(require(ctx, "catalog.json", "catalog")?)?;
    let stats: MeasuredStats = report::read_json(&require(ctx, "measured_stats.json", "analyze")?)?;
    let outcome: SelectionResult = report::read_json(&require(ctx, "outcome.json", "select")?)?;
    let sweep: SweepResult = report::read_json(&require(ctx, "sweep_summary.json", "sweep")?)?;
    report::write_text(
        &render_summary(&ctx.cfg, &catalog, &stats, &outcome, &sweep),
        &ctx.path("summary.txt"),
    )
}

fn policy_label(policy: &PolicyKind) -> String {
    match policy {
        PolicyKind::Static => "static".into(),
        PolicyKind::Migration => "migration".into(),
        PolicyKind::Pauser { downtime_fraction } => format!("pauser f={downtime_fraction:.3}"),
    }
}

fn render_summary(
    cfg: &PipelineConfig,
    catalog: &Catalog,
    stats: &MeasuredStats,
    outcome: &SelectionResult,
    sweep: &SweepResult,
) -> String {
    let mut s = String::new();
    let total_pms: usize = cfg.cloud.data_centers.iter().map(|d| d.pm_count).sum();
    let _ = writeln!(s, "greensla run summary");
    let _ = writeln!(s, "====================");
    let _ = writeln!(s);
    let _ = writeln!(s, "master seed    {}", cfg.master_seed);
    let _ = writeln!(
        s,
        "horizon        {} h ({} days)",
        cfg.geotemporal.hours,
        cfg.geotemporal.hours / 24
    );
    let _ = writeln!(
        s,
        "cloud          {} data centers, {} PMs x {} slots, {} VMs",
        cfg.cloud.data_centers.len(),
        total_pms,
        cfg.cloud.pm_capacity,
        cfg.cloud.vm_count
    );
    let _ = writeln!(s);

    let promised = f64::from(stats.measured_worst_migrations_per_day)
        .max(stats.budget_migrations_per_day);
    let _ = writeln!(s, "migration policy");
    let _ = writeln!(
        s,
        "  measured worst rate    {} migrations/day",
        stats.measured_worst_migrations_per_day
    );
    let _ = writeln!(
        s,
        "  promised worst rate    {:.1} migrations/day x {:.0} s",
        promised, stats.budget_downtime_s
    );
    let _ = writeln!(
        s,
        "  promised availability  {:.5}",
        stats.migration.availability
    );
    let _ = writeln!(
        s,
        "  grid worst downtime    {:.1} s at r = {:.2e} bit/s, d = {:.2e} bit/s",
        stats.grid_worst_case.downtime_s, stats.grid_worst_case.r_bps, stats.grid_worst_case.d_bps
    );
    let _ = writeln!(
        s,
        "  energy savings         {:.1}% (cost {:.2} vs {:.2} USD)",
        stats.migration.en_savings * 100.0,
        stats.migration_cost_usd,
        stats.static_cost_usd
    );
    let _ = writeln!(s);

    let _ = writeln!(s, "pauser savings model");
    let _ = writeln!(s, "  fitted amplitude       {:.4}", stats.pauser_model.amplitude);
    for (f, sv) in &stats.pauser_points {
        let _ = writeln!(s, "  f = {:.3}  ->  savings {:.1}%", f, sv * 100.0);
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "catalog ({} tiers)", catalog.len());
    let _ = writeln!(
        s,
        "  {:<6} {:<14} {:>12} {:>8} {:>9}",
        "id", "policy", "availability", "savings", "price/h"
    );
    for t in &catalog.tiers {
        let _ = writeln!(
            s,
            "  {:<6} {:<14} {:>12.5} {:>7.1}% {:>9.4}",
            t.id,
            policy_label(&t.policy),
            t.availability,
            t.en_savings * 100.0,
            t.price_usd_per_hour
        );
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "selection ({} users)", outcome.outcomes.len());
    let _ = writeln!(
        s,
        "  conversion             {:.1}% (quit {:.1}%, unmatched {:.1}%)",
        outcome.conversion * 100.0,
        outcome.quit_share * 100.0,
        outcome.unmatched_share * 100.0
    );
    if let Some((id, n)) = outcome.tier_counts.iter().max_by_key(|&(_, n)| n) {
        let _ = writeln!(s, "  most subscribed tier   {id} ({n} users)");
    }
    let _ = writeln!(
        s,
        "  revenue                {:.0} USD/year",
        outcome.revenue_usd_per_year
    );
    let _ = writeln!(
        s,
        "  lease-weighted savings {:.1}%",
        outcome.lease_weighted_en_savings * 100.0
    );
    let _ = writeln!(s);

    let best_conv = sweep
        .per_size
        .iter()
        .find(|p| p.size == sweep.best_mean_size)
        .map_or(0.0, |p| p.mean_conversion);
    let _ = writeln!(
        s,
        "size sweep ({}..{}, {} runs)",
        cfg.sweep.min_size, cfg.sweep.max_size, cfg.sweep.runs
    );
    let _ = writeln!(
        s,
        "  best mean size         {} (conversion {:.1}%)",
        sweep.best_mean_size,
        best_conv * 100.0
    );
    let _ = writeln!(
        s,
        "  argmax {:.0}% CI          [{:.0}, {:.0}]",
        sweep.argmax_ci.level * 100.0,
        sweep.argmax_ci.lower,
        sweep.argmax_ci.upper
    );
    s
}
