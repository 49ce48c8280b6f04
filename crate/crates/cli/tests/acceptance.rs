//! Release gate: one test per advertised guarantee, each printing a single
//! `acceptance N (<label>): PASS/FAIL (<numbers>)` line before asserting.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Criteria 1-5 exercise the library directly; 6-8 drive the `greensla`
//! binary end to end in temporary directories with the default settings.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use greensla_core::downtime::{
    default_d_grid, default_r_grid, downtime, rounds, DowntimeParams, SLA_MIGRATION_DOWNTIME_S,
};
use greensla_core::selection::{
    cumulative_stop_probability, satisfaction, SatisfactionParams, SelectionConfig,
};
use greensla_core::slamodel::{build_catalog_8, BaseVm, MigrationStats};
use greensla_core::tracestats::{bootstrap_ci, bootstrap_distribution, Statistic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(idx: u32, label: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {idx} ({label}): {verdict} ({details})");
    assert!(pass, "acceptance {idx} ({label}): {verdict} ({details})");
}

// ------------------------------------------------------- downtime closed form

/// Reference model: replay the pre-copy rounds one by one.
fn replay(p: &DowntimeParams, r: f64, d: f64) -> (u64, f64) {
    let mut v = p.v_mem_bits;
    let mut n = 0u64;
    while v > p.v_thd_bits {
        v *= d / r;
        n += 1;
    }
    (n, v / r + p.t_resume_s)
}

#[test]
fn criterion_1_downtime_closed_form_matches_replay() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0acce551);
    let mut max_rel = 0.0f64;
    for _ in 0..10_000 {
        let v_mem = rng.random_range(1e6..1e12);
        let thd_frac = rng.random_range(1e-6..1.0);
        let t_resume = rng.random_range(0.0..20.0);
        let r = rng.random_range(1e3..1e10);
        // Keep the ratio away from 1 so the replay terminates quickly; the
        // closed form itself handles ratios arbitrarily close to 1.
        let d = rng.random_range(0.0..0.99) * r;
        let p = DowntimeParams::new(v_mem, v_mem * thd_frac, t_resume).unwrap();
        let (n_ref, t_ref) = replay(&p, r, d);
        assert_eq!(rounds(&p, r, d).unwrap(), n_ref, "rounds at r={r} d={d}");
        let t = downtime(&p, r, d).unwrap();
        max_rel = max_rel.max((t - t_ref).abs() / t_ref.abs().max(1.0));
    }

    // Analytic bound on the default grid: the stop-and-copy remainder is at
    // most the threshold, so downtime <= v_thd / r + t_resume.
    let p = DowntimeParams::default();
    let mut pairs = 0usize;
    let mut bound_holds = true;
    for &r in &default_r_grid() {
        for &d in &default_d_grid() {
            if d >= r {
                continue;
            }
            pairs += 1;
            let t = downtime(&p, r, d).unwrap();
            bound_holds &= t <= (p.v_thd_bits / r + p.t_resume_s) * (1.0 + 1e-12);
        }
    }
    let elapsed = t0.elapsed();

    let pass = max_rel <= 1e-9 && bound_holds && elapsed.as_secs_f64() < 1.0;
    report(
        1,
        "downtime closed form vs replay",
        pass,
        &format!(
            "max rel err {max_rel:.2e} over 10000 tuples, remainder bound holds on {pairs} \
             grid pairs, {} ms",
            elapsed.as_millis()
        ),
    );
}

// --------------------------------------------------------- availability chain

#[test]
fn criterion_2_migration_availability_and_catalog_levels() {
    let stats = MigrationStats::from_measurements(4.0, SLA_MIGRATION_DOWNTIME_S, 0.5);
    let expected = 1.0 - 4.0 * 400.0 / 86_400.0;
    let exact = (stats.availability - expected).abs() < 1e-15;
    // The production guarantee this models is quoted as 98.12%; the derived
    // figure must sit within 0.05 percentage points of it.
    let pp_gap = (stats.availability - 0.9812).abs() * 100.0;

    let catalog = build_catalog_8(
        &BaseVm::default(),
        &MigrationStats::default(),
        &[None; 6],
    )
    .unwrap();
    let has = |v: f64| catalog.tiers.iter().any(|t| t.availability == v);
    let has_875 = has(0.875);
    let has_third = has(1.0 - 2.0 / 3.0);

    let pass = exact && pp_gap <= 0.05 && has_875 && has_third;
    report(
        2,
        "availability chain",
        pass,
        &format!(
            "400 s x 4/day -> {:.7} ({pp_gap:.4} pp from 0.9812), catalog hits 0.875: \
             {has_875}, 1 - 2/3: {has_third}",
            stats.availability
        ),
    );
}

// ------------------------------------------------------------------ base price

#[test]
fn criterion_3_base_tier_price() {
    let catalog = build_catalog_8(
        &BaseVm::default(),
        &MigrationStats::default(),
        &[None; 6],
    )
    .unwrap();
    let price = catalog.tiers[0].price_usd_per_hour;
    let pass = catalog.tiers[0].id == "sla1" && (price - 0.28).abs() < 5e-5;
    report(
        3,
        "base tier price",
        pass,
        &format!("sla1 at {price:.6} $/h vs 0.2800 target"),
    );
}

// --------------------------------------------------- satisfaction + quit chain

#[test]
fn criterion_4_satisfaction_and_quit_identities() {
    let t0 = Instant::now();
    let params = SatisfactionParams::default();

    // A perfectly matched offer satisfies exactly at the saturation ratio
    // gamma / (gamma + beta) = 0.99, bit-exact with the default shape.
    let mut matched_exact = true;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a715fac);
    for _ in 0..1_000 {
        let x: f64 = rng.random_range(0.0..=1.0);
        matched_exact &= satisfaction(&params, x, x) == 0.99;
    }

    // Quit chain at the default patience cost: never before the first
    // check, then 0.015, then 1 - 0.985 * 0.97.
    let cfg = SelectionConfig::default();
    let q = |k| cumulative_stop_probability(k, cfg.check_cost);
    let chain_ok = q(0) == 0.0
        && (q(1) - 0.015).abs() <= 1e-12
        && (q(2) - 0.04455).abs() <= 1e-12;

    // Randomized monotonicity sweeps: satisfaction never drops when the
    // offer improves, and the quit chain never loses probability mass.
    let mut monotone = true;
    for _ in 0..2_000 {
        let req: f64 = rng.random_range(0.0..=1.0);
        let a = rng.random_range(0.0..=1.0);
        let b = rng.random_range(0.0..=1.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        monotone &= satisfaction(&params, req, lo) <= satisfaction(&params, req, hi) + 1e-12;
    }
    for _ in 0..200 {
        let cost = rng.random_range(0.0..0.2);
        let mut prev = 0.0;
        for k in 0..=50 {
            let c = cumulative_stop_probability(k, cost);
            monotone &= c + 1e-12 >= prev && (0.0..=1.0).contains(&c);
            prev = c;
        }
    }
    let elapsed = t0.elapsed();

    let pass = matched_exact && chain_ok && monotone && elapsed.as_secs_f64() < 1.0;
    report(
        4,
        "satisfaction and quit identities",
        pass,
        &format!(
            "matched offers at 0.99 exactly: {matched_exact}, quit chain (0, 0.015, 0.04455): \
             {chain_ok}, monotone sweeps: {monotone}, {} ms",
            elapsed.as_millis()
        ),
    );
}

// ------------------------------------------------------------------- bootstrap

#[test]
fn criterion_5_bootstrap_max_distribution() {
    let data = [3.0, 3.0, 3.0, 4.0];
    let resamples = 10_000;
    let dist = bootstrap_distribution(&data, Statistic::Max, resamples, 7).unwrap();
    let share3 = dist.iter().filter(|&&v| v == 3.0).count() as f64 / resamples as f64;
    // Exhaustively, max = 3 iff all four draws miss the single 4: (3/4)^4.
    let p = 0.75f64.powi(4);
    let sigma = (p * (1.0 - p) / resamples as f64).sqrt();
    let within = (share3 - p).abs() <= 3.0 * sigma;

    let constant = [5.0; 4];
    let ci = bootstrap_ci(&constant, Statistic::Max, 1_000, 0.95, 7).unwrap();
    let degenerate = ci.lower == 5.0 && ci.upper == 5.0;

    let pass = within && degenerate;
    report(
        5,
        "bootstrap of the worst case",
        pass,
        &format!(
            "P(max=3) = {share3:.4} vs {p:.4} (|delta| = {:.4}, 3 sigma = {:.4}), constant \
             input CI width {}",
            (share3 - p).abs(),
            3.0 * sigma,
            ci.upper - ci.lower
        ),
    );
}

// --------------------------------------------------------- binary-level checks

fn greensla(out: &Path, args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_greensla"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .expect("failed to spawn greensla");
    assert!(
        output.status.success(),
        "greensla {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON {}: {e}", path.display()))
}

#[test]
fn criterion_6_default_pipeline_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let t0 = Instant::now();
    for stage in ["synth-geo", "simulate", "analyze", "catalog", "users", "select"] {
        greensla(out, &[stage]);
    }
    let elapsed = t0.elapsed();

    let outcome = read_json(&out.join("outcome.json"));
    let unmatched_share = outcome["unmatched_share"].as_f64().unwrap();
    let savings = outcome["lease_weighted_en_savings"].as_f64().unwrap();

    // Per-kind tier histogram and willingness-to-pay split from the scatter.
    let scatter = std::fs::read_to_string(out.join("users_scatter.csv")).unwrap();
    let mut web: BTreeMap<String, usize> = BTreeMap::new();
    let mut hpc: BTreeMap<String, usize> = BTreeMap::new();
    let (mut wtp_matched, mut n_matched) = (0.0, 0usize);
    let (mut wtp_unmatched, mut n_unmatched) = (0.0, 0usize);
    for line in scatter.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (kind, wtp, outcome) = (f[1], f[4].parse::<f64>().unwrap(), f[5]);
        match outcome {
            "quit" => {}
            "unmatched" => {
                wtp_unmatched += wtp;
                n_unmatched += 1;
            }
            tier => {
                *match kind {
                    "web" => web.entry(tier.into()).or_default(),
                    _ => hpc.entry(tier.into()).or_default(),
                } += 1;
                wtp_matched += wtp;
                n_matched += 1;
            }
        }
    }
    let mode = |m: &BTreeMap<String, usize>| {
        m.iter().max_by_key(|(_, &c)| c).map(|(t, _)| t.clone()).unwrap()
    };
    let (web_mode, hpc_mode) = (mode(&web), mode(&hpc));
    let hpc_total: usize = hpc.values().sum();
    // The two lowest-availability offers of the default catalog.
    let hpc_low2 = (hpc.get("sla7").copied().unwrap_or(0)
        + hpc.get("sla8").copied().unwrap_or(0)) as f64
        / hpc_total as f64;
    let wtp_matched = wtp_matched / n_matched as f64;
    let wtp_unmatched = wtp_unmatched / n_unmatched as f64;

    let pass = unmatched_share < 0.10
        && web_mode == "sla2"
        && (hpc_mode == "sla7" || hpc_mode == "sla8")
        && hpc_low2 >= 0.35
        && wtp_unmatched < wtp_matched
        && savings > 0.0
        && elapsed.as_secs_f64() < 30.0;
    report(
        6,
        "default pipeline selection",
        pass,
        &format!(
            "unmatched {unmatched_share:.3}, web mode {web_mode}, hpc mode {hpc_mode} with \
             {hpc_low2:.3} of hpc mass in the two lowest offers, wtp unmatched \
             {wtp_unmatched:.3} < matched {wtp_matched:.3}, lease-weighted savings \
             {savings:.3} (reference design point 0.39), {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_catalog_size_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for stage in ["synth-geo", "simulate", "analyze", "users"] {
        greensla(out, &[stage]);
    }
    let t0 = Instant::now();
    greensla(out, &["sweep"]);
    let elapsed = t0.elapsed();

    let summary = read_json(&out.join("sweep_summary.json"));
    let sizes: Vec<u64> = summary["sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(sizes, (1..=60).collect::<Vec<u64>>());
    let conv: Vec<f64> = summary["per_size"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["mean_conversion"].as_f64().unwrap())
        .collect();
    let runs = summary["conversion_per_run"].as_array().unwrap().len();
    assert_eq!(runs, 100);

    let rising = (0..5).all(|i| conv[i] <= conv[i + 1] + 1e-12);
    let falling = (29..59).all(|i| conv[i] >= conv[i + 1] - 1e-12);
    let lo = summary["argmax_ci"]["lower"].as_f64().unwrap();
    let hi = summary["argmax_ci"]["upper"].as_f64().unwrap();
    let ci_ok = hi - lo <= 8.0 && lo >= 4.0 && hi <= 20.0;

    let pass = rising && falling && ci_ok && elapsed.as_secs_f64() < 300.0;
    report(
        7,
        "catalog size sweep",
        pass,
        &format!(
            "mean conversion non-decreasing through 6: {rising}, non-increasing from 30: \
             {falling}, argmax 95% CI [{lo:.0}, {hi:.0}] (reference design interval [8, 10]), \
             sweep {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_8_pipeline_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    greensla(a.path(), &["pipeline"]);
    greensla(b.path(), &["pipeline"]);

    fn walk(root: &Path, dir: &Path, into: &mut Vec<std::path::PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, into);
            } else {
                into.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut files_a = Vec::new();
    let mut files_b = Vec::new();
    walk(a.path(), a.path(), &mut files_a);
    walk(b.path(), b.path(), &mut files_b);
    files_a.sort();
    files_b.sort();

    let same_set = files_a == files_b;
    let mut identical = 0usize;
    let mut differing = Vec::new();
    for rel in &files_a {
        if std::fs::read(a.path().join(rel)).unwrap() == std::fs::read(b.path().join(rel)).unwrap()
        {
            identical += 1;
        } else {
            differing.push(rel.display().to_string());
        }
    }

    let pass = same_set && differing.is_empty() && !files_a.is_empty();
    report(
        8,
        "pipeline determinism",
        pass,
        &format!(
            "{identical}/{} files byte-identical across two runs{}",
            files_a.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(", differing: {}", differing.join(", "))
            }
        ),
    );
}
