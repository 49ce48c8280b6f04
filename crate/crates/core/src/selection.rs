//! Utility-based SLA selection by a user population, with impatience.
//!
//! A user values an offer by how well its availability covers their
//! requirement (a logistic satisfaction curve, steeper for demanding
//! users) times their willingness to pay, minus the price. Users scan the
//! catalog from the top tier downwards. While every offer so far was
//! worthless to them, each further rejection risks them walking away —
//! checking offers costs patience, and the stop probability grows with
//! every consecutive rejection. The first worthwhile offer hooks them:
//! they then evaluate the rest of the catalog calmly and take the best.

use crate::slamodel::{Catalog, SlaTier};
use crate::tracestats::{bootstrap_ci, ConfidenceInterval, Statistic};
use crate::users::{PopulationParams, RequirementFits, User};
use crate::{seed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Shape of the satisfaction curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SatisfactionParams {
    /// Steepness of the availability-shortfall response.
    pub alpha: f64,
    /// Baseline odds of dissatisfaction.
    pub beta: f64,
    /// Saturation level; satisfaction at a perfectly matched offer is
    /// `gamma / (gamma + beta)`.
    pub gamma: f64,
}

impl Default for SatisfactionParams {
    fn default() -> Self {
        Self {
            alpha: 60.0,
            beta: 0.01,
            gamma: 0.99,
        }
    }
}

impl SatisfactionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::config(
                "satisfaction curve needs alpha >= 0, beta > 0, gamma > 0",
            ));
        }
        Ok(())
    }
}

/// Satisfaction of a user requiring `required` availability with an offer
/// of `offered`. Logistic in the shortfall, weighted by the square of the
/// requirement: demanding users punish a shortfall much harder than
/// relaxed users, and any over-offer saturates towards one.
#[must_use]
pub fn satisfaction(params: &SatisfactionParams, required: f64, offered: f64) -> f64 {
    let exponent = params.alpha * required * required * (required - offered);
    params.gamma / (params.gamma + params.beta * exponent.exp())
}

/// Hourly utility of `tier` for `user`: satisfaction-weighted willingness
/// to pay minus the price. Positive means worth buying.
#[must_use]
pub fn utility(params: &SatisfactionParams, user: &User, tier: &SlaTier) -> f64 {
    user.wtp_usd_per_hour * satisfaction(params, user.required_availability, tier.availability)
        - tier.price_usd_per_hour
}

/// Probability of walking away right after the `checks`-th consecutive
/// worthless offer.
#[must_use]
pub fn stop_probability(checks: usize, check_cost: f64) -> f64 {
    (checks as f64 * check_cost).min(1.0)
}

/// Probability of having walked away at some point within `checks`
/// consecutive worthless offers.
#[must_use]
pub fn cumulative_stop_probability(checks: usize, check_cost: f64) -> f64 {
    let mut survive = 1.0;
    for j in 1..=checks {
        survive *= 1.0 - stop_probability(j, check_cost);
    }
    1.0 - survive
}

/// Behavioral knobs of the selection process.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub satisfaction: SatisfactionParams,
    /// Patience lost per rejected offer; drives the quit chain.
    pub check_cost: f64,
    /// Served hours per year used for revenue accounting.
    pub hours_per_year: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            satisfaction: SatisfactionParams::default(),
            check_cost: 0.015,
            hours_per_year: 8760.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.satisfaction.validate()?;
        if !(0.0..=1.0).contains(&self.check_cost) {
            return Err(Error::config("check cost must lie in [0, 1]"));
        }
        if !(self.hours_per_year > 0.0) {
            return Err(Error::config("hours per year must be positive"));
        }
        Ok(())
    }
}

/// How one user's scan ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Outcome {
    /// Index into the catalog's tiers.
    Chosen { tier: usize },
    /// Walked away after this many consecutive worthless offers.
    Quit { negative_checks: usize },
    /// Scanned everything; nothing was worth buying.
    Unmatched,
}

/// Population-level result of one selection simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Aligned with the user slice passed in.
    pub outcomes: Vec<Outcome>,
    /// Subscriptions per tier id.
    pub tier_counts: BTreeMap<String, usize>,
    pub conversion: f64,
    pub quit_share: f64,
    pub unmatched_share: f64,
    /// Mean over users of the exact quit probability implied by their
    /// utility signs; the expectation the simulated quit share fluctuates
    /// around.
    pub mean_analytic_quit: f64,
    /// Yearly revenue: availability-weighted price over leased hours of
    /// every subscription.
    pub revenue_usd_per_year: f64,
    /// Mean energy savings of subscribed users, weighted by lease share.
    pub lease_weighted_en_savings: f64,
}

struct UserVerdict {
    outcome: Outcome,
    analytic_quit: f64,
}

fn scan_user(
    catalog: &Catalog,
    config: &SelectionConfig,
    user: &User,
    quit_seed: u64,
) -> UserVerdict {
    let n = catalog.tiers.len();
    let utilities: Vec<f64> = catalog
        .tiers
        .iter()
        .map(|t| utility(&config.satisfaction, user, t))
        .collect();
    // Exact quit probability given the utility signs: one survival factor
    // per worthless offer before the first worthwhile one, skipping the
    // final offer (with nothing left to check, there is nothing to quit).
    let prefix = utilities.iter().take_while(|&&u| u <= 0.0).count();
    let analytic_quit = cumulative_stop_probability(prefix.min(n.saturating_sub(1)), config.check_cost);

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(quit_seed, user.id as u64));
    for (k, &u) in utilities.iter().enumerate() {
        if u > 0.0 {
            let mut best = k;
            for (j, &candidate) in utilities.iter().enumerate().skip(k + 1) {
                if candidate > utilities[best] {
                    best = j;
                }
            }
            return UserVerdict {
                outcome: Outcome::Chosen { tier: best },
                analytic_quit,
            };
        }
        let negative_checks = k + 1;
        if k + 1 < n {
            let p = stop_probability(negative_checks, config.check_cost);
            if rng.random::<f64>() < p {
                return UserVerdict {
                    outcome: Outcome::Quit { negative_checks },
                    analytic_quit,
                };
            }
        }
    }
    UserVerdict {
        outcome: Outcome::Unmatched,
        analytic_quit,
    }
}

/// Simulates the whole population against `catalog`. Each user draws their
/// quit decisions from an RNG stream derived from `(quit_seed, user id)`,
/// so the same user faces the same impatience across different catalogs —
/// comparisons between catalog sizes are paired.
pub fn simulate_selection(
    catalog: &Catalog,
    users: &[User],
    config: &SelectionConfig,
    quit_seed: u64,
) -> Result<SelectionResult> {
    catalog.validate()?;
    config.validate()?;
    if users.is_empty() {
        return Err(Error::data("selection needs at least one user"));
    }

    let verdicts: Vec<UserVerdict> = users
        .par_iter()
        .map(|user| scan_user(catalog, config, user, quit_seed))
        .collect();

    let n = users.len() as f64;
    let mut tier_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut chosen = 0usize;
    let mut quit = 0usize;
    let mut revenue = 0.0;
    let mut savings_mass = 0.0;
    let mut lease_mass = 0.0;
    for (user, verdict) in users.iter().zip(&verdicts) {
        match verdict.outcome {
            Outcome::Chosen { tier } => {
                chosen += 1;
                let t = &catalog.tiers[tier];
                *tier_counts.entry(t.id.clone()).or_insert(0) += 1;
                revenue += t.availability
                    * t.price_usd_per_hour
                    * config.hours_per_year
                    * user.lease_share;
                savings_mass += user.lease_share * t.en_savings;
                lease_mass += user.lease_share;
            }
            Outcome::Quit { .. } => quit += 1,
            Outcome::Unmatched => {}
        }
    }
    let unmatched = users.len() - chosen - quit;
    Ok(SelectionResult {
        outcomes: verdicts.iter().map(|v| v.outcome).collect(),
        tier_counts,
        conversion: chosen as f64 / n,
        quit_share: quit as f64 / n,
        unmatched_share: unmatched as f64 / n,
        mean_analytic_quit: verdicts.iter().map(|v| v.analytic_quit).sum::<f64>() / n,
        revenue_usd_per_year: revenue,
        lease_weighted_en_savings: if lease_mass > 0.0 {
            savings_mass / lease_mass
        } else {
            0.0
        },
    })
}

/// Sweep controls: catalog sizes to try and how many paired populations to
/// try them on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    pub min_size: usize,
    pub max_size: usize,
    pub runs: usize,
    /// Bootstrap resamples for the interval around the best size.
    pub resamples: usize,
    pub ci_level: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            min_size: 1,
            max_size: 60,
            runs: 100,
            resamples: 10_000,
            ci_level: 0.95,
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_size == 0 || self.max_size < self.min_size {
            return Err(Error::config("sweep sizes must satisfy 1 <= min <= max"));
        }
        if self.runs == 0 {
            return Err(Error::config("sweep needs at least one run"));
        }
        if self.resamples == 0 {
            return Err(Error::config("sweep needs at least one bootstrap resample"));
        }
        if !(0.0 < self.ci_level && self.ci_level < 1.0) {
            return Err(Error::config("confidence level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Mean outcomes of one catalog size across all runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SizeStats {
    pub size: usize,
    pub mean_conversion: f64,
    pub mean_quit_share: f64,
    pub mean_unmatched_share: f64,
    pub mean_revenue_usd_per_year: f64,
}

/// Result of [`sweep_catalog_sizes`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    /// Catalog sizes tried, ascending.
    pub sizes: Vec<usize>,
    pub per_size: Vec<SizeStats>,
    /// Conversion of every run at every size; `[run][size index]`.
    pub conversion_per_run: Vec<Vec<f64>>,
    /// Conversion-best catalog size of each run (ties to the smaller size).
    pub argmax_per_run: Vec<usize>,
    /// Bootstrap interval around the median best size.
    pub argmax_ci: ConfidenceInterval,
    /// Size with the best mean conversion (ties to the smaller size).
    pub best_mean_size: usize,
}

/// Tries every catalog size on `runs` independently sampled populations.
///
/// Each run r draws its own population and its own quit streams, both
/// derived from the master seed, and scores every size against exactly
/// those users and those quit decisions — sizes are compared under common
/// random numbers. The per-run best size (by conversion) is then
/// bootstrapped into a confidence interval for "how many tiers should the
/// catalog have".
pub fn sweep_catalog_sizes(
    catalog_of: impl Fn(usize) -> Result<Catalog> + Sync,
    pop: &PopulationParams,
    fits: &RequirementFits,
    config: &SelectionConfig,
    sweep: &SweepParams,
    master_seed: u64,
) -> Result<SweepResult> {
    sweep.validate()?;
    let sizes: Vec<usize> = (sweep.min_size..=sweep.max_size).collect();
    let catalogs: Vec<Catalog> = sizes.iter().map(|&n| catalog_of(n)).collect::<Result<_>>()?;

    struct RunRow {
        conversions: Vec<f64>,
        quits: Vec<f64>,
        unmatched: Vec<f64>,
        revenues: Vec<f64>,
        argmax: usize,
    }

    let rows: Vec<RunRow> = (0..sweep.runs)
        .into_par_iter()
        .map(|run| -> Result<RunRow> {
            let run_stream = seed::stream::SWEEP_BASE + run as u64;
            let users = crate::users::sample_population(
                pop,
                fits,
                seed::derive(master_seed, run_stream),
            )?;
            let quit_seed = seed::derive2(master_seed, run_stream, 1);
            let mut conversions = Vec::with_capacity(catalogs.len());
            let mut quits = Vec::with_capacity(catalogs.len());
            let mut unmatched = Vec::with_capacity(catalogs.len());
            let mut revenues = Vec::with_capacity(catalogs.len());
            for catalog in &catalogs {
                let result = simulate_selection(catalog, &users, config, quit_seed)?;
                conversions.push(result.conversion);
                quits.push(result.quit_share);
                unmatched.push(result.unmatched_share);
                revenues.push(result.revenue_usd_per_year);
            }
            let mut argmax = 0;
            for (i, &c) in conversions.iter().enumerate() {
                if c > conversions[argmax] {
                    argmax = i;
                }
            }
            Ok(RunRow {
                conversions,
                quits,
                unmatched,
                revenues,
                argmax: sizes[argmax],
            })
        })
        .collect::<Result<_>>()?;

    let runs = rows.len() as f64;
    let per_size = sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| SizeStats {
            size,
            mean_conversion: rows.iter().map(|r| r.conversions[i]).sum::<f64>() / runs,
            mean_quit_share: rows.iter().map(|r| r.quits[i]).sum::<f64>() / runs,
            mean_unmatched_share: rows.iter().map(|r| r.unmatched[i]).sum::<f64>() / runs,
            mean_revenue_usd_per_year: rows.iter().map(|r| r.revenues[i]).sum::<f64>() / runs,
        })
        .collect::<Vec<_>>();

    let conversion_per_run: Vec<Vec<f64>> = rows.iter().map(|r| r.conversions.clone()).collect();
    let argmax_per_run: Vec<usize> = rows.iter().map(|r| r.argmax).collect();
    let argmax_f64: Vec<f64> = argmax_per_run.iter().map(|&s| s as f64).collect();
    let argmax_ci = bootstrap_ci(
        &argmax_f64,
        Statistic::Quantile(0.5),
        sweep.resamples,
        sweep.ci_level,
        seed::derive(master_seed, seed::stream::BOOTSTRAP),
    )?;

    let mut best_mean_size = per_size[0].size;
    let mut best_mean = per_size[0].mean_conversion;
    for s in &per_size {
        if s.mean_conversion > best_mean {
            best_mean = s.mean_conversion;
            best_mean_size = s.size;
        }
    }

    Ok(SweepResult {
        sizes,
        per_size,
        conversion_per_run,
        argmax_per_run,
        argmax_ci,
        best_mean_size,
    })
}
