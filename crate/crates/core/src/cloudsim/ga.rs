//! Genetic scheduler that live-migrates VMs towards cheap effective
//! electricity, one hour at a time.
//!
//! Every hour the scheduler optimizes the full placement vector (one gene
//! per VM, value = physical machine) against that hour's effective prices,
//! plus a small penalty per VM moved relative to the previous hour so the
//! schedule does not shuffle VMs for negligible gains. The search is a
//! plain generational GA with tournament selection, uniform crossover and
//! per-gene mutation; two crafted candidates are always injected into the
//! initial population — the previous hour's placement and a greedy packing
//! onto the currently cheapest machines — so the result is never worse than
//! either. The single elite survives only on strict improvement, which
//! keeps the previous placement in place when a move would not pay for
//! itself.

use super::{
    effective_prices, series_per_dc, spread_placement, CloudSpec, Event, EventKind,
    ManagementTrace, PowerModel,
};
use crate::geotemporal::GeotemporalSeries;
use crate::{seed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Search-strategy knobs of [`run_migration_scheduler`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    /// Per-gene mutation probability; `None` uses `1 / number of VMs`.
    pub mutation_rate: Option<f64>,
    /// Cost in USD charged per migrated VM when comparing placements.
    /// Far below typical hourly savings, enough to suppress zero-gain moves.
    pub w_mig: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 50,
            tournament_size: 3,
            mutation_rate: None,
            w_mig: 0.001,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::config("GA population must be at least 2"));
        }
        if self.generations == 0 || self.tournament_size == 0 {
            return Err(Error::config("GA generations and tournament size must be positive"));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::config("mutation rate must lie in [0, 1]"));
            }
        }
        if self.w_mig < 0.0 {
            return Err(Error::config("migration penalty must be nonnegative"));
        }
        Ok(())
    }
}

/// Electricity cost in USD of one hour under `genome`.
fn hour_cost(
    genome: &[usize],
    hour: usize,
    prices: &[Vec<f64>],
    pm_dc: &[usize],
    capacity: usize,
    power: &PowerModel,
    counts: &mut [usize],
) -> f64 {
    counts.fill(0);
    for &pm in genome {
        counts[pm] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(pm, &c)| {
            power.power_w(c as f64 / capacity as f64) / 1000.0 * prices[pm_dc[pm]][hour]
        })
        .sum()
}

fn moves(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Packs all VMs onto the machines whose data center is cheapest this hour,
/// filling each machine before opening the next. With a linear power model
/// and positive idle draw this is the cost-minimal single-hour placement.
fn greedy_packed(
    n_vms: usize,
    n_pms: usize,
    capacity: usize,
    hour: usize,
    prices: &[Vec<f64>],
    pm_dc: &[usize],
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_pms).collect();
    order.sort_by(|&a, &b| {
        prices[pm_dc[a]][hour]
            .partial_cmp(&prices[pm_dc[b]][hour])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut genome = Vec::with_capacity(n_vms);
    'outer: for &pm in &order {
        for _ in 0..capacity {
            if genome.len() == n_vms {
                break 'outer;
            }
            genome.push(pm);
        }
    }
    genome
}

/// Moves VMs off over-full machines onto the lowest-index machines with
/// room. Keeps earlier genes untouched, so it is deterministic.
fn repair(genome: &mut [usize], n_pms: usize, capacity: usize) {
    let mut counts = vec![0usize; n_pms];
    let mut overflow = Vec::new();
    for (vm, &pm) in genome.iter().enumerate() {
        if counts[pm] < capacity {
            counts[pm] += 1;
        } else {
            overflow.push(vm);
        }
    }
    for vm in overflow {
        let pm = (0..n_pms)
            .find(|&p| counts[p] < capacity)
            .expect("spec validation guarantees enough slots");
        counts[pm] += 1;
        genome[vm] = pm;
    }
}

fn tournament<'a>(
    scored: &'a [(f64, Vec<usize>)],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'a [usize] {
    let mut best = rng.random_range(0..scored.len());
    for _ in 1..size {
        let challenger = rng.random_range(0..scored.len());
        if scored[challenger].0 < scored[best].0 {
            best = challenger;
        }
    }
    &scored[best].1
}

/// Runs the hourly genetic scheduler over the whole horizon and returns the
/// resulting trace with one migrate event per actual VM move. Deterministic
/// in `(spec, series, params, seed)`; every hour draws from its own derived
/// RNG stream.
pub fn run_migration_scheduler(
    spec: &CloudSpec,
    series: &[GeotemporalSeries],
    power: &PowerModel,
    params: &GaParams,
    master_seed: u64,
) -> Result<ManagementTrace> {
    spec.validate()?;
    power.validate()?;
    params.validate()?;
    let per_dc = series_per_dc(spec, series)?;
    let prices = effective_prices(spec, &per_dc);
    let pm_dc = spec.pm_dc_index();
    let n_vms = spec.vms.len();
    let n_pms = spec.total_pms();
    let capacity = spec.pm_capacity;
    let mutation_rate = params.mutation_rate.unwrap_or(1.0 / n_vms as f64);

    let mut trace = ManagementTrace::for_spec(spec);
    let mut counts = vec![0usize; n_pms];
    let mut prev: Option<Vec<usize>> = None;

    for hour in 0..spec.horizon_hours {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master_seed, hour as u64));
        let fitness = |g: &[usize], counts: &mut [usize]| -> f64 {
            let mut f = hour_cost(g, hour, &prices, &pm_dc, capacity, power, counts);
            if let Some(p) = &prev {
                f += params.w_mig * moves(p, g) as f64;
            }
            f
        };

        // Initial population: the status quo, the greedy hour-optimum, the
        // unmanaged spread (first hour only), then random placements.
        let mut pop: Vec<Vec<usize>> = Vec::with_capacity(params.population);
        if let Some(p) = &prev {
            pop.push(p.clone());
        } else {
            pop.push(spread_placement(spec));
        }
        pop.push(greedy_packed(n_vms, n_pms, capacity, hour, &prices, &pm_dc));
        while pop.len() < params.population {
            let mut g: Vec<usize> = (0..n_vms).map(|_| rng.random_range(0..n_pms)).collect();
            repair(&mut g, n_pms, capacity);
            pop.push(g);
        }

        let mut scored: Vec<(f64, Vec<usize>)> = pop
            .into_iter()
            .map(|g| {
                let f = fitness(&g, &mut counts);
                (f, g)
            })
            .collect();
        // Earliest minimum wins ties, so the status quo beats equal-cost
        // rearrangements of itself.
        let mut best = scored
            .iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .expect("population is non-empty")
            .clone();

        for _generation in 0..params.generations {
            let mut next: Vec<(f64, Vec<usize>)> = Vec::with_capacity(params.population);
            next.push(best.clone());
            while next.len() < params.population {
                let a = tournament(&scored, params.tournament_size, &mut rng);
                let b = tournament(&scored, params.tournament_size, &mut rng);
                let mut child: Vec<usize> = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
                    .collect();
                for gene in child.iter_mut() {
                    if rng.random::<f64>() < mutation_rate {
                        *gene = rng.random_range(0..n_pms);
                    }
                }
                repair(&mut child, n_pms, capacity);
                let f = fitness(&child, &mut counts);
                if f < best.0 {
                    best = (f, child.clone());
                }
                next.push((f, child));
            }
            scored = next;
        }

        if let Some(p) = &prev {
            for vm in 0..n_vms {
                if p[vm] != best.1[vm] {
                    trace.events.push(Event {
                        hour,
                        vm,
                        kind: EventKind::Migrate {
                            src_pm: p[vm],
                            dst_pm: best.1[vm],
                        },
                    });
                }
            }
        }
        trace.placements[hour] = best.1.iter().map(|&pm| Some(pm)).collect();
        prev = Some(best.1);
    }
    Ok(trace)
}
