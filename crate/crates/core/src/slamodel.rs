//! Progressive SLA catalog: availability and price per management policy.
//!
//! The catalog starts from a fully provisioned base VM whose hourly price
//! splits into an energy component and an availability component
//! (`price = energy + availability * coeff`). Energy-aware policies earn a
//! savings share on the energy component and pay for it with availability;
//! each tier's price is
//! `energy * (1 - savings) + availability * coeff`,
//! so a tier is cheap both because it saves energy and because it promises
//! less uptime. Savings figures can come from simulation, from a fitted
//! model, or from a coarse heuristic; every tier records which.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Fraction of the day a VM is up given its expected daily downtime.
#[must_use]
pub fn availability_from_downtime(downtime_s_per_day: f64) -> f64 {
    (1.0 - downtime_s_per_day / SECONDS_PER_DAY).clamp(0.0, 1.0)
}

/// Relative energy-cost savings of a treatment category against the base
/// category, both in USD per VM-hour. Negative when the category is more
/// expensive to run than the base.
pub fn energy_savings(tc_cost: f64, base_cost: f64) -> Result<f64> {
    if !(base_cost > 0.0) {
        return Err(Error::data(format!(
            "base energy cost must be positive, got {base_cost}"
        )));
    }
    Ok(1.0 - tc_cost / base_cost)
}

/// The reference VM every discount is measured against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseVm {
    pub name: String,
    pub price_usd_per_hour: f64,
    pub availability: f64,
    /// USD per hour paid per unit of promised availability.
    pub availability_price_coeff: f64,
}

impl Default for BaseVm {
    fn default() -> Self {
        Self {
            name: "base.xlarge".into(),
            price_usd_per_hour: 0.28,
            availability: 0.9995,
            availability_price_coeff: 0.1,
        }
    }
}

impl BaseVm {
    /// Energy component of the base price; what the savings share applies to.
    #[must_use]
    pub fn energy_component(&self) -> f64 {
        self.price_usd_per_hour - self.availability * self.availability_price_coeff
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.price_usd_per_hour > 0.0) {
            return Err(Error::config("base price must be positive"));
        }
        if !(0.0 < self.availability && self.availability <= 1.0) {
            return Err(Error::config("base availability must lie in (0, 1]"));
        }
        if self.availability_price_coeff < 0.0 {
            return Err(Error::config("availability price coefficient must be nonnegative"));
        }
        if !(self.energy_component() > 0.0) {
            return Err(Error::config(
                "availability component exceeds the base price; energy component must stay positive",
            ));
        }
        Ok(())
    }
}

/// Hourly price of a tier offering `availability` and saving `en_savings`
/// of the base energy component.
#[must_use]
pub fn vm_price(base: &BaseVm, en_savings: f64, availability: f64) -> f64 {
    base.energy_component() * (1.0 - en_savings) + availability * base.availability_price_coeff
}

/// Where a tier's savings figure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SavingsSource {
    /// Zero by definition (the base tier).
    Baseline,
    /// Measured on a simulated management trace.
    Simulated,
    /// Crude fallback used when no measurement is available.
    Heuristic,
    /// Library default constants.
    Default,
}

impl std::fmt::Display for SavingsSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SavingsSource::Baseline => "baseline",
            SavingsSource::Simulated => "simulated",
            SavingsSource::Heuristic => "heuristic",
            SavingsSource::Default => "default",
        })
    }
}

/// Management policy behind a tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyKind {
    /// No energy-aware management; VMs stay where they are.
    Static,
    /// Live migration towards cheap electricity.
    Migration,
    /// Paused during the most expensive hours of the day.
    Pauser { downtime_fraction: f64 },
}

/// Availability and energy savings of the live-migration policy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MigrationStats {
    pub availability: f64,
    pub en_savings: f64,
    pub source: SavingsSource,
}

impl Default for MigrationStats {
    fn default() -> Self {
        // Four moves per day, each bounded by the contractual worst-case
        // downtime of 400 s.
        Self {
            availability: availability_from_downtime(4.0 * 400.0),
            en_savings: 0.5,
            source: SavingsSource::Default,
        }
    }
}

impl MigrationStats {
    /// Stats measured on a simulated trace.
    #[must_use]
    pub fn from_measurements(
        migrations_per_day: f64,
        downtime_per_migration_s: f64,
        en_savings: f64,
    ) -> Self {
        Self {
            availability: availability_from_downtime(migrations_per_day * downtime_per_migration_s),
            en_savings,
            source: SavingsSource::Simulated,
        }
    }
}

/// Energy savings of the pausing policy as a function of its downtime
/// fraction.
///
/// With a daily price profile of relative amplitude `A` around its mean,
/// skipping the most expensive fraction `f` of the day removes the cost
/// share `f + (A/pi) * sin(pi * f)`: the linear part is the mean cost of
/// the skipped hours, the sine part the premium of hitting the peak. The
/// amplitude is fitted from simulated runs; savings exceed the skipped
/// time share whenever `A > 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PauserSavingsModel {
    pub amplitude: f64,
    pub source: SavingsSource,
}

impl Default for PauserSavingsModel {
    fn default() -> Self {
        Self {
            amplitude: 0.33,
            source: SavingsSource::Default,
        }
    }
}

impl PauserSavingsModel {
    #[must_use]
    pub fn savings(&self, downtime_fraction: f64) -> f64 {
        let f = downtime_fraction.clamp(0.0, 1.0);
        f + self.amplitude / std::f64::consts::PI * (std::f64::consts::PI * f).sin()
    }

    /// Least-squares fit of the amplitude to measured `(fraction, savings)`
    /// points; linear in the single parameter, so the fit is exact when the
    /// points come from the model itself.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        let mut num = 0.0;
        let mut den = 0.0;
        for &(f, s) in points {
            let basis = (std::f64::consts::PI * f).sin();
            num += (s - f) * basis;
            den += basis * basis;
        }
        // sin(pi * f) at f = 0 or 1 is not exactly zero in floats, so compare
        // against a small floor rather than zero.
        if den <= 1e-12 {
            return Err(Error::data(
                "fitting the savings amplitude needs at least one fraction strictly inside (0, 1)",
            ));
        }
        Ok(Self {
            amplitude: std::f64::consts::PI * num / den,
            source: SavingsSource::Simulated,
        })
    }
}

/// One catalog entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlaTier {
    pub id: String,
    pub policy: PolicyKind,
    pub availability: f64,
    pub en_savings: f64,
    pub en_savings_source: SavingsSource,
    pub price_usd_per_hour: f64,
}

/// A progressive SLA catalog: tiers ordered from the base offer downwards
/// by availability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    pub base: BaseVm,
    pub tiers: Vec<SlaTier>,
}

impl Catalog {
    #[must_use]
    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.tiers.is_empty() {
            return Err(Error::config("catalog needs at least one tier"));
        }
        let mut seen = std::collections::HashSet::new();
        for tier in &self.tiers {
            if !seen.insert(tier.id.as_str()) {
                return Err(Error::config(format!("duplicate tier id {}", tier.id)));
            }
            if !(0.0..=1.0).contains(&tier.availability) {
                return Err(Error::config(format!(
                    "tier {}: availability {} outside [0, 1]",
                    tier.id, tier.availability
                )));
            }
            if !(0.0..=1.0).contains(&tier.en_savings) {
                return Err(Error::config(format!(
                    "tier {}: savings {} outside [0, 1]",
                    tier.id, tier.en_savings
                )));
            }
            if !(tier.price_usd_per_hour > 0.0) {
                return Err(Error::config(format!("tier {}: price must be positive", tier.id)));
            }
        }
        // Ties are legal: a light pauser can promise exactly what the
        // migration tier does, and one of the two then dominates on price.
        for pair in self.tiers.windows(2) {
            if pair[1].availability > pair[0].availability {
                return Err(Error::config(format!(
                    "availability must not increase: {} ({}) then {} ({})",
                    pair[0].id, pair[0].availability, pair[1].id, pair[1].availability
                )));
            }
        }
        Ok(())
    }
}

/// The downtime fractions of the six pausing tiers in the classic
/// eight-tier catalog: evenly spaced from an eighth of the day to two
/// thirds of it.
#[must_use]
pub fn catalog8_fractions() -> [f64; 6] {
    let lo = 0.125;
    let hi = 2.0 / 3.0;
    let mut f = [0.0; 6];
    for (k, slot) in f.iter_mut().enumerate() {
        *slot = lo + (hi - lo) * k as f64 / 5.0;
    }
    f
}

fn pauser_tier(base: &BaseVm, id: String, fraction: f64, savings: f64, source: SavingsSource) -> SlaTier {
    let availability = 1.0 - fraction;
    SlaTier {
        id,
        policy: PolicyKind::Pauser {
            downtime_fraction: fraction,
        },
        availability,
        en_savings: savings,
        en_savings_source: source,
        price_usd_per_hour: vm_price(base, savings, availability),
    }
}

fn base_and_migration_tiers(base: &BaseVm, migration: &MigrationStats) -> Vec<SlaTier> {
    vec![
        SlaTier {
            id: "sla1".into(),
            policy: PolicyKind::Static,
            availability: base.availability,
            en_savings: 0.0,
            en_savings_source: SavingsSource::Baseline,
            price_usd_per_hour: vm_price(base, 0.0, base.availability),
        },
        SlaTier {
            id: "sla2".into(),
            policy: PolicyKind::Migration,
            availability: migration.availability,
            en_savings: migration.en_savings,
            en_savings_source: migration.source,
            price_usd_per_hour: vm_price(base, migration.en_savings, migration.availability),
        },
    ]
}

/// Builds the classic eight-tier catalog. `pauser_savings` holds one
/// measured savings share per pausing tier (aligned with
/// [`catalog8_fractions`]); missing measurements fall back to the crude
/// `savings = fraction / 2` heuristic.
pub fn build_catalog_8(
    base: &BaseVm,
    migration: &MigrationStats,
    pauser_savings: &[Option<f64>],
) -> Result<Catalog> {
    if pauser_savings.len() != 6 {
        return Err(Error::config(format!(
            "expected 6 pauser savings slots, got {}",
            pauser_savings.len()
        )));
    }
    let mut tiers = base_and_migration_tiers(base, migration);
    for (k, (fraction, measured)) in catalog8_fractions()
        .into_iter()
        .zip(pauser_savings.iter())
        .enumerate()
    {
        let (savings, source) = match measured {
            Some(s) => (*s, SavingsSource::Simulated),
            None => (fraction / 2.0, SavingsSource::Heuristic),
        };
        tiers.push(pauser_tier(base, format!("sla{}", k + 3), fraction, savings, source));
    }
    let catalog = Catalog {
        base: base.clone(),
        tiers,
    };
    catalog.validate()?;
    Ok(catalog)
}

/// Builds a catalog with `n` tiers: the base tier, the migration tier
/// (for `n >= 2`) and `n - 2` pausing tiers whose downtime fractions are
/// evenly spaced at `k / (n - 1)`. Savings of the pausing tiers come from
/// the fitted model.
///
/// Tiers are ordered by decreasing availability. With many tiers the
/// lightest pauser can promise more uptime than the migration tier, so the
/// final order is not always base, migration, pausers.
pub fn build_catalog_n(
    base: &BaseVm,
    migration: &MigrationStats,
    pauser_model: &PauserSavingsModel,
    n: usize,
) -> Result<Catalog> {
    if n == 0 {
        return Err(Error::config("catalog size must be at least 1"));
    }
    let mut tiers = base_and_migration_tiers(base, migration);
    tiers.truncate(n);
    let m = n.saturating_sub(2);
    for k in 1..=m {
        let fraction = k as f64 / (m + 1) as f64;
        tiers.push(pauser_tier(
            base,
            format!("sla{}", k + 2),
            fraction,
            pauser_model.savings(fraction),
            pauser_model.source,
        ));
    }
    tiers.sort_by(|a, b| b.availability.total_cmp(&a.availability));
    let catalog = Catalog {
        base: base.clone(),
        tiers,
    };
    catalog.validate()?;
    Ok(catalog)
}

pub fn write_catalog_json<P: AsRef<Path>>(catalog: &Catalog, path: P) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(catalog)
        .map_err(|e| Error::Internal(format!("catalog serialization: {e}")))?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "{body}").map_err(|e| Error::io(path, e))
}

pub fn read_catalog_json<P: AsRef<Path>>(path: P) -> Result<Catalog> {
    let path = path.as_ref();
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let catalog: Catalog = serde_json::from_str(&body)
        .map_err(|e| Error::malformed(path, e.line() as u64, e.to_string()))?;
    catalog.validate()?;
    Ok(catalog)
}

/// Writes `sla_id,policy,downtime_fraction,availability,en_savings,en_savings_source,price_usd_per_hour`.
pub fn write_catalog_csv<P: AsRef<Path>>(catalog: &Catalog, path: P) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(
        "sla_id,policy,downtime_fraction,availability,en_savings,en_savings_source,price_usd_per_hour\n",
    );
    for tier in &catalog.tiers {
        let (policy, fraction) = match tier.policy {
            PolicyKind::Static => ("static", String::new()),
            PolicyKind::Migration => ("migration", String::new()),
            PolicyKind::Pauser { downtime_fraction } => ("pauser", format!("{downtime_fraction:.6}")),
        };
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{:.6}\n",
            tier.id,
            policy,
            fraction,
            tier.availability,
            tier.en_savings,
            tier.en_savings_source,
            tier.price_usd_per_hour
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn four_bounded_migrations_a_day_cost_under_two_percent_uptime() {
        let av = availability_from_downtime(4.0 * 400.0);
        assert_relative_eq!(av, 0.9814814814814815, max_relative = 1e-12);
        assert_relative_eq!(MigrationStats::default().availability, av, max_relative = 1e-15);
    }

    #[test]
    fn six_hours_of_downtime_is_three_quarters_available() {
        assert_relative_eq!(availability_from_downtime(21_600.0), 0.75, max_relative = 1e-15);
        assert_eq!(availability_from_downtime(2.0 * SECONDS_PER_DAY), 0.0);
        assert_eq!(availability_from_downtime(0.0), 1.0);
    }

    #[test]
    fn savings_compare_costs_per_vm_hour() {
        assert_relative_eq!(energy_savings(0.05, 0.09).unwrap(), 4.0 / 9.0, max_relative = 1e-12);
        assert_eq!(energy_savings(0.09, 0.09).unwrap(), 0.0);
        assert!(energy_savings(0.10, 0.09).unwrap() < 0.0);
        assert!(energy_savings(0.05, 0.0).is_err());
    }

    #[test]
    fn zero_savings_at_base_availability_recovers_the_base_price() {
        let base = BaseVm::default();
        assert_relative_eq!(base.energy_component(), 0.18005, max_relative = 1e-12);
        assert_relative_eq!(vm_price(&base, 0.0, 0.9995), 0.28, max_relative = 1e-12);
    }

    #[test]
    fn a_worked_price_example() {
        let base = BaseVm::default();
        // Half the energy bill saved at 87.5% availability:
        // 0.18005 * 0.5 + 0.875 * 0.1 = 0.177525.
        assert_relative_eq!(vm_price(&base, 0.5, 0.875), 0.177525, max_relative = 1e-12);
    }

    #[test]
    fn the_classic_catalog_has_the_expected_availability_ladder() {
        let catalog = build_catalog_8(
            &BaseVm::default(),
            &MigrationStats::default(),
            &[None; 6],
        )
        .unwrap();
        let expected = [
            0.9995,
            0.9814814814814815,
            0.875,
            0.7666666666666666,
            0.6583333333333333,
            0.55,
            0.44166666666666665,
            0.333_333_333_333_333_3,
        ];
        assert_eq!(catalog.len(), 8);
        for (tier, want) in catalog.tiers.iter().zip(expected) {
            assert_relative_eq!(tier.availability, want, max_relative = 1e-9);
        }
        assert_eq!(
            catalog.tiers.iter().map(|t| t.id.as_str()).collect::<Vec<_>>(),
            ["sla1", "sla2", "sla3", "sla4", "sla5", "sla6", "sla7", "sla8"]
        );
        // Without measurements the pausing tiers carry the labeled fallback.
        assert_eq!(catalog.tiers[2].en_savings_source, SavingsSource::Heuristic);
        assert_relative_eq!(catalog.tiers[2].en_savings, 0.0625, max_relative = 1e-12);
        assert_eq!(catalog.tiers[0].en_savings_source, SavingsSource::Baseline);
        assert_relative_eq!(catalog.tiers[0].price_usd_per_hour, 0.28, max_relative = 1e-12);
        assert_relative_eq!(
            catalog.tiers[1].price_usd_per_hour,
            0.18005 * 0.5 + 0.09814814814814815,
            max_relative = 1e-12
        );
    }

    #[test]
    fn measured_savings_take_precedence_over_the_fallback() {
        let savings = [Some(0.2), None, Some(0.5), None, None, Some(0.9)];
        let catalog =
            build_catalog_8(&BaseVm::default(), &MigrationStats::default(), &savings).unwrap();
        assert_eq!(catalog.tiers[2].en_savings_source, SavingsSource::Simulated);
        assert_relative_eq!(catalog.tiers[2].en_savings, 0.2, max_relative = 1e-15);
        assert_eq!(catalog.tiers[3].en_savings_source, SavingsSource::Heuristic);
        assert_eq!(catalog.tiers[7].en_savings_source, SavingsSource::Simulated);
    }

    #[test]
    fn sized_catalogs_spread_downtime_evenly() {
        let base = BaseVm::default();
        let migration = MigrationStats::default();
        let model = PauserSavingsModel::default();

        let three = build_catalog_n(&base, &migration, &model, 3).unwrap();
        assert_eq!(three.len(), 3);
        assert_relative_eq!(three.tiers[2].availability, 0.5, max_relative = 1e-12);

        let eight = build_catalog_n(&base, &migration, &model, 8).unwrap();
        for k in 1..=6usize {
            let tier = &eight.tiers[k + 1];
            assert_relative_eq!(
                tier.availability,
                1.0 - k as f64 / 7.0,
                max_relative = 1e-12
            );
            match tier.policy {
                PolicyKind::Pauser { downtime_fraction } => {
                    assert_relative_eq!(downtime_fraction, k as f64 / 7.0, max_relative = 1e-12);
                }
                _ => panic!("tier {} should pause", tier.id),
            }
        }

        assert_eq!(build_catalog_n(&base, &migration, &model, 1).unwrap().len(), 1);
        assert_eq!(build_catalog_n(&base, &migration, &model, 2).unwrap().len(), 2);
        assert!(build_catalog_n(&base, &migration, &model, 0).is_err());
    }

    #[test]
    fn light_pausers_outrank_the_migration_tier_in_large_catalogs() {
        let base = BaseVm::default();
        let migration = MigrationStats::default();
        let model = PauserSavingsModel::default();

        // Pausing 1/59 of the day concedes less downtime than four daily
        // migrations, so sla3 slots in between the base and migration tiers.
        let sixty = build_catalog_n(&base, &migration, &model, 60).unwrap();
        assert_eq!(sixty.len(), 60);
        assert_eq!(sixty.tiers[0].id, "sla1");
        assert_eq!(sixty.tiers[1].id, "sla3");
        assert_eq!(sixty.tiers[2].id, "sla2");
        assert!(sixty.tiers.windows(2).all(|p| p[1].availability <= p[0].availability));

        // At 55 tiers the first pauser fraction is exactly the migration
        // downtime share (1/54); the tie keeps the migration tier first.
        let fifty_five = build_catalog_n(&base, &migration, &model, 55).unwrap();
        let sla2 = fifty_five.tiers.iter().position(|t| t.id == "sla2").unwrap();
        let sla3 = fifty_five.tiers.iter().position(|t| t.id == "sla3").unwrap();
        assert_eq!(
            fifty_five.tiers[sla2].availability,
            fifty_five.tiers[sla3].availability
        );
        assert_eq!((sla2, sla3), (1, 2));
    }

    #[test]
    fn fitting_recovers_the_generating_amplitude() {
        let truth = PauserSavingsModel {
            amplitude: 0.4,
            source: SavingsSource::Default,
        };
        let points: Vec<(f64, f64)> = catalog8_fractions()
            .into_iter()
            .map(|f| (f, truth.savings(f)))
            .collect();
        let fitted = PauserSavingsModel::fit(&points).unwrap();
        assert_relative_eq!(fitted.amplitude, 0.4, max_relative = 1e-12);
        assert_eq!(fitted.source, SavingsSource::Simulated);
        assert!(PauserSavingsModel::fit(&[]).is_err());
        assert!(PauserSavingsModel::fit(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn savings_model_is_anchored_and_monotone() {
        let model = PauserSavingsModel {
            amplitude: 0.9,
            source: SavingsSource::Default,
        };
        assert_relative_eq!(model.savings(0.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(model.savings(1.0), 1.0, max_relative = 1e-12);
        let mut prev = 0.0;
        for i in 1..=100 {
            let s = model.savings(i as f64 / 100.0);
            assert!(s > prev, "savings dipped at {}", i as f64 / 100.0);
            prev = s;
        }
        // Always at least the skipped time share.
        assert!(model.savings(0.3) > 0.3);
    }

    #[test]
    fn json_round_trip_preserves_the_catalog() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        let catalog = build_catalog_n(
            &BaseVm::default(),
            &MigrationStats::default(),
            &PauserSavingsModel::default(),
            5,
        )
        .unwrap();
        write_catalog_json(&catalog, &path).unwrap();
        let loaded = read_catalog_json(&path).unwrap();
        assert_eq!(loaded.len(), catalog.len());
        for (a, b) in loaded.tiers.iter().zip(catalog.tiers.iter()) {
            assert_eq!(a.id, b.id);
            assert_relative_eq!(a.price_usd_per_hour, b.price_usd_per_hour, max_relative = 1e-15);
            assert_relative_eq!(a.availability, b.availability, max_relative = 1e-15);
        }
    }

    #[test]
    fn catalogs_with_broken_ladders_fail_validation() {
        let mut catalog = build_catalog_8(
            &BaseVm::default(),
            &MigrationStats::default(),
            &[None; 6],
        )
        .unwrap();
        catalog.tiers[3].availability = 0.99; // out of order
        assert!(catalog.validate().is_err());

        let mut catalog2 = build_catalog_n(
            &BaseVm::default(),
            &MigrationStats::default(),
            &PauserSavingsModel::default(),
            4,
        )
        .unwrap();
        catalog2.tiers[1].en_savings = 1.5;
        assert!(catalog2.validate().is_err());
    }
}
