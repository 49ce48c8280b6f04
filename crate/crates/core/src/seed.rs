//! Deterministic fan-out from one master seed to per-stage RNG streams.
//!
//! Every stochastic stage receives its own 64-bit seed derived from the
//! master seed and a fixed stream number via one round of SplitMix64.
//! The derivation is counter based, so inserting a new stage never shifts
//! the seeds of existing ones, and rerunning any stage in isolation with
//! the same master seed reproduces its output byte for byte.

/// Well-known stream numbers used by the pipeline. Extend at the end only.
pub mod stream {
    pub const GEOTEMPORAL: u64 = 1;
    pub const MIGRATION_SCHEDULER: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const WORKLOADS: u64 = 4;
    pub const POPULATION: u64 = 5;
    pub const SELECTION: u64 = 6;
    /// Sweep runs use `SWEEP_BASE + run` for per-run population seeds.
    pub const SWEEP_BASE: u64 = 10_000;
}

/// Derives the seed for `stream` from `master`.
///
/// One SplitMix64 round over `master + GOLDEN * stream`; statistically
/// independent streams for practical purposes while staying reproducible
/// across platforms and thread counts.
#[must_use]
pub fn derive(master: u64, stream: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(stream)))
}

/// Derives a seed from a master seed and two indices (for example run and
/// user number). Equivalent to chaining [`derive`] twice.
#[must_use]
pub fn derive2(master: u64, a: u64, b: u64) -> u64 {
    derive(derive(master, a), b)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_deterministic() {
        assert_eq!(derive(42, 1), derive(42, 1));
        assert_eq!(derive2(42, 3, 7), derive2(42, 3, 7));
    }

    #[test]
    fn streams_do_not_collide_for_small_masters() {
        let mut seen = std::collections::HashSet::new();
        for master in 0..64u64 {
            for stream in 0..64u64 {
                assert!(seen.insert(derive(master, stream)));
            }
        }
    }
}
