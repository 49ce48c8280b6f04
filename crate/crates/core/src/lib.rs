//! Simulation library for deriving progressive SLA catalogs for virtual
//! machines under energy-aware cloud management.
//!
//! The crate is organised around a pipeline:
//!
//! 1. [`geotemporal`] synthesises (or loads) hourly electricity price and
//!    temperature series per data-center location.
//! 2. [`cloudsim`] replays energy-aware management policies (a genetic
//!    live-migration scheduler and a peak pauser) over those series and
//!    accounts the resulting energy costs per treatment category.
//! 3. [`tracestats`] turns management traces into worst-case migration-rate
//!    statistics with bootstrap confidence intervals.
//! 4. [`downtime`] models pre-copy live-migration downtime.
//! 5. [`slamodel`] combines downtime, migration rates and energy savings into
//!    a catalog of SLA offers with availabilities and prices.
//! 6. [`users`] derives availability requirements from web and HPC workloads
//!    and samples synthetic user populations.
//! 7. [`selection`] simulates utility-driven SLA selection and sweeps catalog
//!    sizes to locate the conversion-optimal catalog.
//!
//! Every stochastic step takes an explicit seed; see [`seed`] for how one
//! master seed fans out to per-stage streams.

pub mod cloudsim;
pub mod downtime;
pub mod error;
pub mod geotemporal;
pub mod seed;
pub mod selection;
pub mod slamodel;
pub mod tracestats;
pub mod users;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
