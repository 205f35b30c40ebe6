//! Stochastic convex optimization under local label differential privacy.
//!
//! Users hold a public feature and a private label. Each user randomizes the
//! label once, locally, with an `ε`-label-DP randomizer from [`mechanisms`];
//! the analyzer then runs projected SGD ([`sco`]) using the unbiased gradient
//! estimators in [`estimation`]. [`hard_instances`] builds the linear-loss
//! family used to benchmark excess risk in closed form.

pub mod error;
pub mod estimation;
pub mod hard_instances;
pub mod mechanisms;
pub mod numeric;
pub mod rng;
pub mod sco;

pub use error::{Error, Result};
pub use mechanisms::{Label, Mechanism, MechanismParams, SanitizedSubset, SubsetMechanism};
pub use rng::{derive_seed, Purpose, RandomnessStream};
