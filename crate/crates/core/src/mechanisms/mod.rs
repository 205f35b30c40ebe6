//! Local label randomizers and their exact likelihoods.
//!
//! Three discrete randomizers map a private label `y ∈ [K]` to a subset of
//! `[K]`: the independent Bernoulli subset randomizer, the fixed-size
//! d-subset selection randomizer, and K-ary randomized response (a singleton
//! subset). The vector randomizer in [`djw`] privatizes a gradient directly.
//! [`verify`] checks the `e^ε` likelihood-ratio bound by enumeration.

mod bernoulli;
mod dsubset;
pub mod djw;
mod krr;
mod types;
pub mod verify;

pub use bernoulli::{
    bernoulli_inclusion_probability, bernoulli_subset_likelihood, bernoulli_subset_randomize,
};
pub use djw::{djw_second_moment_bound, djw_variance_constant, djw_vector_randomize};
pub use dsubset::{
    d_subset_inclusion_probabilities, d_subset_likelihood, d_subset_randomize,
    recommended_subset_size,
};
pub use krr::{krr_likelihood, krr_randomize};
pub use types::{Label, Mechanism, MechanismParams, SanitizedSubset, SubsetMechanism, MIN_EPSILON};
pub use verify::{output_space, output_space_size, verify_ldp_ratio};

use crate::error::Result;

/// Dispatches to the likelihood of `s` under input `y` for `s`'s mechanism.
pub fn likelihood(s: &SanitizedSubset, y: Label, params: &MechanismParams) -> Result<f64> {
    match s.mechanism() {
        SubsetMechanism::BernoulliSubset => bernoulli_subset_likelihood(s, y, params),
        SubsetMechanism::DSubset => d_subset_likelihood(s, y, params),
        SubsetMechanism::Krr => krr_likelihood(s, y, params),
    }
}

/// Dispatches to the randomizer for `mechanism`.
pub fn randomize<R: rand::Rng + ?Sized>(
    mechanism: SubsetMechanism,
    y: Label,
    params: &MechanismParams,
    rng: &mut R,
) -> Result<SanitizedSubset> {
    match mechanism {
        SubsetMechanism::BernoulliSubset => bernoulli_subset_randomize(y, params, rng),
        SubsetMechanism::DSubset => d_subset_randomize(y, params, rng),
        SubsetMechanism::Krr => krr_randomize(y, params, rng),
    }
}
