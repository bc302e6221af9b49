//! Random decision trees with random action sets.
//!
//! A stage-`t` primitive distribution `p_t` draws the finite action set
//! offered at every node of generation `t`; a decision tree is sampled by
//! drawing all these sets independently. On top of that the crate provides
//! tail goals, foresight-limited strategies, the finite-foresight decision
//! process, branching-process tools and Monte-Carlo estimators.

pub mod branching;
pub mod distmodel;
pub mod error;
pub mod estimators;
pub mod goals;
pub mod mdpcore;
pub mod seed;
pub mod stats;
pub mod strategies;
pub mod treespace;

pub use distmodel::{ActionSet, CardinalityLaw, DiscreteLaw, DistributionFamily, FamilySpec, PrimitiveDistribution};
pub use error::{Error, Result};
pub use seed::Seed;
