//! Cache placement under unknown Zipf popularity: catalogs and demand,
//! single-period knapsack oracles, bandit policies, a replication engine and
//! an experiment front end.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the experiment front end uses.

pub mod catalog;
pub mod engine;
pub mod error;
pub mod policies;
pub mod scalar;
pub mod spo;
pub mod xcli;

pub use error::{Error, Result};

pub type Profile = catalog::PopularityProfile<f64>;
pub type Instance = spo::SpoInstance<f64>;
pub type Solution = spo::SpoSolution<f64>;
pub type Policy = policies::Policy<f64>;
pub type PolicyKind = policies::PolicyKind<f64>;
pub type Scenario = engine::Scenario<f64>;
pub type ReplicationConfig = engine::ReplicationConfig<f64>;
