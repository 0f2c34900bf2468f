//! Doubly robust off-policy evaluation and policy learning for continuous
//! actions whose value is linear in a known feature map,
//! `V(a, z) = ⟨θ₀(z), φ(a, z)⟩`.

pub mod bench;
pub mod data;
pub mod error;
pub mod estimators;
pub mod features;
pub mod nuisance;
pub mod policy;
pub mod policy_opt;
pub mod rng;

pub use data::LoggedDataset;
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMap};
pub use policy::{Bounds, Policy, PolicyFamily, PolicyKind, PolicySpace};
