//! Runtime safety assurance for ML perception: distribution-shift detection
//! on classifier inputs fused with contextual evidence in a discrete
//! Bayesian network.

pub mod bayesnet;
pub mod platoon;
pub mod runtime;
pub mod stats;
