//! Multi-domain virtual network embedding over a layered space/air/ground
//! substrate.
//!
//! The crate models the substrate and virtual requests, extracts node
//! features for a linear-softmax policy trained with REINFORCE, maps links
//! with delay-constrained minimum-hop search, and drives seeded
//! discrete-event experiments comparing the learned embedder against two
//! ranking heuristics.

use rand::Rng;

pub mod baselines;
pub mod embedder;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod substrate;
pub mod vnr;

/// Dense index of a substrate node.
pub type NodeId = usize;
/// Dense index of a substrate link.
pub type LinkId = usize;
/// Global identifier of a virtual network request.
pub type VnrId = u64;
/// Integral compute (Tflops) or bandwidth (Mbps) units.
pub type Units = u64;

pub use embedder::{embed_vnr, validate_embedding, EmbedFailure, Embedding, Violation};
pub use features::{extract_feature_matrix, FeatureExtractor, FeatureMatrix, FeatureVector};
pub use metrics::{MetricsSample, MetricsTimeSeries};
pub use policy::{NodeDistribution, PolicyParams, Selection};
pub use substrate::{Domain, SubstrateConfig, SubstrateNetwork};
pub use vnr::{Vnr, VnrConfig};

/// Closed interval `[min, max]` that attributes are drawn uniformly from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Bounds<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min <= self.max
    }

    pub fn contains(&self, value: T) -> bool {
        self.min <= value && value <= self.max
    }
}

impl Bounds<Units> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Units {
        rng.random_range(self.min..=self.max)
    }
}

impl Bounds<usize> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

impl Bounds<f64> {
    /// One uniform draw mapped affinely onto the interval, so the random
    /// stream consumed does not depend on the bounds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.min + u * (self.max - self.min)
    }
}
