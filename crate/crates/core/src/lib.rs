//! Population-based evolution of genomes that carry a cascade of additive
//! meta-parameters, with coupled-noise lineage trials and experiment drivers
//! for growth curves and one-step time-series forecasting.

pub mod aggregate;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fitness;
pub mod growth;
pub mod noise;
pub mod oracle;
pub mod stats;

pub use error::{Error, Result};
pub use evolution::{
    init_population, offspring_parents, select_top_k, step_generation, Genome, MutationConfig,
    Population, SelectionConfig,
};
pub use fitness::{FitnessTask, Target};
pub use noise::{NoiseSource, NoiseStream, ZeroNoise};

/// Engine version recorded in every report.
pub const ENGINE_VERSION: &str = concat!("ordevo ", env!("CARGO_PKG_VERSION"));
