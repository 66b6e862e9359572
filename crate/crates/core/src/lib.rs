//! Local wave model of a type-II down-conversion Bell experiment.
//!
//! Two beams, each an H and a V wave, leave the source; in every emission one
//! component per beam carries a photon (intensity 1) and the orthogonal one is
//! photon-empty (intensity ½). The two interfere at the analyzers through a
//! random relative phase. Counting only terms in which every detector sees a
//! photon gives the singles rate ½ and the correlation `−cos 2(θ₁ − θ₂)`.
//!
//! * [`source`]: source constraints, wave components, emission sampling
//! * [`optics`]: analyzer projection and port intensities
//! * [`algebra`]: term expansion and the coincidence rule
//! * [`estimators`]: closed-form expectations
//! * [`montecarlo`]: signed-weight and outcome-sampling simulation
//! * [`inequality`]: CHSH on shared and independent datasets

pub mod algebra;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod inequality;
pub mod montecarlo;
pub mod optics;
pub mod output;
pub mod rng;
pub mod source;

pub use error::{ModelError, Result};
pub use estimators::{bell_correlation, CorrelationEstimate, PortPair};
pub use montecarlo::{run_experiment, CountsRecord, Estimator, RunConfig};
pub use optics::{AnalyzerSetting, IntensityQuad, Port};
pub use source::{Branch, EmissionEvent, Side, SourceConstraints};
