//! Map-relative localization for a downward-looking aircraft camera.
//!
//! Camera frames are matched against an orthophoto with normalized
//! cross-correlation inside a particle filter whose sample size adapts to the
//! spread of the particle cloud (KLD sampling). Correlation values become
//! particle likelihoods through one of several conversion functions; see
//! [`likelihood::ConversionSpec`].
//!
//! The [`sim`] module builds synthetic worlds and flights so that the whole
//! pipeline can be exercised without external imagery.

pub mod dataset;
pub mod error;
pub mod filter;
pub mod kld_sampler;
pub mod likelihood;
pub mod motion;
pub mod pose;
pub mod raster_map;
pub mod report;
pub mod sim;
pub mod similarity;

pub use dataset::FlightData;
pub use error::{Error, Result};
pub use filter::{
    run_flight, FilterConfig, HeadingMean, ParticleFilter, ParticleSet, PoseEstimate,
};
pub use kld_sampler::KldConfig;
pub use likelihood::{ConversionKind, ConversionSpec};
pub use motion::{NoiseConfig, OdometryDelta};
pub use pose::Pose2D;
pub use raster_map::{CameraModel, Patch, RasterMap};
pub use report::{FrameRecord, RunReport, RunSummary};
pub use sim::{
    AgeProfile, AgeSpec, FlightPlan, FlightShape, OdometryNoise, TerrainKind, WorldSpec,
};
