//! Rectified-flow sampling over the multi-view grid with view synchronization.

pub mod latent;
pub mod model;
pub mod sampler;
pub mod sync;

pub use latent::{cfg_velocity, predict_x0, sync_velocity, Codec, IdentityCodec, Latent};
pub use model::{Branch, EmbeddingFieldVelocity, ModelInput, NoisyOracleVelocity, OracleVelocity, VelocityModel};
pub use sampler::{sample, sample_with_observer, SampleOutput, SamplerConfig, StepRecord};
pub use sync::{sync_x0, Scene, SyncConfig, SyncOutput};
