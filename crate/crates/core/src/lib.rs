//! Multi-view texture synthesis on desk-scale hardware.
//!
//! A mesh with a UV atlas is viewed by a ring of cameras. Views are
//! generated jointly by a rectified-flow sampler whose per-step predictions
//! are synchronized through UV space: each view is reprojected onto the
//! atlas, the partial textures are fused, and the fused texture is rendered
//! back into every view. Afterwards the texture is completed on occluded
//! texels and upscaled.
//!
//! Learned components (velocity network, codec, embedders, feature
//! transform) sit behind traits with deterministic default implementations.

#![allow(clippy::needless_range_loop)]

pub mod atlas;
pub mod camera;
pub mod embed;
pub mod error;
pub mod flow;
pub mod fusion;
pub mod image;
pub mod io;
pub mod math;
pub mod mesh;
pub mod procedural;
pub mod raster;
pub mod reproject;
pub mod texture;
pub mod uvtools;

pub use atlas::{bake_atlas_maps, UvAtlasMaps};
pub use camera::{make_surround_rig, Camera, CameraRig, Projection, RigSpec};
pub use embed::{aggregate, embed_image, embed_text, grayscale_negative, white_negative, ConditionBundle, Embedding, Modality};
pub use error::{Error, Result};
pub use flow::{
    sample, Codec, IdentityCodec, Latent, NoisyOracleVelocity, OracleVelocity, SamplerConfig, Scene, SyncConfig,
    VelocityModel,
};
pub use fusion::{fuse, LossWeights, WeightField, WeighterParams, Weighting};
pub use image::{GridImage, Image};
pub use mesh::{load_obj, normalize_mesh, TriMesh};
pub use raster::{rasterize, render_depth_grid, render_views, RenderOutputs, Sampling};
pub use reproject::{reproject, reproject_grid, PartialTexture, ReprojectOptions};
pub use texture::{Rgb, TextureMap};
pub use uvtools::{complete_texture, dilate_margins, enhance_texture};
