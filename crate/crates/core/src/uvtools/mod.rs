//! UV-space post-processing: occlusion fill, upscaling and margins.

pub mod complete;
pub mod dilate;
pub mod enhance;

pub use complete::{complete_texture, complete_texture_with, CompletionOptions};
pub use dilate::dilate_margins;
pub use enhance::{enhance_texture, enhance_texture_with, EnhanceOptions};
