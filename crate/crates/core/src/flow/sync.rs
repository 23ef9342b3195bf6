//! One synchronization pass: lift every predicted view into UV space, fuse,
//! and re-render the fused texture into all views.

use serde::{Deserialize, Serialize};

use crate::atlas::{bake_atlas_maps, UvAtlasMaps};
use crate::camera::CameraRig;
use crate::error::{Error, Result};
use crate::flow::latent::{Codec, Latent};
use crate::fusion::{fuse, Weighting};
use crate::image::{GridImage, Image};
use crate::mesh::TriMesh;
use crate::raster::RigGeometry;
use crate::reproject::{PartialTexture, ReprojectOptions, RigProjector};
use crate::texture::TextureMap;

/// Mesh, rig, atlas and every derived per-view structure the sampler reuses.
#[derive(Debug, Clone)]
pub struct Scene {
    mesh: TriMesh,
    rig: CameraRig,
    atlas: UvAtlasMaps,
    projector: RigProjector,
    depth: GridImage,
}

impl Scene {
    pub fn new(mesh: TriMesh, rig: CameraRig, atlas_resolution: usize, options: &ReprojectOptions) -> Result<Self> {
        let atlas = bake_atlas_maps(&mesh, atlas_resolution)?;
        Self::with_atlas(mesh, rig, atlas, options)
    }

    pub fn with_atlas(mesh: TriMesh, rig: CameraRig, atlas: UvAtlasMaps, options: &ReprojectOptions) -> Result<Self> {
        let projector = RigProjector::new(&mesh, &rig, &atlas, options)?;
        let depth = projector.geometry().depth_grid()?;
        Ok(Self {
            mesh,
            rig,
            atlas,
            projector,
            depth,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    pub fn atlas(&self) -> &UvAtlasMaps {
        &self.atlas
    }

    pub fn projector(&self) -> &RigProjector {
        &self.projector
    }

    pub fn geometry(&self) -> &RigGeometry {
        self.projector.geometry()
    }

    /// Inverse-depth conditioning grid.
    pub fn depth(&self) -> &GridImage {
        &self.depth
    }

    pub fn layout(&self) -> (usize, usize) {
        self.geometry().layout()
    }

    pub fn render_grid(&self, texture: &TextureMap) -> Result<GridImage> {
        self.geometry().render_grid(texture)
    }

    /// Zero grid with the rig's layout and tile size.
    pub fn blank_grid(&self) -> GridImage {
        let (w, h) = self.rig.resolution();
        let (rows, cols) = self.layout();
        GridImage::new(rows, cols, vec![Image::new(w, h, 3); rows * cols]).expect("consistent layout")
    }

    /// Reproject, weigh and fuse a grid of views.
    pub fn fuse_grid(&self, grid: &GridImage, weighting: &Weighting, t: f64) -> Result<(TextureMap, Vec<PartialTexture>)> {
        let partials = self.projector.reproject(grid)?;
        let weights = weighting.compute(&partials, &self.atlas, t)?;
        Ok((fuse(&partials, &weights)?, partials))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundPolicy {
    /// Pixels the fused texture cannot color keep the decoded prediction.
    #[default]
    PreserveDecoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    pub enabled: bool,
    pub weighting: Weighting,
    /// Synchronize every `interval` steps.
    pub interval: usize,
    /// Inclusive timestep window in which synchronization applies.
    pub t_range: [f64; 2],
    pub background: BackgroundPolicy,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            weighting: Weighting::default(),
            interval: 1,
            t_range: [0.0, 1.0],
            background: BackgroundPolicy::PreserveDecoded,
        }
    }
}

impl SyncConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.t_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid(format!("sync window [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")));
        }
        if self.interval == 0 {
            return Err(Error::invalid("sync interval must be at least 1"));
        }
        Ok(())
    }

    pub fn active_at(&self, step: usize, t: f64) -> bool {
        self.enabled && step.is_multiple_of(self.interval) && self.t_range[0] <= t && t <= self.t_range[1]
    }
}

#[derive(Debug, Clone)]
pub struct SyncOutput {
    pub x0: Latent,
    pub fused: TextureMap,
    pub partials: Vec<PartialTexture>,
    /// Per view, pixels replaced by the fused render.
    pub foreground: Vec<Vec<bool>>,
}

/// Decode, split, reproject, fuse, re-render, keep the decoded value where
/// the render is undefined, encode.
pub fn sync_x0(x0: &Latent, scene: &Scene, codec: &dyn Codec, weighting: &Weighting, t: f64) -> Result<SyncOutput> {
    let decoded = codec.decode(x0)?;
    if (decoded.rows(), decoded.cols()) != scene.layout() {
        return Err(Error::shape(format!(
            "decoded grid is {}x{} but the rig uses {:?}",
            decoded.rows(),
            decoded.cols(),
            scene.layout()
        )));
    }
    let (fused, partials) = scene.fuse_grid(&decoded, weighting, t)?;
    let renders = scene.geometry().render(&fused)?;
    let mut tiles = Vec::with_capacity(renders.len());
    let mut foreground = Vec::with_capacity(renders.len());
    for ((render, mask), tile) in renders.into_iter().zip(decoded.tiles()) {
        let ch = tile.channels();
        let mut merged = tile.clone();
        for (p, &fg) in mask.iter().enumerate() {
            if fg {
                merged.pixel_mut(p)[..3].copy_from_slice(&render.pixel(p)[..3]);
                debug_assert!(ch >= 3);
            }
        }
        tiles.push(merged);
        foreground.push(mask);
    }
    let merged = GridImage::new(decoded.rows(), decoded.cols(), tiles)?;
    let mut out = codec.encode(&merged)?;
    if codec.pixel_aligned() && out.same_shape(x0) {
        let ch = out.channels();
        for (view, mask) in foreground.iter().enumerate() {
            let src = x0.view(view);
            let dst = out.view_mut(view);
            for (p, &fg) in mask.iter().enumerate() {
                if !fg {
                    dst[p * ch..(p + 1) * ch].copy_from_slice(&src[p * ch..(p + 1) * ch]);
                }
            }
        }
    }
    Ok(SyncOutput {
        x0: out,
        fused,
        partials,
        foreground,
    })
}
