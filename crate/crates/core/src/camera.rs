//! Look-at cameras and the evenly spaced surround rig.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// Vertical field of view in degrees.
    Perspective { fov_y_deg: f64 },
    /// Half of the visible height in object units.
    Orthographic { half_height: f64 },
}

impl Default for Projection {
    fn default() -> Self {
        Projection::Perspective { fov_y_deg: 40.0 }
    }
}

/// Screen-space position of a projected point. `x`/`y` are continuous pixel
/// coordinates (pixel `(i, j)` covers `[i, i+1) x [j, j+1)`, row 0 on top),
/// `depth` is the distance along the view axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    eye: Vec3,
    target: Vec3,
    up: Vec3,
    projection: Projection,
    width: usize,
    height: usize,
    near: f64,
    far: f64,
    right: Vec3,
    true_up: Vec3,
    forward: Vec3,
    /// Pixels per unit of (x/z) for perspective, per object unit for ortho.
    focal: f64,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        projection: Projection,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera resolution must be positive"));
        }
        if !(near > 0.0 && near < far && far.is_finite()) {
            return Err(Error::invalid(format!("need 0 < near < far, got {near}, {far}")));
        }
        let forward = math::normalize(math::sub(target, eye))
            .ok_or_else(|| Error::invalid("camera eye coincides with target"))?;
        let up = math::normalize(up).ok_or_else(|| Error::invalid("zero up vector"))?;
        let right = math::normalize(math::cross(forward, up))
            .ok_or_else(|| Error::invalid("up vector is parallel to the view direction"))?;
        let true_up = math::cross(right, forward);
        let focal = match projection {
            Projection::Perspective { fov_y_deg } => {
                if !(fov_y_deg > 0.0 && fov_y_deg < 180.0) {
                    return Err(Error::invalid(format!("field of view {fov_y_deg} out of range")));
                }
                0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan()
            }
            Projection::Orthographic { half_height } => {
                if !(half_height > 0.0 && half_height.is_finite()) {
                    return Err(Error::invalid("orthographic half-height must be positive"));
                }
                0.5 * height as f64 / half_height
            }
        };
        Ok(Self {
            eye,
            target,
            up,
            projection,
            width,
            height,
            near,
            far,
            right,
            true_up,
            forward,
            focal,
        })
    }

    pub fn eye(&self) -> Vec3 {
        self.eye
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn near(&self) -> f64 {
        self.near
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    /// Camera basis `[right, up, forward]` (rows of the view rotation).
    pub fn basis(&self) -> [Vec3; 3] {
        [self.right, self.true_up, self.forward]
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    pub fn focal_pixels(&self) -> f64 {
        self.focal
    }

    pub fn is_perspective(&self) -> bool {
        matches!(self.projection, Projection::Perspective { .. })
    }

    /// World point to camera coordinates (x right, y up, z forward).
    #[inline]
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = math::sub(p, self.eye);
        [
            math::dot(d, self.right),
            math::dot(d, self.true_up),
            math::dot(d, self.forward),
        ]
    }

    /// Camera coordinates to screen. `None` if the point is at or behind the
    /// eye plane of a perspective camera.
    #[inline]
    pub fn camera_to_screen(&self, c: Vec3) -> Option<ScreenPoint> {
        let (cx, cy) = (0.5 * self.width as f64, 0.5 * self.height as f64);
        match self.projection {
            Projection::Perspective { .. } => {
                if c[2] <= 1e-12 {
                    return None;
                }
                Some(ScreenPoint {
                    x: cx + self.focal * c[0] / c[2],
                    y: cy - self.focal * c[1] / c[2],
                    depth: c[2],
                })
            }
            Projection::Orthographic { .. } => Some(ScreenPoint {
                x: cx + self.focal * c[0],
                y: cy - self.focal * c[1],
                depth: c[2],
            }),
        }
    }

    #[inline]
    pub fn project(&self, p: Vec3) -> Option<ScreenPoint> {
        self.camera_to_screen(self.to_camera(p))
    }

    /// Unit direction from `p` towards the viewer.
    #[inline]
    pub fn direction_to_viewer(&self, p: Vec3) -> Vec3 {
        match self.projection {
            Projection::Perspective { .. } => {
                math::normalize(math::sub(self.eye, p)).unwrap_or(math::scale(self.forward, -1.0))
            }
            Projection::Orthographic { .. } => math::scale(self.forward, -1.0),
        }
    }

    /// Pixel index containing a screen point, if inside the image.
    #[inline]
    pub fn pixel_of(&self, s: &ScreenPoint) -> Option<(usize, usize)> {
        if s.x >= 0.0 && s.y >= 0.0 && s.x < self.width as f64 && s.y < self.height as f64 {
            Some((s.x as usize, s.y as usize))
        } else {
            None
        }
    }
}

/// Parameters for [`make_surround_rig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigSpec {
    pub view_count: usize,
    pub elevation_deg: f64,
    pub distance: f64,
    pub resolution: usize,
    pub projection: Projection,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            view_count: 4,
            elevation_deg: 0.0,
            // 40 degrees vertical at this distance frames a unit-normalized object
            distance: 4.0,
            resolution: 512,
            projection: Projection::default(),
        }
    }
}

/// Cameras at evenly spaced azimuths around the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
    spec: RigSpec,
}

impl CameraRig {
    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn camera(&self, view: usize) -> &Camera {
        &self.cameras[view]
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn spec(&self) -> &RigSpec {
        &self.spec
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.cameras[0].resolution()
    }
}

/// Builds `view_count` cameras at azimuths `k * 360 / view_count` degrees,
/// all looking at the origin with +Y up.
///
/// Azimuth 0 sits on +X and azimuth 90 on +Z.
pub fn make_surround_rig(spec: &RigSpec) -> Result<CameraRig> {
    if spec.view_count == 0 {
        return Err(Error::invalid("view count must be at least 1"));
    }
    if !(spec.distance > 0.0 && spec.distance.is_finite()) {
        return Err(Error::invalid(format!("rig distance must be positive, got {}", spec.distance)));
    }
    if spec.resolution == 0 {
        return Err(Error::invalid("rig resolution must be positive"));
    }
    let el = spec.elevation_deg.to_radians();
    let near = (spec.distance * 1e-3).min(1e-2);
    let far = spec.distance * 100.0;
    let cameras = (0..spec.view_count)
        .map(|k| {
            let az = (k as f64 * 360.0 / spec.view_count as f64).to_radians();
            let eye = [
                spec.distance * el.cos() * az.cos(),
                spec.distance * el.sin(),
                spec.distance * el.cos() * az.sin(),
            ];
            // looking straight down/up: fall back to an azimuth-aligned up vector
            let up = if el.cos().abs() < 1e-9 {
                [-az.cos(), 0.0, -az.sin()]
            } else {
                [0.0, 1.0, 0.0]
            };
            Camera::look_at(
                eye,
                [0.0; 3],
                up,
                spec.projection,
                spec.resolution,
                spec.resolution,
                near,
                far,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CameraRig {
        cameras,
        spec: *spec,
    })
}
