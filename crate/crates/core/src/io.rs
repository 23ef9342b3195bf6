//! File formats: 8-bit PNG for images and textures, 16-bit PNG for atlas
//! inspection, and a raw little-endian float format.
//!
//! Writers go through a `.partial` sibling that is renamed on success, so a
//! failed write never leaves a truncated file under the final name.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb as PxRgb, Rgba};

use crate::atlas::UvAtlasMaps;
use crate::error::{Error, Result};
use crate::image::{GridImage, Image};
use crate::texture::TextureMap;

const RAW_MAGIC: &[u8; 4] = b"TSRF";

pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Runs `write` against the `.partial` sibling of `path`, then renames it.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = partial_path(path);
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, |tmp| fs::write(tmp, bytes).map_err(|e| Error::io(tmp, e)))
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// 8-bit PNG; one channel is written as gray, three or more as RGB.
pub fn write_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width() as u32, image.height() as u32);
    write_atomic(path, |tmp| {
        let res = if image.channels() == 1 {
            ImageBuffer::<Luma<u8>, _>::from_fn(w, h, |x, y| Luma([to_u8(image.get(x as usize, y as usize, 0))]))
                .save_with_format(tmp, image::ImageFormat::Png)
        } else if image.channels() >= 3 {
            ImageBuffer::<PxRgb<u8>, _>::from_fn(w, h, |x, y| {
                PxRgb([0, 1, 2].map(|c| to_u8(image.get(x as usize, y as usize, c))))
            })
            .save_with_format(tmp, image::ImageFormat::Png)
        } else {
            return Err(Error::invalid("PNG export needs 1 or at least 3 channels"));
        };
        res.map_err(|e| image_err(tmp, e))
    })
}

pub fn write_grid_png(grid: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    write_png(&grid.assemble(), path)
}

/// Any PNG as a 3-channel image in [0, 1].
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Image::from_vec(w as usize, h as usize, 3, data)
}

/// RGBA PNG: alpha 255 on valid texels, 0 elsewhere. Margin colors are kept
/// in RGB.
pub fn write_texture_png(texture: &TextureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let res = texture.resolution() as u32;
    write_atomic(path, |tmp| {
        ImageBuffer::<Rgba<u8>, _>::from_fn(res, res, |x, y| {
            let u = (y * res + x) as usize;
            let c = texture.color(u);
            let a = if texture.is_valid(u) { 255 } else { 0 };
            Rgba([to_u8(c[0]), to_u8(c[1]), to_u8(c[2]), a])
        })
        .save_with_format(tmp, image::ImageFormat::Png)
        .map_err(|e| image_err(tmp, e))
    })
}

/// Square PNG as a texture; validity from alpha (>= 128) when present.
pub fn read_texture_png(path: impl AsRef<Path>) -> Result<TextureMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let has_alpha = img.color().has_alpha();
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    if w != h {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("texture must be square, got {w}x{h}"),
        });
    }
    let mut colors = Vec::with_capacity((w * h) as usize);
    let mut valid = Vec::with_capacity((w * h) as usize);
    for p in rgba.pixels() {
        colors.push([0, 1, 2].map(|c| p[c] as f32 / 255.0));
        valid.push(!has_alpha || p[3] >= 128);
    }
    TextureMap::new(w as usize, colors, valid)
}

pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::shape("mask length does not match its size"));
    }
    let img = Image::from_vec(width, height, 1, mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())?;
    write_png(&img, path)
}

/// 16-bit RGB PNGs of the position map (scaled to the atlas bounding box),
/// the normal map (`(n + 1) / 2`) and an 8-bit validity mask.
pub fn write_atlas_png16(atlas: &UvAtlasMaps, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let res = atlas.resolution() as u32;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for u in atlas.valid_indices() {
        let p = atlas.position(u);
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = [0, 1, 2].map(|a| (hi[a] - lo[a]).max(1e-12));
    let write16 = |name: &str, f: &dyn Fn(usize) -> [u16; 3]| -> Result<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, |tmp| {
            ImageBuffer::<PxRgb<u16>, _>::from_fn(res, res, |x, y| PxRgb(f((y * res + x) as usize)))
                .save_with_format(tmp, image::ImageFormat::Png)
                .map_err(|e| image_err(tmp, e))
        })?;
        Ok(path)
    };
    let position = write16("atlas_position.png", &|u| {
        if atlas.is_valid(u) {
            let p = atlas.position(u);
            [0, 1, 2].map(|a| to_u16((p[a] - lo[a]) / span[a]))
        } else {
            [0; 3]
        }
    })?;
    let normal = write16("atlas_normal.png", &|u| {
        if atlas.is_valid(u) {
            atlas.normals()[u].map(|n| to_u16(0.5 * (n + 1.0)))
        } else {
            [0; 3]
        }
    })?;
    let mask = dir.join("atlas_mask.png");
    write_mask_png(atlas.validity(), atlas.resolution(), atlas.resolution(), &mask)?;
    Ok(vec![position, normal, mask])
}

/// Magic, width, height, channels (u32 LE) and f32 LE samples.
pub fn write_raw(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, |tmp| {
        let file = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(16);
        header.extend_from_slice(RAW_MAGIC);
        for v in [image.width(), image.height(), image.channels()] {
            header.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.write_all(&header).map_err(|e| Error::io(tmp, e))?;
        for v in image.data() {
            out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(tmp, e))?;
        }
        out.flush().map_err(|e| Error::io(tmp, e))
    })
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Format {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(bad("not a raw float image"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (word(4), word(8), word(12));
    if bytes.len() != 16 + 4 * w * h * c {
        return Err(bad("length does not match header"));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_vec(w, h, c, data)
}
