//! Shared conditional embedding space with deterministic toy embedders.
//!
//! Image embeddings use a block layout: the first [`LUMA_DIMS`] components
//! depend only on luminance statistics, the remaining [`CHROMA_DIMS`] only
//! on opponent-color statistics. A gray image therefore has an all-zero
//! chroma block, and an image and its grayscale version differ only there.
//! Image embeddings are left unnormalized so that scaling them is
//! meaningful; text embeddings are unit length.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const EMBED_DIM: usize = 64;
pub const LUMA_DIMS: usize = 32;
pub const CHROMA_DIMS: usize = EMBED_DIM - LUMA_DIMS;

/// Side of the all-white image behind [`white_negative`].
pub const WHITE_NEGATIVE_SIZE: usize = 64;

const HIST_BINS: usize = 8;
const LUMA_FEATURES: usize = 1 + HIST_BINS + 16;
const CHROMA_FEATURES: usize = 2 + 2 * HIST_BINS;

const TEXT_SEED: u64 = 0x7e47_5eed;
const LUMA_SEED: u64 = 0x1a3e_0001;
const CHROMA_SEED: u64 = 0xc4_0a00_0002;
const EMPTY_TOKEN: &str = "\u{0}empty";

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl Modality {
    fn code(self) -> u32 {
        match self {
            Modality::Text => 0,
            Modality::Image => 1,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Modality::Text),
            1 => Some(Modality::Image),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub modality: Modality,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn zeros(modality: Modality) -> Self {
        Self {
            modality,
            values: vec![0.0; EMBED_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn luma(&self) -> &[f64] {
        &self.values[..LUMA_DIMS]
    }

    /// Components driven by opponent-color statistics (image embeddings).
    pub fn chroma(&self) -> &[f64] {
        &self.values[LUMA_DIMS..]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            modality: self.modality,
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let n = self.norm() * other.norm();
        if n == 0.0 {
            0.0
        } else {
            dot / n
        }
    }

    /// 16-byte header (magic, dimension, modality, reserved) then
    /// little-endian f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.modality.code().to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: &str| Error::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not an embedding file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let dim = word(4) as usize;
        let modality = Modality::from_code(word(8)).ok_or_else(|| bad("unknown modality"))?;
        if bytes.len() != 16 + 8 * dim {
            return Err(bad("length does not match header dimension"));
        }
        let values: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value"));
        }
        Ok(Self { modality, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Text embedder interface; [`HashTextEmbedder`] is the default.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, prompt: &str) -> Embedding;
}

/// Image embedder interface; [`StatsImageEmbedder`] is the default.
pub trait ImageEmbedder: Send + Sync {
    fn embed(&self, image: &Image) -> Result<Embedding>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashTextEmbedder;

impl TextEmbedder for HashTextEmbedder {
    fn embed(&self, prompt: &str) -> Embedding {
        embed_text(prompt)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StatsImageEmbedder;

impl ImageEmbedder for StatsImageEmbedder {
    fn embed(&self, image: &Image) -> Result<Embedding> {
        embed_image(image)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn gaussian_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn tokens(prompt: &str) -> Vec<String> {
    prompt
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bag of hashed tokens, each mapped to a seeded gaussian direction, summed
/// and normalized. Prompts without tokens map to a reserved token.
pub fn embed_text(prompt: &str) -> Embedding {
    let mut toks = tokens(prompt);
    if toks.is_empty() {
        toks.push(EMPTY_TOKEN.to_string());
    }
    let mut acc = vec![0.0; EMBED_DIM];
    for t in &toks {
        let dir = gaussian_vector(TEXT_SEED ^ fnv1a(t.as_bytes()), EMBED_DIM);
        for (a, d) in acc.iter_mut().zip(dir) {
            *a += d;
        }
    }
    let n = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    Embedding {
        modality: Modality::Text,
        values: acc.into_iter().map(|v| v / n).collect(),
    }
}

/// Rec.709 luminance; exact on gray pixels.
#[inline]
pub fn luminance(r: f32, g: f32, b: f32) -> f32 {
    if r == g && g == b {
        r
    } else {
        0.2126 * r + 0.7152 * g + 0.0722 * b
    }
}

pub fn to_grayscale(image: &Image) -> Result<Image> {
    check_rgb(image)?;
    Ok(Image::from_fn(image.width(), image.height(), 3, |x, y, _| {
        luminance(image.get(x, y, 0), image.get(x, y, 1), image.get(x, y, 2))
    }))
}

fn check_rgb(image: &Image) -> Result<()> {
    if image.is_empty() || image.channels() < 3 {
        return Err(Error::invalid(format!(
            "embedding needs a non-empty RGB image, got {}x{}x{}",
            image.width(),
            image.height(),
            image.channels()
        )));
    }
    Ok(())
}

fn hist_bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * HIST_BINS as f64).floor();
    (b.max(0.0) as usize).min(HIST_BINS - 1)
}

/// Luminance and opponent-color statistics, kept in separate blocks.
pub fn image_features(image: &Image) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rgb(image)?;
    let (w, h) = (image.width(), image.height());
    let n = (w * h) as f64;
    let mut luma = vec![0.0; LUMA_FEATURES];
    let mut chroma = vec![0.0; CHROMA_FEATURES];
    let mut cells = [0.0f64; 16];
    let mut cell_counts = [0usize; 16];
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = (image.get(x, y, 0), image.get(x, y, 1), image.get(x, y, 2));
            let l = luminance(r, g, b) as f64;
            let rg = r as f64 - g as f64;
            let by = b as f64 - 0.5 * (r as f64 + g as f64);
            luma[0] += l / n;
            luma[1 + hist_bin(l, 0.0, 1.0)] += 1.0 / n;
            let cell = (y * 4 / h) * 4 + x * 4 / w;
            cells[cell] += l;
            cell_counts[cell] += 1;
            chroma[0] += rg / n;
            chroma[1] += by / n;
            chroma[2 + hist_bin(rg, -1.0, 1.0)] += rg.abs() / n;
            chroma[2 + HIST_BINS + hist_bin(by, -1.0, 1.0)] += by.abs() / n;
        }
    }
    // images smaller than 4x4 leave some cells empty; borrow the nearest filled one
    for i in 0..16 {
        let src = if cell_counts[i] > 0 {
            i
        } else {
            let (cy, cx) = (i / 4, i % 4);
            let yy = (cy * h / 4).min(h - 1) * 4 / h;
            let xx = (cx * w / 4).min(w - 1) * 4 / w;
            yy * 4 + xx
        };
        luma[1 + HIST_BINS + i] = cells[src] / cell_counts[src] as f64;
    }
    Ok((luma, chroma))
}

fn project(features: &[f64], rows: usize, seed: u64) -> Vec<f64> {
    let m = gaussian_vector(seed, rows * features.len());
    let scale = 1.0 / (features.len() as f64).sqrt();
    (0..rows)
        .map(|r| {
            let mut acc = 0.0;
            for (f, w) in features.iter().zip(&m[r * features.len()..]) {
                acc += f * w;
            }
            acc * scale
        })
        .collect()
}

pub fn embed_image(image: &Image) -> Result<Embedding> {
    let (luma, chroma) = image_features(image)?;
    let mut values = project(&luma, LUMA_DIMS, LUMA_SEED);
    values.extend(project(&chroma, CHROMA_DIMS, CHROMA_SEED));
    Ok(Embedding {
        modality: Modality::Image,
        values,
    })
}

/// Embedding of the luminance-replicated reference, used as a negative
/// condition to steer away from the reference's lighting and shading.
pub fn grayscale_negative(reference: &Image) -> Result<Embedding> {
    embed_image(&to_grayscale(reference)?)
}

pub fn white_negative() -> Embedding {
    embed_image(&Image::filled(WHITE_NEGATIVE_SIZE, WHITE_NEGATIVE_SIZE, 3, 1.0)).expect("non-empty image")
}

/// Text slot plus the scaled sum of image embeddings, with the negative
/// condition used for guidance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBundle {
    pub text: Embedding,
    pub image_slot: Embedding,
    pub negative: Embedding,
    pub alphas: Vec<f64>,
}

impl ConditionBundle {
    /// Text plus image slot, the single vector a toy model reads.
    pub fn positive_vector(&self) -> Vec<f64> {
        self.text
            .values
            .iter()
            .zip(&self.image_slot.values)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn with_negative(mut self, negative: Embedding) -> Self {
        self.negative = negative;
        self
    }
}

/// `image_slot = sum_i alpha_i * e_i`, accumulated from +0 in order so that
/// all-zero alphas give an exactly zero slot. The negative defaults to
/// [`white_negative`].
pub fn aggregate(text: &Embedding, images: &[(f64, Embedding)]) -> Result<ConditionBundle> {
    if text.modality != Modality::Text {
        return Err(Error::invalid("text slot holds an image embedding"));
    }
    let dim = text.dim();
    let mut slot = vec![0.0; dim];
    for (alpha, e) in images {
        if e.modality != Modality::Image {
            return Err(Error::invalid("image slot holds a text embedding"));
        }
        if e.dim() != dim {
            return Err(Error::shape(format!("embedding dimension {} != {dim}", e.dim())));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("non-finite alpha {alpha}")));
        }
        for (s, v) in slot.iter_mut().zip(&e.values) {
            *s += alpha * v;
        }
    }
    Ok(ConditionBundle {
        text: text.clone(),
        image_slot: Embedding {
            modality: Modality::Image,
            values: slot,
        },
        negative: white_negative(),
        alphas: images.iter().map(|(a, _)| *a).collect(),
    })
}
