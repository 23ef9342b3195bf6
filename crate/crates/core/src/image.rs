//! Dense float images and the multi-view grid arrangement.
//!
//! Images are row-major with interleaved channels; row 0 is the top row.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "buffer of {} values cannot hold {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// All channels of pixel `index` (row-major pixel index).
    #[inline]
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, index: usize) -> &mut [f32] {
        let c = self.channels;
        &mut self.data[index * c..(index + 1) * c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Image) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Elementwise combination of two equally shaped images.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f32, f32) -> f32) -> Result<Image> {
        self.check_same_shape(other, "zip_map")?;
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// `rows x cols` equally sized tiles, view index increasing row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    rows: usize,
    cols: usize,
    tiles: Vec<Image>,
}

impl GridImage {
    pub fn new(rows: usize, cols: usize, tiles: Vec<Image>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("grid layout must be at least 1x1"));
        }
        if tiles.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} tiles do not fill a {rows}x{cols} grid",
                tiles.len()
            )));
        }
        let first = &tiles[0];
        if let Some(bad) = tiles.iter().position(|t| !t.same_shape(first)) {
            return Err(Error::shape(format!("tile {bad} differs in shape from tile 0")));
        }
        Ok(Self { rows, cols, tiles })
    }

    /// Square-ish layout for `views` tiles: 2x2 for four views, 1xN otherwise
    /// unless `views` is a perfect rectangle with two rows.
    pub fn layout_for(views: usize) -> (usize, usize) {
        match views {
            4 => (2, 2),
            n if n > 2 && n % 2 == 0 => (2, n / 2),
            n => (1, n.max(1)),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tiles(&self) -> &[Image] {
        &self.tiles
    }

    pub fn tile(&self, view: usize) -> &Image {
        &self.tiles[view]
    }

    pub fn into_tiles(self) -> Vec<Image> {
        self.tiles
    }

    pub fn tile_size(&self) -> (usize, usize) {
        (self.tiles[0].width(), self.tiles[0].height())
    }

    /// Pack the tiles into one image.
    pub fn assemble(&self) -> Image {
        let (tw, th) = self.tile_size();
        let ch = self.tiles[0].channels();
        let mut out = Image::new(tw * self.cols, th * self.rows, ch);
        let row_len = tw * ch;
        for (view, tile) in self.tiles.iter().enumerate() {
            let (gr, gc) = (view / self.cols, view % self.cols);
            for y in 0..th {
                let dst = ((gr * th + y) * out.width() + gc * tw) * ch;
                let src = y * row_len;
                out.data[dst..dst + row_len].copy_from_slice(&tile.data[src..src + row_len]);
            }
        }
        out
    }

    /// Inverse of [`GridImage::assemble`].
    pub fn split(image: &Image, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || !image.width().is_multiple_of(cols) || !image.height().is_multiple_of(rows) {
            return Err(Error::shape(format!(
                "{}x{} image does not split into a {rows}x{cols} grid",
                image.width(),
                image.height()
            )));
        }
        let (tw, th, ch) = (image.width() / cols, image.height() / rows, image.channels());
        let row_len = tw * ch;
        let tiles = (0..rows * cols)
            .map(|view| {
                let (gr, gc) = (view / cols, view % cols);
                let mut data = Vec::with_capacity(tw * th * ch);
                for y in 0..th {
                    let src = ((gr * th + y) * image.width() + gc * tw) * ch;
                    data.extend_from_slice(&image.data[src..src + row_len]);
                }
                Image {
                    width: tw,
                    height: th,
                    channels: ch,
                    data,
                }
            })
            .collect();
        Ok(Self { rows, cols, tiles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_defaults() {
        assert_eq!(GridImage::layout_for(4), (2, 2));
        assert_eq!(GridImage::layout_for(1), (1, 1));
        assert_eq!(GridImage::layout_for(6), (2, 3));
        assert_eq!(GridImage::layout_for(3), (1, 3));
    }

    #[test]
    fn tile_count_must_match_layout() {
        let tiles = vec![Image::new(2, 2, 1); 3];
        assert!(GridImage::new(2, 2, tiles).is_err());
    }

    #[test]
    fn split_rejects_indivisible() {
        let img = Image::new(5, 4, 3);
        assert!(GridImage::split(&img, 2, 2).is_err());
    }

    #[test]
    fn assemble_places_views_row_major() {
        let tiles = (0..4).map(|v| Image::filled(2, 2, 1, v as f32)).collect();
        let grid = GridImage::new(2, 2, tiles).unwrap().assemble();
        assert_eq!(grid.get(0, 0, 0), 0.0);
        assert_eq!(grid.get(3, 0, 0), 1.0);
        assert_eq!(grid.get(0, 3, 0), 2.0);
        assert_eq!(grid.get(3, 3, 0), 3.0);
    }

    proptest! {
        #[test]
        fn split_assemble_roundtrip(
            rows in 1usize..4, cols in 1usize..4,
            tw in 1usize..9, th in 1usize..9, ch in 1usize..4, seed in any::<u32>()
        ) {
            let tiles: Vec<Image> = (0..rows * cols)
                .map(|v| Image::from_fn(tw, th, ch, |x, y, c| {
                    ((seed as usize + v * 31 + x * 7 + y * 13 + c) % 97) as f32 / 97.0
                }))
                .collect();
            let grid = GridImage::new(rows, cols, tiles.clone()).unwrap();
            let back = GridImage::split(&grid.assemble(), rows, cols).unwrap();
            prop_assert_eq!(back.tiles(), &tiles[..]);
        }
    }
}
