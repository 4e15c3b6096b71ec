//! 8-bit raster images and file loading.

use std::path::Path;

use crate::error::{invalid, Error, Result};

/// An 8-bit raster with 1 (luma) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(invalid("empty image"));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!("{} samples for {width}x{height}x{channels}", data.len())));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, channels: 1, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels]
    }

    /// BT.601 luma; identity for single-channel images.
    pub fn to_luma(&self) -> PlaneImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        PlaneImage { width: self.width, height: self.height, channels: 1, data }
    }

    pub fn is_equirectangular(&self) -> bool {
        self.width == 2 * self.height
    }

    /// Loads PNG or binary PGM/PPM.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let out = match img.color().channel_count() {
            1 | 2 => PlaneImage::new(w, h, 1, img.into_luma8().into_raw())?,
            _ => PlaneImage::new(w, h, 3, img.into_rgb8().into_raw())?,
        };
        Ok(out)
    }

    /// Loads an image and requires the 2:1 equirectangular aspect.
    pub fn load_equirect(path: impl AsRef<Path>) -> Result<Self> {
        let img = Self::load(path)?;
        if !img.is_equirectangular() {
            return Err(invalid(format!("equirectangular image must be 2:1, got {}x{}", img.width, img.height)));
        }
        Ok(img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let color = if self.channels == 1 { image::ExtendedColorType::L8 } else { image::ExtendedColorType::Rgb8 };
        let mut out = Vec::new();
        let enc = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(enc, &self.data, self.width as u32, self.height as u32, color)?;
        Ok(out)
    }
}
