//! Interleaved RGB images in `[0, 1]` and 8-bit PNG interchange.

use std::io::Cursor;
use std::path::Path;

use image::{ImageEncoder, RgbImage};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major RGB image with the origin at the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

/// Quantizes a channel value to 8 bits.
#[inline]
pub fn to_u8<T: Real>(v: T) -> u8 {
    let c = v.max(T::zero()).min(T::one()) * T::lit(255.0);
    c.round().to_u8().unwrap_or(0)
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::zero(); width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn check_same_size(&self, other: &Image<T>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims((self.width, self.height), (other.width, other.height)));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|v| to_u8(*v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        let inv = T::lit(1.0 / 255.0);
        Self { width, height, data: bytes.iter().map(|b| T::from_usize_lossy(*b as usize) * inv).collect() }
    }

    /// Loads any 8-bit image the `image` crate understands as RGB.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })?
            .to_rgb8();
        Ok(Self::from_rgb8(img.width() as usize, img.height() as usize, img.as_raw()))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf = RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .ok_or_else(|| Error::Image { path: path.to_path_buf(), message: "buffer size".into() })?;
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
    }

    /// PNG bytes of the 8-bit quantized image.
    pub fn encode_png(&self) -> Vec<u8> {
        encode_png_rgb8(self.width, self.height, &self.to_rgb8())
    }
}

pub fn encode_png_rgb8(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(rgb, width as u32, height as u32, image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    out.into_inner()
}
