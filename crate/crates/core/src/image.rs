//! Row-major image grids and their on-disk formats.
//!
//! Drawings use the ink convention internally: 0 is blank paper, 1 is full
//! ink. PNG export inverts this so that lines come out black on white.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A dense row-major grid of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Grayscale intensity image with values in [0, 1]; 1 is full ink.
pub type Drawing = Image<f64>;

/// Binary per-pixel mask.
pub type Mask = Image<bool>;

impl<T: Clone> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T: Clone + Default> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::default())
    }
}

impl<T> Image<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "image buffer of {} pixels does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Fails unless `other` has the same dimensions.
    pub fn check_same_dims<U>(&self, other: &Image<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn set_pixels(&self) -> Vec<(usize, usize)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }

    pub fn to_drawing(&self) -> Drawing {
        self.map(|&b| if b { 1.0 } else { 0.0 })
    }
}

impl Drawing {
    /// Writes an 8-bit grayscale PNG with black ink on white paper.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer size matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Reads any image the `image` crate understands, converting it to ink
    /// intensities (dark pixels become ink).
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        let data = img
            .into_raw()
            .into_iter()
            .map(|b| 1.0 - b as f64 / 255.0)
            .collect();
        Self::from_vec(w as usize, h as usize, data)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

const FLOAT_DUMP_MAGIC: &[u8; 4] = b"LAFD";

/// Writes `channels` interleaved float channels of `count` records as
/// little-endian f32 after a header of magic, record count, channel count.
pub fn write_float_dump(
    mut out: impl Write,
    count: usize,
    channels: usize,
    values: &[f64],
) -> Result<()> {
    if values.len() != count * channels {
        return Err(Error::InvalidArgument(format!(
            "float dump expects {} values, got {}",
            count * channels,
            values.len()
        )));
    }
    out.write_all(FLOAT_DUMP_MAGIC)?;
    out.write_all(&(count as u32).to_le_bytes())?;
    out.write_all(&(channels as u32).to_le_bytes())?;
    for &v in values {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump written by [`write_float_dump`]; returns (count, channels, values).
pub fn read_float_dump(mut input: impl Read) -> Result<(usize, usize, Vec<f32>)> {
    let mut header = [0u8; 12];
    input.read_exact(&mut header)?;
    if &header[0..4] != FLOAT_DUMP_MAGIC {
        return Err(Error::InvalidArgument("not a float dump".into()));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let channels = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut raw = vec![0u8; count * channels * 4];
    input.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((count, channels, values))
}
