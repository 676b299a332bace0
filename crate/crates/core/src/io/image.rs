use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use crate::error::{Result, RivalError};
use crate::latent::{LatentTensor, Shape};

/// 8-bit RGB pixels, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(RivalError::invalid(format!(
                "{width}x{height} RGB raster needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Raster { width, height, data })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path)?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| RivalError::Format(format!("{}: {e}", path.display())))
}

/// Reads an 8-bit RGB PNG.
pub fn load_image(path: &Path) -> Result<Raster> {
    let img = decode_png(path)?;
    if img.color() != ColorType::Rgb8 {
        return Err(RivalError::Format(format!("{}: expected 8-bit RGB, found {:?}", path.display(), img.color())));
    }
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Raster::new(w as usize, h as usize, rgb.into_raw())
}

/// Reads an 8-bit grayscale or RGB(A) PNG mask; any nonzero sample marks
/// the pixel for regeneration. Returns `(width, height, mask)`.
pub fn load_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let img = decode_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mask = match img.color() {
        ColorType::L8 => img.into_luma8().into_raw().into_iter().map(|v| v != 0).collect(),
        ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {
            let rgb = img.into_rgb8();
            rgb.pixels().map(|p| p.0.iter().any(|&v| v != 0)).collect()
        }
        other => return Err(RivalError::Format(format!("{}: unsupported mask color type {other:?}", path.display()))),
    };
    Ok((w, h, mask))
}

/// Writes an 8-bit RGB PNG atomically.
pub fn save_image(raster: &Raster, path: &Path) -> Result<()> {
    let buf = image::RgbImage::from_raw(raster.width as u32, raster.height as u32, raster.data.clone())
        .ok_or_else(|| RivalError::invalid("raster size does not match its data"))?;
    let mut bytes = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(buf)
        .write_to(&mut bytes, ImageFormat::Png)
        .map_err(|e| RivalError::Format(e.to_string()))?;
    super::write_bytes_atomic(path, bytes.get_ref())
}

/// Identity pixel codec: each RGB channel maps linearly `[0, 255] -> [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelCodec {
    pub channels: usize,
}

impl Default for PixelCodec {
    fn default() -> Self {
        PixelCodec { channels: 3 }
    }
}

impl PixelCodec {
    fn check(&self, channels: usize) -> Result<()> {
        if self.channels != 3 || channels != 3 {
            return Err(RivalError::config(format!(
                "the pixel codec maps 3 RGB channels, got codec {} / latent {channels}",
                self.channels
            )));
        }
        Ok(())
    }
}

pub fn encode_latent(raster: &Raster, codec: &PixelCodec) -> Result<LatentTensor> {
    codec.check(3)?;
    let (w, h) = (raster.width, raster.height);
    LatentTensor::from_fn(Shape::new(3, h, w), |c, y, x| raster.data[(y * w + x) * 3 + c] as f64 / 127.5 - 1.0)
}

pub fn decode_latent(x: &LatentTensor, codec: &PixelCodec) -> Result<Raster> {
    codec.check(x.channels())?;
    let (w, h) = (x.width(), x.height());
    let mut data = vec![0u8; w * h * 3];
    for y in 0..h {
        for xx in 0..w {
            for c in 0..3 {
                let v = x.get(c, y, xx).clamp(-1.0, 1.0);
                data[(y * w + xx) * 3 + c] = ((v + 1.0) * 127.5).round() as u8;
            }
        }
    }
    Raster::new(w, h, data)
}
