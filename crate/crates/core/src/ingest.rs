//! Turns uploaded PNG/JPEG bytes into the model's `3x64x64` input.
//!
//! decode (alpha over white) -> centered square crop -> bilinear resize to
//! 64x64 -> channel-major `R, G, B` tensor with values `pixel / 255`.

use crate::error::{Error, Result};
use crate::tensor::Tensor3D;

pub const INPUT_SIDE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// Row-major RGB triples.
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::config(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

fn over_white(c: u8, a: u8) -> u8 {
    let (c, a) = (u32::from(c), u32::from(a));
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}

/// Decodes PNG or JPEG bytes. Transparent pixels are composited over white.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::Decode(format!("unsupported image format {format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let rgba = decoded.to_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            [over_white(r, a), over_white(g, a), over_white(b, a)]
        })
        .collect();
    RgbImage::new(w, h, pixels).map_err(|e| Error::Decode(e.to_string()))
}

/// Keeps the largest centered square. With an odd leftover the extra pixel
/// is dropped from the right or bottom edge.
pub fn center_crop_square(img: &RgbImage) -> RgbImage {
    let side = img.width.min(img.height);
    if img.width == img.height {
        return img.clone();
    }
    let x0 = (img.width - side) / 2;
    let y0 = (img.height - side) / 2;
    RgbImage::from_fn(side, side, |x, y| img.pixel(x0 + x, y0 + y)).expect("crop is non-empty")
}

/// Bilinear resampling with half-pixel centers and edge clamping; each
/// channel is rounded to the nearest integer.
pub fn resize_bilinear(img: &RgbImage, out_w: usize, out_h: usize) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::config("resize target must be positive"));
    }
    if (img.width, img.height) == (out_w, out_h) {
        return Ok(img.clone());
    }
    let axis = |out: usize, input: usize| -> Vec<(usize, usize, f32)> {
        let scale = input as f32 / out as f32;
        (0..out)
            .map(|o| {
                let src = ((o as f32 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f32);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(input - 1);
                (lo, hi, src - lo as f32)
            })
            .collect()
    };
    let xs = axis(out_w, img.width);
    let ys = axis(out_h, img.height);
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let (p00, p01) = (img.pixel(x0, y0), img.pixel(x1, y0));
            let (p10, p11) = (img.pixel(x0, y1), img.pixel(x1, y1));
            let mut out = [0u8; 3];
            for ch in 0..3 {
                let top = f32::from(p00[ch]) * (1.0 - fx) + f32::from(p01[ch]) * fx;
                let bottom = f32::from(p10[ch]) * (1.0 - fx) + f32::from(p11[ch]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[ch] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            pixels.push(out);
        }
    }
    RgbImage::new(out_w, out_h, pixels)
}

pub fn resize_to_64(img: &RgbImage) -> Result<RgbImage> {
    if img.width != img.height {
        return Err(Error::config(format!(
            "resize_to_64 expects a square image, got {}x{}",
            img.width, img.height
        )));
    }
    resize_bilinear(img, INPUT_SIDE, INPUT_SIDE)
}

pub fn to_input_tensor(img: &RgbImage) -> Result<Tensor3D> {
    if (img.width, img.height) != (INPUT_SIDE, INPUT_SIDE) {
        return Err(Error::config(format!(
            "input image must be {INPUT_SIDE}x{INPUT_SIDE}, got {}x{}",
            img.width, img.height
        )));
    }
    Tensor3D::from_fn(3, INPUT_SIDE, INPUT_SIDE, |c, r, k| {
        f32::from(img.pixel(k, r)[c]) / 255.0
    })
}

/// Full pipeline from encoded bytes to a `[0, 1]` input tensor.
pub fn image_to_input(bytes: &[u8]) -> Result<Tensor3D> {
    let img = decode_image(bytes)?;
    to_input_tensor(&resize_to_64(&center_crop_square(&img))?)
}
