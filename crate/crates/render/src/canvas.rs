use std::io::Write;
use std::path::Path;

use font8x8::UnicodeFonts;

use crate::{RenderError, Result};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
pub const GREY: Rgb = [160, 160, 160];
pub const LIGHT: Rgb = [228, 228, 228];

/// Width and height of one glyph of the embedded font.
pub const GLYPH: usize = 8;

/// An RGB raster. Everything drawn onto it is integer arithmetic on a fixed
/// pixel grid, so the same drawing calls always produce the same bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, background: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&background);
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major RGB bytes.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Set one pixel; coordinates outside the canvas are ignored.
    pub fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    pub fn fill_rect(&mut self, x: i64, y: i64, w: usize, h: usize, c: Rgb) {
        for dy in 0..h as i64 {
            for dx in 0..w as i64 {
                self.put(x + dx, y + dy, c);
            }
        }
    }

    /// Bresenham line, `thickness` pixels wide.
    pub fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), thickness: usize, c: Rgb) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        let half = thickness as i64 / 2;
        loop {
            self.fill_rect(x - half, y - half, thickness, thickness, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Dashed line: `on` pixels drawn, `off` skipped, along the longer axis.
    pub fn dashed_line(&mut self, from: (i64, i64), to: (i64, i64), on: i64, off: i64, c: Rgb) {
        let steps = (to.0 - from.0).abs().max((to.1 - from.1).abs()).max(1);
        for s in 0..=steps {
            if s % (on + off) < on {
                let x = from.0 + (to.0 - from.0) * s / steps;
                let y = from.1 + (to.1 - from.1) * s / steps;
                self.put(x, y, c);
            }
        }
    }

    /// Draw `text` with its top-left corner at `(x, y)`. Characters the
    /// font lacks are drawn as `?`.
    pub fn text(&mut self, x: i64, y: i64, text: &str, c: Rgb) {
        for (k, ch) in text.chars().enumerate() {
            let glyph = font8x8::BASIC_FONTS.get(ch).or_else(|| font8x8::BASIC_FONTS.get('?')).unwrap_or([0; 8]);
            let gx = x + (k * GLYPH) as i64;
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits >> col & 1 == 1 {
                        self.put(gx + col, y + row as i64, c);
                    }
                }
            }
        }
    }

    /// Copy a grayscale image in, each source pixel becoming a
    /// `scale`x`scale` square.
    pub fn blit_gray(&mut self, x: i64, y: i64, img: &GrayImage, scale: usize) {
        for sy in 0..img.height {
            for sx in 0..img.width {
                let v = img.data[sy * img.width + sx];
                self.fill_rect(x + (sx * scale) as i64, y + (sy * scale) as i64, scale, scale, [v, v, v]);
            }
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            let mut w = enc.write_header()?;
            w.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }

    /// Write a PNG, going through a temporary file so readers never see a
    /// partial image.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        let tmp = path.with_extension("png.tmp");
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height || width == 0 || height == 0 {
            return Err(RenderError::Invalid(format!("{} bytes for a {width}x{height} image", data.len())));
        }
        Ok(Self { width, height, data })
    }

    /// From values in `[0, 1]`, rounded to the nearest byte.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        Self::new(width, height, data)
    }
}
