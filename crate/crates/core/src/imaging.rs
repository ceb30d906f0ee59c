//! Image and mask containers, blur-based curation, and silhouette comparison.
//!
//! Pixels are `f64` in `[0, 1]`, row-major, channel-interleaved. Files are
//! exchanged as 8-bit binary PGM (`P5`) or PNG.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ArborError::invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(ArborError::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height * channels {
            return Err(ArborError::invalid(format!(
                "pixel count {} does not match {width}x{height}x{channels}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ArborError::invalid("pixel values must lie in [0, 1]"));
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from a per-pixel function returning `channels` values.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                debug_assert_eq!(v.len(), channels);
                pixels.extend(v);
            }
        }
        Image::new(width, height, channels, pixels)
    }

    // Renderer output is clamped into range, so this skips validation.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Self {
        Image {
            width,
            height,
            channels,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Luma conversion (Rec. 601 weights); grayscale images are returned as-is.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        Image::from_raw(self.width, self.height, 1, pixels)
    }

    /// 3x3 box blur with clamped borders.
    pub fn box_blur3(&self) -> Image {
        let (w, h, ch) = (self.width, self.height, self.channels);
        let mut out = vec![0.0; self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                            let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                            acc += self.get(sx, sy, c);
                        }
                    }
                    out[(y * w + x) * ch + c] = acc / 9.0;
                }
            }
        }
        Image::from_raw(w, h, ch, out)
    }

    /// Area-average resampling to `(width, height)`.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        let ch = self.channels;
        let mut out = vec![0.0; width * height * ch];
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        for y in 0..height {
            let y0 = (y as f64 * sy).floor() as usize;
            let y1 = (((y + 1) as f64 * sy).ceil() as usize).clamp(y0 + 1, self.height);
            for x in 0..width {
                let x0 = (x as f64 * sx).floor() as usize;
                let x1 = (((x + 1) as f64 * sx).ceil() as usize).clamp(x0 + 1, self.width);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                for c in 0..ch {
                    let mut acc = 0.0;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            acc += self.get(xx, yy, c);
                        }
                    }
                    out[(y * width + x) * ch + c] = acc / n;
                }
            }
        }
        Image::from_raw(width, height, ch, out)
    }

    pub fn read(path: &Path) -> Result<Image> {
        if is_pgm(path) {
            let (w, h, data) = read_pgm(path)?;
            return Ok(Image::from_raw(
                w,
                h,
                1,
                data.iter().map(|&b| b as f64 / 255.0).collect(),
            ));
        }
        let dynimg = image::open(path)?;
        let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
        if dynimg.color().channel_count() <= 2 {
            let g = dynimg.to_luma8();
            Ok(Image::from_raw(
                w,
                h,
                1,
                g.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
            ))
        } else {
            let rgb = dynimg.to_rgb8();
            Ok(Image::from_raw(
                w,
                h,
                3,
                rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
            ))
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.pixels.iter().map(|&v| to_u8(v)).collect();
        if is_pgm(path) {
            let gray = if self.channels == 1 {
                bytes
            } else {
                self.to_gray().pixels.iter().map(|&v| to_u8(v)).collect()
            };
            return write_pgm(path, self.width, self.height, &gray);
        }
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(path, &bytes, self.width as u32, self.height as u32, color)?;
        Ok(())
    }
}

/// Soft per-pixel occupancy in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Mask {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ArborError::invalid("mask dimensions must be positive"));
        }
        if values.len() != width * height {
            return Err(ArborError::invalid(format!(
                "mask value count {} does not match {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ArborError::invalid("mask values must lie in [0, 1]"));
        }
        Ok(Mask { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Mask::new(width, height, values)
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        Mask { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn binarize(&self, thresh: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v >= thresh).collect()
    }

    pub fn resize(&self, width: usize, height: usize) -> Mask {
        let img = Image::from_raw(self.width, self.height, 1, self.values.clone()).resize(width, height);
        Mask::from_raw(width, height, img.pixels)
    }

    pub fn read(path: &Path) -> Result<Mask> {
        let img = Image::read(path)?.to_gray();
        Ok(Mask::from_raw(img.width, img.height, img.pixels))
    }

    /// Writes the mask binarized at 0.5 as 0/255 grayscale.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().map(|&v| if v >= 0.5 { 255 } else { 0 }).collect();
        if is_pgm(path) {
            write_pgm(path, self.width, self.height, &bytes)
        } else {
            image::save_buffer(
                path,
                &bytes,
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::L8,
            )?;
            Ok(())
        }
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn is_pgm(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "pgm" || e == "pnm"
    )
}

/// Writes 8-bit binary PGM (`P5`, maxval 255).
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(data)?;
    f.flush()?;
    Ok(())
}

/// Reads 8-bit binary PGM (`P5`). Comment lines in the header are skipped.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < 4 {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(ArborError::format("PGM", "truncated header"));
        }
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "P5" {
        return Err(ArborError::format("PGM", format!("unsupported magic {}", tokens[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ArborError::format("PGM", format!("bad header field {s}")))
    };
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval != 255 {
        return Err(ArborError::format("PGM", "only maxval 255 is supported"));
    }
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data)?;
    Ok((w, h, data))
}

/// Mean over non-overlapping patches of the variance of the 5-point Laplacian
/// evaluated on each patch interior. Trailing partial patches are dropped.
pub fn sharpness_score(img: &Image, patch_size: usize) -> Result<f64> {
    if img.channels != 1 {
        return Err(ArborError::invalid("sharpness_score expects a grayscale image"));
    }
    if patch_size < 3 || patch_size > img.width.min(img.height) {
        return Err(ArborError::invalid(format!(
            "patch_size {patch_size} must be in [3, {}]",
            img.width.min(img.height)
        )));
    }
    let (px, py) = (img.width / patch_size, img.height / patch_size);
    let mut total = 0.0;
    let mut responses = Vec::with_capacity((patch_size - 2) * (patch_size - 2));
    for by in 0..py {
        for bx in 0..px {
            responses.clear();
            let (x0, y0) = (bx * patch_size, by * patch_size);
            for y in y0 + 1..y0 + patch_size - 1 {
                for x in x0 + 1..x0 + patch_size - 1 {
                    let lap = img.get(x, y - 1, 0) + img.get(x, y + 1, 0) + img.get(x - 1, y, 0) + img.get(x + 1, y, 0)
                        - 4.0 * img.get(x, y, 0);
                    responses.push(lap);
                }
            }
            let n = responses.len() as f64;
            let mean = responses.iter().sum::<f64>() / n;
            total += responses.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        }
    }
    Ok(total / (px * py) as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curation {
    pub kept: Vec<usize>,
    pub rejected: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Keeps image `i` iff its sharpness score reaches `threshold`.
pub fn curate(imgs: &[Image], threshold: f64, patch_size: usize) -> Result<Curation> {
    if !(threshold >= 0.0) {
        return Err(ArborError::invalid("threshold must be non-negative"));
    }
    let mut out = Curation::default();
    for (i, img) in imgs.iter().enumerate() {
        let s = sharpness_score(&img.to_gray(), patch_size)?;
        out.scores.push(s);
        if s >= threshold {
            out.kept.push(i);
        } else {
            out.rejected.push(i);
        }
    }
    Ok(out)
}

/// Intersection over union of the two masks binarized at `bin_thresh`.
/// Two empty masks compare as identical (1.0).
pub fn silhouette_iou(a: &Mask, b: &Mask, bin_thresh: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(ArborError::invalid(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if !(bin_thresh > 0.0 && bin_thresh < 1.0) {
        return Err(ArborError::invalid("bin_thresh must lie in (0, 1)"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&va, &vb) in a.values.iter().zip(&b.values) {
        let (ia, ib) = (va >= bin_thresh, vb >= bin_thresh);
        inter += (ia && ib) as usize;
        union += (ia || ib) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
