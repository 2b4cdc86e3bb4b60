//! Light-texture blur, per-fragment shading and PNG output.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::assets::{Raster, Rgba};
use crate::error::{Error, Result};
use crate::lighting::LightTexture;

pub const LUMINANCE_WEIGHTS: [f64; 3] = [0.349, 0.114, 0.537];

/// Keeps every blur window sum within `u32`.
pub const MAX_BLUR_RADIUS: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShadeParams {
    pub ambient_clarity: f64,
    pub blur_radius: u32,
    /// Scale the base color by the light value too, so unlit areas go black.
    pub dark_outside: bool,
}

impl Default for ShadeParams {
    fn default() -> Self {
        Self { ambient_clarity: 0.4, blur_radius: 2, dark_outside: false }
    }
}

impl ShadeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ambient_clarity) {
            return Err(Error::InvalidParameter(format!(
                "ambient clarity must be in [0, 1], got {}",
                self.ambient_clarity
            )));
        }
        if self.blur_radius > MAX_BLUR_RADIUS {
            return Err(Error::InvalidParameter(format!(
                "blur radius must be at most {MAX_BLUR_RADIUS}, got {}",
                self.blur_radius
            )));
        }
        Ok(())
    }
}

/// Rounded mean over the `(2r+1)^2` window with clamp-to-edge sampling.
///
/// Window sums are accumulated exactly (rows, then columns) and divided
/// once, so the result equals the direct 2D mean.
pub fn box_blur(tex: &LightTexture, radius: u32) -> LightTexture {
    assert!(radius <= MAX_BLUR_RADIUS, "blur radius {radius} exceeds {MAX_BLUR_RADIUS}");
    if radius == 0 {
        return tex.clone();
    }
    let (w, h) = (tex.width() as usize, tex.height() as usize);
    let r = radius as usize;
    let src = tex.data();
    let row = |y: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        &src[y * w..(y + 1) * w]
    };

    let n = (2 * radius + 1).pow(2);
    let max_sum = 255 * n as usize;
    let mean: Vec<u8> =
        if max_sum <= 1 << 20 { (0..=max_sum as u32).map(|s| ((s + n / 2) / n) as u8).collect() } else { Vec::new() };

    // column sums over rows y - r ..= y + r, slid down one row at a time
    let mut columns = vec![0u32; w];
    for dy in -(r as isize)..=r as isize {
        for (c, &v) in columns.iter_mut().zip(row(dy)) {
            *c += v as u32;
        }
    }
    let mut out = tex.with_same_shape();
    let mut sums = vec![0u32; w];
    for (y, dst) in out.data_mut().chunks_exact_mut(w).enumerate() {
        window_sums(&columns, r, &mut sums);
        if mean.is_empty() {
            for (d, &s) in dst.iter_mut().zip(&sums) {
                *d = ((s + n / 2) / n) as u8;
            }
        } else {
            for (d, &s) in dst.iter_mut().zip(&sums) {
                *d = mean[s as usize];
            }
        }
        let (add, sub) = (row(y as isize + r as isize + 1), row(y as isize - r as isize));
        for ((c, &a), &s) in columns.iter_mut().zip(add).zip(sub) {
            *c = *c + a as u32 - s as u32;
        }
    }
    out
}

/// Sliding sums of `line[x - r ..= x + r]` with clamp-to-edge indices.
#[allow(clippy::needless_range_loop)]
fn window_sums(line: &[u32], r: usize, out: &mut [u32]) {
    let w = line.len();
    let at = |i: isize| line[i.clamp(0, w as isize - 1) as usize];
    let mut sum: u32 = (-(r as isize)..=r as isize).map(at).sum();
    // x where both x - r and x + r + 1 are inside the line
    let lo = r.min(w);
    let hi = w.saturating_sub(r + 1).max(lo);
    for x in 0..lo {
        out[x] = sum;
        sum = sum + at((x + r + 1) as isize) - at(x as isize - r as isize);
    }
    for x in lo..hi {
        out[x] = sum;
        sum = sum + line[x + r + 1] - line[x - r];
    }
    for x in hi..w {
        out[x] = sum;
        sum = sum + at((x + r + 1) as isize) - at(x as isize - r as isize);
    }
}

/// Shades one fragment. All inputs and outputs are in `[0, 1]`; alpha
/// passes through.
#[inline]
pub fn shade_fragment(tex_color: [f64; 4], light_value: f64, ambient_clarity: f64, dark_outside: bool) -> [f64; 4] {
    let [r, g, b, a] = tex_color;
    let luminance = r * LUMINANCE_WEIGHTS[0] + g * LUMINANCE_WEIGHTS[1] + b * LUMINANCE_WEIGHTS[2];
    let light_factor = luminance * light_value / (ambient_clarity * ambient_clarity + 0.1);
    let mut base = ambient_clarity.sqrt();
    if dark_outside {
        base *= light_value;
    }
    let channel = |c: f64| (c * base + light_factor).clamp(0.0, 1.0);
    [channel(r), channel(g), channel(b), a]
}

#[inline]
fn to_unit(v: u8) -> f64 {
    v as f64 / 255.0
}

/// `(v * 255).round()` for `v` in `[0, 1]` without a libm call.
#[inline]
fn to_byte(v: f64) -> u8 {
    let x = v * 255.0;
    let i = x as u32;
    (if x - i as f64 >= 0.5 { i + 1 } else { i }) as u8
}

/// [`shade_fragment`] on bytes with the per-frame constants hoisted. Performs
/// the same floating point operations in the same order.
struct Kernel {
    unit: [f64; 256],
    base: f64,
    denom: f64,
    dark_outside: bool,
    /// Output channel for a fragment with no light.
    unlit: [u8; 256],
}

impl Kernel {
    fn new(params: &ShadeParams) -> Self {
        let unit = std::array::from_fn(|v| to_unit(v as u8));
        let ambient = params.ambient_clarity;
        let mut kernel = Self {
            unit,
            base: ambient.sqrt(),
            denom: ambient * ambient + 0.1,
            dark_outside: params.dark_outside,
            unlit: [0; 256],
        };
        for v in 0..=255u8 {
            kernel.unlit[v as usize] = kernel.shade_lit([v, v, v, 255], 0)[0];
        }
        kernel
    }

    #[inline]
    fn shade_lit(&self, src: Rgba, light: u8) -> Rgba {
        let [r, g, b] = [src[0], src[1], src[2]].map(|v| self.unit[v as usize]);
        let light_value = self.unit[light as usize];
        let luminance = r * LUMINANCE_WEIGHTS[0] + g * LUMINANCE_WEIGHTS[1] + b * LUMINANCE_WEIGHTS[2];
        let light_factor = luminance * light_value / self.denom;
        let base = if self.dark_outside { self.base * light_value } else { self.base };
        let channel = |c: f64| to_byte((c * base + light_factor).clamp(0.0, 1.0));
        [channel(r), channel(g), channel(b), src[3]]
    }

    #[inline]
    fn shade(&self, src: Rgba, light: u8) -> Rgba {
        if light == 0 {
            // light_factor is exactly 0, so each channel depends on itself only
            [self.unlit[src[0] as usize], self.unlit[src[1] as usize], self.unlit[src[2] as usize], src[3]]
        } else {
            self.shade_lit(src, light)
        }
    }
}

fn check_coverage(scene: &Raster, tex: &LightTexture) -> Result<()> {
    let m = tex.margin() as u64;
    if scene.width() as u64 + 2 * m > tex.width() as u64 || scene.height() as u64 + 2 * m > tex.height() as u64 {
        return Err(Error::ViewportExceedsTexture {
            vw: scene.width(),
            vh: scene.height(),
            margin: tex.margin(),
            tw: tex.width(),
            th: tex.height(),
        });
    }
    Ok(())
}

fn shade_row(out: &mut [Rgba], scene_row: &[Rgba], light_row: &[u8], kernel: &Kernel) {
    for ((dst, &src), &light) in out.iter_mut().zip(scene_row).zip(light_row) {
        *dst = kernel.shade(src, light);
    }
}

fn composite(scene: &Raster, tex: &LightTexture, params: &ShadeParams, parallel: bool) -> Result<Raster> {
    params.validate()?;
    check_coverage(scene, tex)?;
    let blurred = box_blur(tex, params.blur_radius);
    let (w, m) = (scene.width() as usize, tex.margin() as usize);
    let tw = tex.width() as usize;
    let light_row = |y: usize| {
        let start = (y + m) * tw + m;
        &blurred.data()[start..start + w]
    };
    let kernel = Kernel::new(params);
    let mut out = scene.clone();
    let src = scene.pixels();
    if parallel {
        out.pixels_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| shade_row(row, &src[y * w..(y + 1) * w], light_row(y), &kernel));
    } else {
        for (y, row) in out.pixels_mut().chunks_mut(w).enumerate() {
            shade_row(row, &src[y * w..(y + 1) * w], light_row(y), &kernel);
        }
    }
    Ok(out)
}

/// Blurs the light texture and shades every viewport pixel of `scene`.
/// Scene pixel `(x, y)` samples the texture at `(x + margin, y + margin)`.
pub fn composite_frame(scene: &Raster, tex: &LightTexture, params: &ShadeParams) -> Result<Raster> {
    composite(scene, tex, params, false)
}

/// Row-parallel [`composite_frame`] on the current rayon pool; the output
/// is identical to the serial path.
pub fn composite_frame_par(scene: &Raster, tex: &LightTexture, params: &ShadeParams) -> Result<Raster> {
    composite(scene, tex, params, true)
}

fn encode(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut bytes, width, height);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Balanced);
        encoder.set_filter(png::Filter::Paeth);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(data)?;
        writer.finish()?;
    }
    Ok(bytes)
}

/// Lossless RGBA PNG bytes with fixed encoder settings.
pub fn encode_png(raster: &Raster) -> Result<Vec<u8>> {
    if raster.width() == 0 || raster.height() == 0 {
        return Err(Error::EmptyRaster { width: raster.width(), height: raster.height() });
    }
    encode(raster.width(), raster.height(), png::ColorType::Rgba, &raster.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}

pub fn write_png(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_png(raster)?)
}

/// Writes the raw texture as 8-bit grayscale.
pub fn write_gray_png(tex: &LightTexture, path: impl AsRef<Path>) -> Result<()> {
    if tex.width() == 0 || tex.height() == 0 {
        return Err(Error::EmptyRaster { width: tex.width(), height: tex.height() });
    }
    let bytes = encode(tex.width(), tex.height(), png::ColorType::Grayscale, tex.data())?;
    write_bytes(path.as_ref(), &bytes)
}
