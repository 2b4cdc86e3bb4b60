//! Sprites, rasters and per-sprite opacity maps.
//!
//! Everything here is immutable once built. The [`Atlas`] is the sprite set
//! shared by scene composition, obstacle extraction and opacity correction.

use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procgen::{hash_seed, next_random, PrngState};

/// Side length of every synthesized sprite.
pub const SPRITE_SIZE: u32 = 128;

pub type Rgba = [u8; 4];

/// Row-major RGBA8 pixel grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<Rgba>,
}

impl Raster {
    pub fn filled(width: u32, height: u32, color: Rgba) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self { width, height, pixels: vec![color; width as usize * height as usize] })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgba>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::PixelCount { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgba] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, color: Rgba) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = color;
    }

    /// Flat RGBA byte view, as written to PNG.
    pub fn as_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyRaster { width, height });
    }
    Ok(())
}

/// A raster plus the offset at which it is placed inside its tile cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sprite {
    image: Raster,
    anchor: (u32, u32),
}

impl Sprite {
    pub fn new(image: Raster, anchor: (u32, u32)) -> Result<Self> {
        if anchor.0 >= image.width() || anchor.1 >= image.height() {
            return Err(Error::AnchorOutOfBounds {
                x: anchor.0,
                y: anchor.1,
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(Self { image, anchor })
    }

    pub fn image(&self) -> &Raster {
        &self.image
    }

    pub fn anchor(&self) -> (u32, u32) {
        self.anchor
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// Boolean mask of the non-transparent pixels of a sprite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpacityMap {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl OpacityMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn is_opaque(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn row(&self, y: u32) -> &[bool] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.mask[start..start + w]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Inclusive `(min_row, max_row)` of opaque pixels, `None` when empty.
    pub fn row_extent(&self) -> Option<(u32, u32)> {
        let first = (0..self.height).find(|&y| self.row(y).contains(&true))?;
        let last = (0..self.height).rev().find(|&y| self.row(y).contains(&true))?;
        Some((first, last))
    }

    /// Inclusive `(min_col, max_col)` of opaque pixels, `None` when empty.
    pub fn col_extent(&self) -> Option<(u32, u32)> {
        let mut extent: Option<(u32, u32)> = None;
        for y in 0..self.height {
            let row = self.row(y);
            if let Some(first) = row.iter().position(|&m| m) {
                let last = row.iter().rposition(|&m| m).unwrap_or(first);
                let (lo, hi) = extent.unwrap_or((u32::MAX, 0));
                extent = Some((lo.min(first as u32), hi.max(last as u32)));
            }
        }
        extent
    }
}

/// Marks every pixel whose alpha exceeds `alpha_threshold`.
pub fn extract_opacity_map(sprite: &Sprite, alpha_threshold: u8) -> OpacityMap {
    let image = sprite.image();
    OpacityMap {
        width: image.width(),
        height: image.height(),
        mask: image.pixels().iter().map(|p| p[3] > alpha_threshold).collect(),
    }
}

/// Decodes PNG bytes into an RGBA raster. Gray and RGB inputs get alpha 255.
pub fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info()?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::InvalidParameter("PNG too large to decode".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width, info.height);
    check_dims(width, height)?;
    let data = &buf[..info.buffer_size()];

    let pixels: Vec<Rgba> = match info.color_type {
        png::ColorType::Rgba => data.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
        png::ColorType::Rgb => data.chunks_exact(3).map(|c| [c[0], c[1], c[2], 255]).collect(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).map(|c| [c[0], c[0], c[0], c[1]]).collect(),
        png::ColorType::Grayscale => data.iter().map(|&g| [g, g, g, 255]).collect(),
        png::ColorType::Indexed => return Err(Error::InvalidParameter("indexed PNG was not expanded".into())),
    };
    Raster::from_pixels(width, height, pixels)
}

/// Loads a PNG sprite with its anchor at the origin.
pub fn load_sprite(path: impl AsRef<Path>) -> Result<Sprite> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    Sprite::new(decode_png(&bytes)?, (0, 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpriteKind {
    FloorBlock,
    Bush,
    Tree,
    Character,
}

impl SpriteKind {
    pub const ALL: [SpriteKind; 4] =
        [SpriteKind::FloorBlock, SpriteKind::Bush, SpriteKind::Tree, SpriteKind::Character];

    pub fn as_str(self) -> &'static str {
        match self {
            SpriteKind::FloorBlock => "floor-block",
            SpriteKind::Bush => "bush",
            SpriteKind::Tree => "tree",
            SpriteKind::Character => "character",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Floor blocks and characters do not halt light by default.
    pub fn occludes_by_default(self) -> bool {
        matches!(self, SpriteKind::Bush | SpriteKind::Tree)
    }
}

struct Noise(PrngState);

impl Noise {
    fn next(&mut self) -> u64 {
        let (state, value) = next_random(self.0);
        self.0 = state;
        value
    }

    /// Uniform integer in `0..n`.
    fn below(&mut self, n: u64) -> u64 {
        ((self.next() as u128 * n as u128) >> 64) as u64
    }

    /// Signed jitter in `-amount..=amount`.
    fn jitter(&mut self, amount: i32) -> i32 {
        self.below(2 * amount as u64 + 1) as i32 - amount
    }

    fn shade(&mut self, base: [u8; 3], amount: i32) -> Rgba {
        let j = self.jitter(amount);
        let c = |v: u8| (v as i32 + j).clamp(0, 255) as u8;
        [c(base[0]), c(base[1]), c(base[2]), 255]
    }
}

fn scale(color: [u8; 3], factor: f64) -> [u8; 3] {
    color.map(|c| (c as f64 * factor).round().min(255.0) as u8)
}

/// Deterministic 128x128 stand-in art for the given kind.
///
/// Floor blocks are an isometric diamond top face with two darker side
/// faces below it; the other kinds are opaque blobs on a transparent
/// background, sized to sit on a block's top face.
pub fn synth_sprite(kind: SpriteKind, state: PrngState) -> Sprite {
    let mut noise = Noise(state);
    let size = SPRITE_SIZE;
    let mut image = Raster::filled(size, size, [0, 0, 0, 0]).expect("nonzero sprite size");
    let half = size as f64 / 2.0;

    match kind {
        SpriteKind::FloorBlock => {
            const EARTH: [[u8; 3]; 4] = [[86, 142, 64], [120, 98, 66], [104, 128, 72], [136, 130, 118]];
            let top = EARTH[noise.below(EARTH.len() as u64) as usize];
            let left = scale(top, 0.7);
            let right = scale(top, 0.5);
            let face = half / 2.0;
            for y in 0..size {
                for x in 0..size {
                    let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                    let hx = (fx - half).abs() / half;
                    let span = face * (1.0 - hx);
                    if fy < face - span || fy > 2.0 * face + span {
                        continue;
                    }
                    let color = if fy <= face + span {
                        top
                    } else if fx < half {
                        left
                    } else {
                        right
                    };
                    image.set(x, y, noise.shade(color, 6));
                }
            }
        }
        SpriteKind::Bush => {
            let rx = 22.0 + noise.below(6) as f64;
            let ry = 13.0 + noise.below(4) as f64;
            blob(&mut image, &mut noise, (half, 30.0), (rx, ry), [46, 110, 40]);
        }
        SpriteKind::Tree => {
            let rx = 20.0 + noise.below(6) as f64;
            let ry = 16.0 + noise.below(4) as f64;
            for y in 30..52 {
                for x in 60..68 {
                    image.set(x, y, noise.shade([96, 64, 36], 8));
                }
            }
            blob(&mut image, &mut noise, (half, 20.0), (rx, ry), [30, 92, 34]);
        }
        SpriteKind::Character => {
            let cloth = [[150, 40, 40], [40, 60, 150], [130, 110, 40]][noise.below(3) as usize];
            for y in 18..40 {
                for x in 57..71 {
                    image.set(x, y, noise.shade(cloth, 6));
                }
            }
            for y in 40..48 {
                for x in (58..62).chain(66..70) {
                    image.set(x, y, noise.shade([50, 40, 30], 4));
                }
            }
            for y in 4..18 {
                for x in 57..71 {
                    let (dx, dy) = (x as f64 + 0.5 - half, y as f64 + 0.5 - 11.0);
                    if dx * dx + dy * dy <= 36.0 {
                        image.set(x, y, noise.shade([224, 182, 150], 4));
                    }
                }
            }
        }
    }
    Sprite::new(image, (0, 0)).expect("origin anchor is in bounds")
}

/// Ragged ellipse with a thin semi-transparent fringe.
fn blob(image: &mut Raster, noise: &mut Noise, center: (f64, f64), radii: (f64, f64), base: [u8; 3]) {
    for y in 0..image.height() {
        for x in 0..image.width() {
            let dx = (x as f64 + 0.5 - center.0) / radii.0;
            let dy = (y as f64 + 0.5 - center.1) / radii.1;
            let d = (dx * dx + dy * dy).sqrt();
            let edge = 1.0 + noise.jitter(4) as f64 / 50.0;
            if d <= edge {
                // darker towards the bottom of the blob
                let color = scale(base, 1.15 - 0.3 * dy.clamp(-1.0, 1.0).max(0.0));
                image.set(x, y, noise.shade(color, 10));
            } else if d <= edge + 0.08 {
                let mut c = noise.shade(base, 10);
                c[3] = 96;
                image.set(x, y, c);
            }
        }
    }
}

/// One named sprite with its derived opacity map.
#[derive(Clone, Debug)]
pub struct AtlasEntry {
    pub sprite: Sprite,
    pub kind: String,
    pub occluding: bool,
    pub opacity: OpacityMap,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    #[serde(default)]
    ax: u32,
    #[serde(default)]
    ay: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    occluding: Option<bool>,
}

/// Named sprite set: `atlas/<kind>/<name>.png` plus optional `manifest.json`.
#[derive(Clone, Debug, Default)]
pub struct Atlas {
    entries: BTreeMap<String, AtlasEntry>,
}

impl Atlas {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        kind: impl Into<String>,
        sprite: Sprite,
        occluding: bool,
        alpha_threshold: u8,
    ) {
        let opacity = extract_opacity_map(&sprite, alpha_threshold);
        self.entries.insert(name.into(), AtlasEntry { sprite, kind: kind.into(), occluding, opacity });
    }

    pub fn get(&self, name: &str) -> Result<&AtlasEntry> {
        self.entries.get(name).ok_or_else(|| Error::UnknownSprite(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The built-in synthetic atlas: `grass` and `dirt` floor blocks plus
    /// `bush`, `tree` and `character` overlays.
    pub fn synthetic(seed: &str, alpha_threshold: u8) -> Self {
        const NAMES: [(&str, SpriteKind); 5] = [
            ("grass", SpriteKind::FloorBlock),
            ("dirt", SpriteKind::FloorBlock),
            ("bush", SpriteKind::Bush),
            ("tree", SpriteKind::Tree),
            ("character", SpriteKind::Character),
        ];
        let mut atlas = Self::new();
        for (name, kind) in NAMES {
            let state = hash_seed(&format!("{seed}/{name}"));
            atlas.insert(name, kind.as_str(), synth_sprite(kind, state), kind.occludes_by_default(), alpha_threshold);
        }
        atlas
    }

    /// Loads every `<kind>/<name>.png` under `dir`.
    ///
    /// Kinds named `floor-block` or `character` are non-occluding unless the
    /// manifest says otherwise.
    pub fn load_dir(dir: impl AsRef<Path>, alpha_threshold: u8) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let manifest: BTreeMap<String, ManifestEntry> = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path)
                .map_err(|source| Error::Read { path: manifest_path.clone(), source })?;
            serde_json::from_str(&text)
                .map_err(|source| Error::Json { what: manifest_path.display().to_string(), source })?
        } else {
            BTreeMap::new()
        };

        let read_dir = |p: &Path| fs::read_dir(p).map_err(|source| Error::Read { path: p.to_path_buf(), source });

        let mut atlas = Self::new();
        let mut kinds: Vec<_> =
            read_dir(dir)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
        kinds.sort();
        for kind_dir in kinds {
            let kind = kind_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut files: Vec<_> = read_dir(&kind_dir)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("png")))
                .collect();
            files.sort();
            for file in files {
                let name = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let loaded = load_sprite(&file)?;
                let entry = manifest.get(&name).cloned().unwrap_or_default();
                let sprite = Sprite::new(loaded.image, (entry.ax, entry.ay))?;
                let occluding = entry
                    .occluding
                    .unwrap_or_else(|| SpriteKind::parse(&kind).is_none_or(SpriteKind::occludes_by_default));
                atlas.insert(name, kind.clone(), sprite, occluding, alpha_threshold);
            }
        }
        Ok(atlas)
    }

    /// Writes the atlas in the layout [`Atlas::load_dir`] reads.
    pub fn export_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut manifest = BTreeMap::new();
        for (name, entry) in &self.entries {
            let kind_dir = dir.join(&entry.kind);
            fs::create_dir_all(&kind_dir).map_err(|source| Error::Write { path: kind_dir.clone(), source })?;
            crate::shading::write_png(entry.sprite.image(), kind_dir.join(format!("{name}.png")))?;
            let (ax, ay) = entry.sprite.anchor();
            manifest.insert(name.clone(), ManifestEntry { ax, ay, occluding: Some(entry.occluding) });
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|source| Error::Json { what: path.display().to_string(), source })?;
        fs::write(&path, text).map_err(|source| Error::Write { path, source })
    }
}
