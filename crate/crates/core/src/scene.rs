//! Isometric placement, painter's-order draw list and unlit scene composite.

use crate::assets::{Atlas, Raster, Rgba};
use crate::error::{Error, Result};
use crate::procgen::SceneMap;

/// Tile geometry in screen pixels.
///
/// Row `r` is shifted down by `r * face_h`; odd rows are shifted right by
/// half a tile so each block sits between the two blocks above it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsoLayout {
    pub tile_w: u32,
    pub tile_h: u32,
    pub face_h: u32,
    pub origin: (i32, i32),
}

impl Default for IsoLayout {
    fn default() -> Self {
        Self { tile_w: 128, tile_h: 128, face_h: 32, origin: (0, 0) }
    }
}

impl IsoLayout {
    pub fn validate(&self) -> Result<()> {
        if self.tile_w == 0 || !self.tile_w.is_multiple_of(2) {
            return Err(Error::InvalidLayout(format!("tile width must be even and positive, got {}", self.tile_w)));
        }
        if self.face_h == 0 || self.face_h > self.tile_h {
            return Err(Error::InvalidLayout(format!(
                "face height must be in 1..={}, got {}",
                self.tile_h, self.face_h
            )));
        }
        Ok(())
    }
}

pub fn block_screen_position(row: usize, col: usize, layout: &IsoLayout) -> (i32, i32) {
    let x = layout.origin.0 as i64 + col as i64 * layout.tile_w as i64 + (row % 2) as i64 * (layout.tile_w / 2) as i64;
    let y = layout.origin.1 as i64 + row as i64 * layout.face_h as i64;
    (x as i32, y as i32)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacedSprite {
    pub sprite_id: String,
    pub x: i32,
    pub y: i32,
    /// 0 is the block, 1..=3 the overlays.
    pub layer: u8,
    pub cell: (usize, usize),
}

impl PlacedSprite {
    pub fn is_block(&self) -> bool {
        self.layer == 0
    }
}

/// Placed sprites sorted by `(row, col, layer)`, back to front.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DrawList(Vec<PlacedSprite>);

impl DrawList {
    pub fn new(mut sprites: Vec<PlacedSprite>) -> Self {
        sprites.sort_by_key(|p| (p.cell.0, p.cell.1, p.layer));
        Self(sprites)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PlacedSprite> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[PlacedSprite] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a DrawList {
    type Item = &'a PlacedSprite;
    type IntoIter = std::slice::Iter<'a, PlacedSprite>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneConfig {
    pub layout: IsoLayout,
    /// Upper bound on the raster size; `None` keeps the full extent.
    pub viewport: Option<(u32, u32)>,
    pub background: Rgba,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { layout: IsoLayout::default(), viewport: None, background: [0, 0, 0, 255] }
    }
}

/// Integer alpha-over with rounding, per channel.
#[inline]
pub fn blend_over(src: Rgba, dst: Rgba) -> Rgba {
    let a = src[3] as u32;
    let mix = |s: u8, d: u8| ((s as u32 * a + d as u32 * (255 - a) + 127) / 255) as u8;
    [mix(src[0], dst[0]), mix(src[1], dst[1]), mix(src[2], dst[2]), mix(255, dst[3])]
}

/// Alpha-composites `image` onto `target` with its top-left at `(x, y)`.
pub fn blit(target: &mut Raster, image: &Raster, x: i32, y: i32) {
    let (tw, th) = (target.width() as i64, target.height() as i64);
    let x0 = (x as i64).max(0);
    let x1 = (x as i64 + image.width() as i64).min(tw);
    let y0 = (y as i64).max(0);
    let y1 = (y as i64 + image.height() as i64).min(th);
    if x0 >= x1 || y0 >= y1 {
        return;
    }
    for ty in y0..y1 {
        let sy = (ty - y as i64) as u32;
        for tx in x0..x1 {
            let src = image.get((tx - x as i64) as u32, sy);
            match src[3] {
                0 => {}
                255 => target.set(tx as u32, ty as u32, src),
                _ => {
                    let dst = target.get(tx as u32, ty as u32);
                    target.set(tx as u32, ty as u32, blend_over(src, dst));
                }
            }
        }
    }
}

/// Places every block and overlay of `map`.
pub fn build_draw_list(map: &SceneMap, atlas: &Atlas, layout: &IsoLayout) -> Result<DrawList> {
    layout.validate()?;
    let mut placed = Vec::with_capacity(map.rows * map.cols * 2);
    for ((row, col), cell) in map.iter_cells() {
        let (bx, by) = block_screen_position(row, col, layout);
        let ids = std::iter::once(&cell.block_id).chain(&cell.overlays);
        for (layer, id) in ids.enumerate() {
            let (ax, ay) = atlas.get(id)?.sprite.anchor();
            placed.push(PlacedSprite {
                sprite_id: id.clone(),
                x: bx + ax as i32,
                y: by + ay as i32,
                layer: layer as u8,
                cell: (row, col),
            });
        }
    }
    Ok(DrawList::new(placed))
}

/// Screen extent `(right, bottom)` of all placements, measured from (0, 0).
pub fn placement_extent(draw_list: &DrawList, atlas: &Atlas) -> Result<(u32, u32)> {
    let mut extent = (0i64, 0i64);
    for p in draw_list {
        let sprite = &atlas.get(&p.sprite_id)?.sprite;
        extent.0 = extent.0.max(p.x as i64 + sprite.width() as i64);
        extent.1 = extent.1.max(p.y as i64 + sprite.height() as i64);
    }
    Ok((extent.0.max(1) as u32, extent.1.max(1) as u32))
}

/// Builds the draw list and composites it over the background.
///
/// The raster covers screen pixels `[0, w) x [0, h)` where `(w, h)` is the
/// placement extent, clamped to the configured viewport.
pub fn compose_scene(map: &SceneMap, atlas: &Atlas, config: &SceneConfig) -> Result<(DrawList, Raster)> {
    let draw_list = build_draw_list(map, atlas, &config.layout)?;
    let (mut w, mut h) = placement_extent(&draw_list, atlas)?;
    if let Some((vw, vh)) = config.viewport {
        if vw == 0 || vh == 0 {
            return Err(Error::InvalidParameter(format!("viewport {vw}x{vh} is empty")));
        }
        w = w.min(vw);
        h = h.min(vh);
    }
    let mut raster = Raster::filled(w, h, config.background)?;
    for p in &draw_list {
        blit(&mut raster, atlas.get(&p.sprite_id)?.sprite.image(), p.x, p.y);
    }
    Ok((draw_list, raster))
}
