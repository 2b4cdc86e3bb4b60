//! Screen-space obstacle map estimated from sprite silhouettes.
//!
//! Each occluding sprite contributes one horizontal segment (its most
//! typical row width near the top of the silhouette) and a short vertical
//! bar through the segment's center. The map is built once per loaded map
//! and then only read by the tracers.

use crate::assets::{Atlas, OpacityMap};
use crate::error::{Error, Result};
use crate::scene::DrawList;

/// Boolean grid in light-texture space; `true` halts light rays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObstacleMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl ObstacleMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, blocked: vec![false; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Out-of-range coordinates are never blocked.
    #[inline]
    pub fn is_blocked(&self, x: i32, y: i32) -> bool {
        x >= 0
            && y >= 0
            && (x as u32) < self.width
            && (y as u32) < self.height
            && self.blocked[y as usize * self.width as usize + x as usize]
    }

    /// Marks `(x, y)`; returns false when out of range.
    #[inline]
    pub fn set_blocked(&mut self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.blocked[y as usize * self.width as usize + x as usize] = true;
        true
    }

    pub fn clear(&mut self, x: u32, y: u32) {
        self.blocked[y as usize * self.width as usize + x as usize] = false;
    }

    pub fn count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.blocked
    }

    pub fn iter_blocked(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.blocked.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }
}

/// Where the scanned band of rows starts inside a sprite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BandAnchor {
    #[default]
    FirstOpaqueRow,
    TopEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObstacleParams {
    /// Rows scanned per sprite.
    pub delta_y: u32,
    pub band_anchor: BandAnchor,
    /// Window size of the noise filter; 0 or 1 disables it.
    pub noise_window: u32,
}

impl Default for ObstacleParams {
    fn default() -> Self {
        Self { delta_y: 25, band_anchor: BandAnchor::FirstOpaqueRow, noise_window: 3 }
    }
}

/// The run selected for one sprite, in sprite-local coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObstacleSegment {
    pub row: u32,
    pub start: u32,
    pub len: u32,
}

impl ObstacleSegment {
    pub fn center(&self) -> u32 {
        self.start + self.len / 2
    }

    /// Length of the vertical bar on each side of the center.
    pub fn arm(&self) -> u32 {
        self.len / 4
    }
}

/// Longest run of opaque cells in a row as `(start, len)`.
pub fn longest_run(row: &[bool]) -> (u32, u32) {
    let mut best = (0, 0);
    let mut start = 0;
    let mut len = 0;
    for (x, &opaque) in row.iter().enumerate() {
        if opaque {
            if len == 0 {
                start = x as u32;
            }
            len += 1;
            if len > best.1 {
                best = (start, len);
            }
        } else {
            len = 0;
        }
    }
    best
}

/// Picks the band row whose longest run deviates least from the mean run
/// length. Rows without opaque pixels are ignored; ties go to the top.
pub fn select_segment(opacity: &OpacityMap, delta_y: u32, anchor: BandAnchor) -> Option<ObstacleSegment> {
    let first = match anchor {
        BandAnchor::FirstOpaqueRow => opacity.row_extent()?.0,
        BandAnchor::TopEdge => 0,
    };
    let last = first.saturating_add(delta_y).min(opacity.height());
    let runs: Vec<ObstacleSegment> = (first..last)
        .filter_map(|row| {
            let (start, len) = longest_run(opacity.row(row));
            (len > 0).then_some(ObstacleSegment { row, start, len })
        })
        .collect();
    if runs.is_empty() {
        return None;
    }
    // |len - sum/n| compared as |len*n - sum| to stay in integers
    let n = runs.len() as i64;
    let sum: i64 = runs.iter().map(|s| s.len as i64).sum();
    runs.into_iter().enumerate().min_by_key(|(i, s)| ((s.len as i64 * n - sum).abs(), *i)).map(|(_, s)| s)
}

/// Marks `segment` of a sprite placed at `(x, y)` (already in map space).
/// Returns the number of cells written.
pub fn mark_segment(map: &mut ObstacleMap, segment: ObstacleSegment, x: i64, y: i64) -> usize {
    let row = y + segment.row as i64;
    let mut written = 0;
    for dx in 0..segment.len as i64 {
        written += map.set_blocked(x + segment.start as i64 + dx, row) as usize;
    }
    let cx = x + segment.center() as i64;
    for k in 1..=segment.arm() as i64 {
        written += map.set_blocked(cx, row - k) as usize;
        written += map.set_blocked(cx, row + k) as usize;
    }
    written
}

/// Builds the obstacle map for every occluding sprite in `draw_list`.
///
/// `offset` translates screen coordinates into map coordinates (the light
/// texture margin).
pub fn build_obstacle_map(
    draw_list: &DrawList,
    atlas: &Atlas,
    params: &ObstacleParams,
    size: (u32, u32),
    offset: (i32, i32),
) -> Result<ObstacleMap> {
    if params.delta_y == 0 {
        return Err(Error::InvalidParameter("delta_y must be at least 1".into()));
    }
    let mut map = ObstacleMap::new(size.0, size.1);
    for placed in draw_list {
        let entry = atlas.get(&placed.sprite_id)?;
        if !entry.occluding {
            continue;
        }
        if let Some(segment) = select_segment(&entry.opacity, params.delta_y, params.band_anchor) {
            mark_segment(&mut map, segment, placed.x as i64 + offset.0 as i64, placed.y as i64 + offset.1 as i64);
        }
    }
    Ok(map)
}

/// Erases small obstacles: a blocked cell is cleared when the `n x n`
/// window whose top-left corner it is holds fewer than `n` blocked cells.
/// Windows are clipped at the map border, and every window reads the input
/// map, so clearing never cascades within one pass.
pub fn reduce_noise(map: &ObstacleMap, n: u32) -> ObstacleMap {
    if n <= 1 {
        return map.clone();
    }
    let (w, h) = (map.width as usize, map.height as usize);
    // summed-area table with a zero border row/column
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0;
        for x in 0..w {
            row_sum += map.blocked[y * w + x] as u32;
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row_sum;
        }
    }
    let n = n as usize;
    let mut out = map.clone();
    for (x, y) in map.iter_blocked() {
        let (x0, y0) = (x as usize, y as usize);
        let (x1, y1) = ((x0 + n).min(w), (y0 + n).min(h));
        let count = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0];
        if (count as usize) < n {
            out.clear(x, y);
        }
    }
    out
}
