//! Per-light ray tracing into an 8-bit light texture.
//!
//! Rays run from a light's center to every border pixel of its surrounding
//! rectangle along integer Bresenham lines, stopping at the first obstacle.
//! Intensity falls off with Chebyshev distance as `255 / (1 + max(dx, dy))`.
//! Overlapping writes combine with `max`, so the result is independent of
//! ray and light order.
//!
//! The texture is larger than the viewport by `margin` pixels on every side;
//! screen pixel `(x, y)` lives at texture pixel `(x + margin, y + margin)`.

use crate::assets::Atlas;
use crate::error::{Error, Result};
use crate::occlusion::ObstacleMap;
use crate::scene::DrawList;

const fn intensity_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut d = 0;
    while d < 256 {
        table[d] = (255 / (1 + d)) as u8;
        d += 1;
    }
    table
}

static INTENSITY: [u8; 256] = intensity_table();

/// `floor(255 / (1 + max(dj, di)))`.
#[inline]
pub fn intensity(dj: u32, di: u32) -> u8 {
    let d = dj.max(di);
    if d < 256 {
        INTENSITY[d as usize]
    } else {
        0
    }
}

/// Single-channel light field; 0 is unlit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LightTexture {
    width: u32,
    height: u32,
    margin: u32,
    data: Vec<u8>,
    /// Displacement accumulated since the last full trace.
    offset: (i32, i32),
}

impl LightTexture {
    /// Texture covering a `viewport` plus `margin` pixels on each side.
    pub fn for_viewport(viewport: (u32, u32), margin: u32) -> Result<Self> {
        let width = viewport.0 as u64 + 2 * margin as u64;
        let height = viewport.1 as u64 + 2 * margin as u64;
        if viewport.0 == 0 || viewport.1 == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
            return Err(Error::InvalidParameter(format!(
                "cannot build a light texture for viewport {}x{} with margin {margin}",
                viewport.0, viewport.1
            )));
        }
        Ok(Self::new(width as u32, height as u32, margin))
    }

    pub fn new(width: u32, height: u32, margin: u32) -> Self {
        Self { width, height, margin, data: vec![0; width as usize * height as usize], offset: (0, 0) }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    pub fn offset(&self) -> (i32, i32) {
        self.offset
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }

    #[inline]
    fn raise(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        let cell = &mut self.data[y as usize * w + x as usize];
        *cell = (*cell).max(value);
    }

    pub fn clear(&mut self) {
        self.data.fill(0);
        self.offset = (0, 0);
    }

    pub fn max_value(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn min_value(&self) -> u8 {
        self.data.iter().copied().min().unwrap_or(0)
    }

    /// Texture coordinates of a screen pixel.
    pub fn to_texture(&self, screen: (i32, i32)) -> (i32, i32) {
        (screen.0 + self.margin as i32, screen.1 + self.margin as i32)
    }

    /// Cellwise max with another texture of the same size.
    pub fn merge_max(&mut self, other: &LightTexture) {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = (*a).max(b);
        }
    }

    pub(crate) fn with_same_shape(&self) -> Self {
        Self::new(self.width, self.height, self.margin)
    }
}

/// Integer line walk from `org` to `dst`, inclusive of both ends.
///
/// The minor axis advances whenever the accumulated error reaches the
/// major-axis length, starting from half of it; when both axes are equal the
/// vertical axis is treated as major.
#[derive(Clone, Debug)]
pub struct RayWalk {
    x: i32,
    y: i32,
    diag: (i32, i32),
    straight: (i32, i32),
    longest: u32,
    shortest: u32,
    numerator: u32,
    step: u32,
}

impl RayWalk {
    pub fn new(org: (i32, i32), dst: (i32, i32)) -> Self {
        let w = dst.0 - org.0;
        let h = dst.1 - org.1;
        let (sx, sy) = (w.signum(), h.signum());
        let mut longest = w.unsigned_abs();
        let mut shortest = h.unsigned_abs();
        let mut straight = (sx, 0);
        if longest <= shortest {
            std::mem::swap(&mut longest, &mut shortest);
            straight = (0, sy);
        }
        Self { x: org.0, y: org.1, diag: (sx, sy), straight, longest, shortest, numerator: longest >> 1, step: 0 }
    }

    /// Number of pixels the full walk visits.
    pub fn len_total(&self) -> u32 {
        self.longest + 1
    }
}

impl Iterator for RayWalk {
    type Item = (i32, i32);

    #[inline]
    fn next(&mut self) -> Option<(i32, i32)> {
        if self.step > self.longest {
            return None;
        }
        let here = (self.x, self.y);
        self.numerator += self.shortest;
        if self.numerator >= self.longest {
            self.numerator -= self.longest;
            self.x += self.diag.0;
            self.y += self.diag.1;
        } else {
            self.x += self.straight.0;
            self.y += self.straight.1;
        }
        self.step += 1;
        Some(here)
    }
}

/// Traces one light ray in texture space and returns the number of pixels
/// enlightened. `on_write` sees each enlightened pixel in walk order.
///
/// The walk stops at the first blocked pixel (which stays dark) or at the
/// first pixel outside the texture.
#[inline]
pub fn trace_ray_with<F: FnMut(i32, i32)>(
    tex: &mut LightTexture,
    obstacles: &ObstacleMap,
    org: (i32, i32),
    dst: (i32, i32),
    center: (i32, i32),
    mut on_write: F,
) -> usize {
    let mut written = 0;
    for (x, y) in RayWalk::new(org, dst) {
        if !tex.contains(x, y) || obstacles.is_blocked(x, y) {
            break;
        }
        let value = intensity((x - center.0).unsigned_abs(), (y - center.1).unsigned_abs());
        tex.raise(x as u32, y as u32, value);
        on_write(x, y);
        written += 1;
    }
    written
}

pub fn trace_ray(
    tex: &mut LightTexture,
    obstacles: &ObstacleMap,
    org: (i32, i32),
    dst: (i32, i32),
    center: (i32, i32),
) -> usize {
    trace_ray_with(tex, obstacles, org, dst, center, |_, _| {})
}

/// Inverted trace: everything from the first blocked pixel onward
/// (inclusive) is forced to 0; pixels before it are untouched. Returns the
/// number of pixels zeroed.
pub fn trace_shadow_ray(tex: &mut LightTexture, obstacles: &ObstacleMap, org: (i32, i32), dst: (i32, i32)) -> usize {
    let mut shadowed = false;
    let mut zeroed = 0;
    for (x, y) in RayWalk::new(org, dst) {
        if !tex.contains(x, y) {
            break;
        }
        shadowed = shadowed || obstacles.is_blocked(x, y);
        if shadowed {
            tex.set(x as u32, y as u32, 0);
            zeroed += 1;
        }
    }
    zeroed
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LightSource {
    /// Screen pixels.
    pub center: (i32, i32),
    /// Half extents `(a, b)` of the traced rectangle.
    pub area: (u32, u32),
    pub enabled: bool,
}

impl LightSource {
    pub fn new(center: (i32, i32), area: (u32, u32)) -> Self {
        Self { center, area, enabled: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.area.0 == 0 || self.area.1 == 0 {
            return Err(Error::InvalidParameter(format!("light half extents must be at least 1, got {:?}", self.area)));
        }
        Ok(())
    }

    /// Inclusive rectangle `(x0, y0, x1, y1)` in the given space.
    fn rect_at(&self, center: (i32, i32)) -> (i32, i32, i32, i32) {
        let (a, b) = (self.area.0 as i32, self.area.1 as i32);
        (center.0 - a, center.1 - b, center.0 + a, center.1 + b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceMode {
    #[default]
    Light,
    Shadow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceConfig {
    /// Stride over border pixels; corners are always traced.
    pub skip: u32,
    /// Full retrace every `update_interval` frames.
    pub update_interval: u32,
    pub mode: TraceMode,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { skip: 2, update_interval: 3, mode: TraceMode::Light }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.skip == 0 || self.update_interval == 0 {
            return Err(Error::InvalidParameter("skip and update interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ray targets on the border of `[c - (a, b), c + (a, b)]`, clockwise from
/// the top-left corner. Each edge contributes its leading corner plus every
/// `skip`-th interior pixel starting with the first.
pub fn border_targets(center: (i32, i32), area: (u32, u32), skip: u32) -> Vec<(i32, i32)> {
    let skip = skip.max(1) as usize;
    let (a, b) = (area.0 as i32, area.1 as i32);
    let (x0, y0, x1, y1) = (center.0 - a, center.1 - b, center.0 + a, center.1 + b);
    let interior_w = (2 * a - 1).max(0) as usize;
    let interior_h = (2 * b - 1).max(0) as usize;
    let mut out = Vec::with_capacity(4 + 2 * (interior_w + interior_h).div_ceil(skip));

    out.push((x0, y0));
    out.extend((0..interior_w).step_by(skip).map(|k| (x0 + 1 + k as i32, y0)));
    out.push((x1, y0));
    out.extend((0..interior_h).step_by(skip).map(|k| (x1, y0 + 1 + k as i32)));
    out.push((x1, y1));
    out.extend((0..interior_w).step_by(skip).map(|k| (x1 - 1 - k as i32, y1)));
    out.push((x0, y1));
    out.extend((0..interior_h).step_by(skip).map(|k| (x0, y1 - 1 - k as i32)));
    out
}

/// Work done by one or more light passes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub lights: u64,
    pub rays: u64,
    /// Pixels enlightened by light rays.
    pub writes: u64,
    /// Pixels forced dark by shadow rays.
    pub shadowed: u64,
}

impl std::ops::AddAssign for TraceStats {
    fn add_assign(&mut self, rhs: Self) {
        self.lights += rhs.lights;
        self.rays += rhs.rays;
        self.writes += rhs.writes;
        self.shadowed += rhs.shadowed;
    }
}

/// Traces one light into `tex`.
///
/// In shadow mode the light is first traced unobstructed into a scratch
/// texture, shadow rays then zero everything behind obstacles, and the
/// scratch is merged by max so other lights' contributions are kept.
pub fn render_light(
    tex: &mut LightTexture,
    light: &LightSource,
    obstacles: &ObstacleMap,
    cfg: &TraceConfig,
) -> TraceStats {
    let mut stats = TraceStats::default();
    if !light.enabled {
        return stats;
    }
    let center = tex.to_texture(light.center);
    let targets = border_targets(center, light.area, cfg.skip);
    stats.lights = 1;
    stats.rays = targets.len() as u64;
    match cfg.mode {
        TraceMode::Light => {
            for &dst in &targets {
                stats.writes += trace_ray(tex, obstacles, center, dst, center) as u64;
            }
        }
        TraceMode::Shadow => {
            let open = ObstacleMap::new(0, 0);
            let mut scratch = tex.with_same_shape();
            for &dst in &targets {
                stats.writes += trace_ray(&mut scratch, &open, center, dst, center) as u64;
            }
            for &dst in &targets {
                stats.shadowed += trace_shadow_ray(&mut scratch, obstacles, center, dst) as u64;
            }
            tex.merge_max(&scratch);
        }
    }
    stats
}

/// Whether the light's rectangle overlaps the texture at all.
pub fn light_intersects(tex: &LightTexture, light: &LightSource) -> bool {
    let (x0, y0, x1, y1) = light.rect_at(tex.to_texture(light.center));
    x1 >= 0 && y1 >= 0 && x0 < tex.width as i32 && y0 < tex.height as i32
}

/// Moves every intensity by `delta`; vacated cells become 0. A shift at
/// least as large as the texture yields an all-zero texture.
pub fn displace_texture(tex: &LightTexture, delta: (i32, i32)) -> LightTexture {
    let mut out = tex.with_same_shape();
    out.offset = (tex.offset.0 + delta.0, tex.offset.1 + delta.1);
    let (w, h) = (tex.width as i64, tex.height as i64);
    let (dx, dy) = (delta.0 as i64, delta.1 as i64);
    if dx.abs() >= w || dy.abs() >= h {
        return out;
    }
    let run = (w - dx.abs()) as usize;
    let (src_x, dst_x) = if dx >= 0 { (0, dx as usize) } else { ((-dx) as usize, 0) };
    for y in 0..h {
        let ty = y + dy;
        if !(0..h).contains(&ty) {
            continue;
        }
        let src = y as usize * w as usize + src_x;
        let dst = ty as usize * w as usize + dst_x;
        out.data[dst..dst + run].copy_from_slice(&tex.data[src..src + run]);
    }
    out
}

/// Which point of a sprite is compared against a light's center row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorrectionReference {
    /// Placement row plus the vertical middle of the opaque footprint.
    #[default]
    FootprintCenter,
    /// Placement row only.
    Anchor,
}

/// Inputs of the opacity correction pass.
#[derive(Clone, Copy, Debug)]
pub struct OpacityCorrection<'a> {
    pub draw_list: &'a DrawList,
    pub atlas: &'a Atlas,
    pub reference: CorrectionReference,
}

/// Re-lights or darkens overlay sprites by their opacity maps.
///
/// For every overlay (layer > 0) in draw order and every enabled light
/// whose rectangle touches the sprite's opaque footprint: when the sprite's
/// reference row is at or below the light's center row, all of its opaque
/// cells are set to 0; lights above the reference row then raise the
/// opaque cells inside their rectangle to the distance falloff value.
/// Darkening happens before re-lighting per sprite, so the result does not
/// depend on light order. Returns the number of cells touched.
pub fn apply_opacity_correction(
    tex: &mut LightTexture,
    draw_list: &DrawList,
    atlas: &Atlas,
    lights: &[LightSource],
    reference: CorrectionReference,
) -> Result<usize> {
    let margin = tex.margin as i32;
    let mut touched = 0;
    let mut above = Vec::with_capacity(lights.len());
    for placed in draw_list.iter().filter(|p| !p.is_block()) {
        let opacity = &atlas.get(&placed.sprite_id)?.opacity;
        let (Some((r0, r1)), Some((c0, c1))) = (opacity.row_extent(), opacity.col_extent()) else {
            continue;
        };
        let ref_y = match reference {
            CorrectionReference::FootprintCenter => placed.y + ((r0 + r1) / 2) as i32,
            CorrectionReference::Anchor => placed.y,
        };
        // footprint bounds in texture space
        let ox = placed.x + margin;
        let oy = placed.y + margin;
        let (fx0, fy0, fx1, fy1) = (ox + c0 as i32, oy + r0 as i32, ox + c1 as i32, oy + r1 as i32);

        let mut darken = false;
        above.clear();
        for light in lights.iter().filter(|l| l.enabled) {
            let center = tex.to_texture(light.center);
            let (lx0, ly0, lx1, ly1) = light.rect_at(center);
            if lx1 < fx0 || lx0 > fx1 || ly1 < fy0 || ly0 > fy1 {
                continue;
            }
            if ref_y < light.center.1 {
                above.push((center, (lx0, ly0, lx1, ly1)));
            } else {
                darken = true;
            }
        }
        if !darken && above.is_empty() {
            continue;
        }

        // clip the footprint to the texture
        let ys = fy0.max(0)..=fy1.min(tex.height as i32 - 1);
        let xs = fx0.max(0)..=fx1.min(tex.width as i32 - 1);
        for ty in ys {
            let row = opacity.row((ty - oy) as u32);
            for tx in xs.clone() {
                if !row[(tx - ox) as usize] {
                    continue;
                }
                let mut value = if darken { 0 } else { tex.get(tx as u32, ty as u32) };
                for &((cx, cy), (lx0, ly0, lx1, ly1)) in &above {
                    if (lx0..=lx1).contains(&tx) && (ly0..=ly1).contains(&ty) {
                        value = value.max(intensity((tx - cx).unsigned_abs(), (ty - cy).unsigned_abs()));
                    }
                }
                tex.set(tx as u32, ty as u32, value);
                touched += 1;
            }
        }
    }
    Ok(touched)
}

/// Outcome of one [`LightRenderer::trace`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameTrace {
    pub retraced: bool,
    pub stats: TraceStats,
}

/// Owns the cached light texture and applies the retrace cadence: every
/// `update_interval` frames the texture is rebuilt, in between it is
/// displaced opposite to the camera motion.
#[derive(Clone, Debug)]
pub struct LightRenderer {
    texture: LightTexture,
    config: TraceConfig,
    primed: bool,
}

impl LightRenderer {
    pub fn new(viewport: (u32, u32), margin: u32, config: TraceConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { texture: LightTexture::for_viewport(viewport, margin)?, config, primed: false })
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    pub fn texture(&self) -> &LightTexture {
        &self.texture
    }

    pub fn is_retrace_frame(&self, frame_index: u64) -> bool {
        !self.primed || frame_index.is_multiple_of(self.config.update_interval as u64)
    }

    /// Retraces or displaces the texture for `frame_index`.
    pub fn trace(
        &mut self,
        lights: &[LightSource],
        obstacles: &ObstacleMap,
        frame_index: u64,
        camera_delta: (i32, i32),
    ) -> FrameTrace {
        if !self.is_retrace_frame(frame_index) {
            self.texture = displace_texture(&self.texture, (-camera_delta.0, -camera_delta.1));
            return FrameTrace::default();
        }
        self.texture.clear();
        let mut stats = TraceStats::default();
        for light in lights {
            if light_intersects(&self.texture, light) {
                stats += render_light(&mut self.texture, light, obstacles, &self.config);
            }
        }
        self.primed = true;
        FrameTrace { retraced: true, stats }
    }

    pub fn correct(&mut self, lights: &[LightSource], correction: &OpacityCorrection<'_>) -> Result<usize> {
        apply_opacity_correction(
            &mut self.texture,
            correction.draw_list,
            correction.atlas,
            lights,
            correction.reference,
        )
    }

    /// Full per-frame light update: trace or displace, then opacity
    /// correction on retrace frames.
    pub fn render_lights(
        &mut self,
        lights: &[LightSource],
        obstacles: &ObstacleMap,
        correction: Option<&OpacityCorrection<'_>>,
        frame_index: u64,
        camera_delta: (i32, i32),
    ) -> Result<FrameTrace> {
        let frame = self.trace(lights, obstacles, frame_index, camera_delta);
        if frame.retraced {
            if let Some(correction) = correction {
                self.correct(lights, correction)?;
            }
        }
        Ok(frame)
    }
}
