//! End-to-end frame rendering: compose once, trace lights per frame, shade.

use crate::assets::{Atlas, Raster};
use crate::error::Result;
use crate::lighting::{
    CorrectionReference, FrameTrace, LightRenderer, LightSource, LightTexture, OpacityCorrection, TraceConfig,
};
use crate::occlusion::{build_obstacle_map, reduce_noise, ObstacleMap, ObstacleParams};
use crate::procgen::SceneMap;
use crate::scene::{blit, compose_scene, DrawList, SceneConfig};
use crate::shading::{box_blur, composite_frame, composite_frame_par, ShadeParams};

pub const DEFAULT_VIEWPORT: (u32, u32) = (1280, 720);
pub const DEFAULT_MARGIN: u32 = 128;
pub const DEFAULT_LIGHT_AREA: (u32, u32) = (256, 256);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    pub margin: u32,
    pub obstacles: ObstacleParams,
    pub trace: TraceConfig,
    pub shade: ShadeParams,
    /// `None` skips the opacity correction pass.
    pub correction: Option<CorrectionReference>,
    /// Shade rows on the rayon pool.
    pub parallel_shading: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig { viewport: Some(DEFAULT_VIEWPORT), ..SceneConfig::default() },
            margin: DEFAULT_MARGIN,
            obstacles: ObstacleParams::default(),
            trace: TraceConfig::default(),
            shade: ShadeParams::default(),
            correction: Some(CorrectionReference::FootprintCenter),
            parallel_shading: false,
        }
    }
}

/// A loaded map: the composed scene and its cached obstacle map, plus the
/// light renderer that carries the texture between frames.
#[derive(Debug)]
pub struct Pipeline {
    map: SceneMap,
    atlas: Atlas,
    draw_list: DrawList,
    scene: Raster,
    obstacles: ObstacleMap,
    renderer: LightRenderer,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(map: SceneMap, atlas: Atlas, config: PipelineConfig) -> Result<Self> {
        config.trace.validate()?;
        config.shade.validate()?;
        let (draw_list, scene) = compose_scene(&map, &atlas, &config.scene)?;
        let viewport = (scene.width(), scene.height());
        let renderer = LightRenderer::new(viewport, config.margin, config.trace)?;
        let size = (renderer.texture().width(), renderer.texture().height());
        let m = config.margin as i32;
        let raw = build_obstacle_map(&draw_list, &atlas, &config.obstacles, size, (m, m))?;
        let obstacles = reduce_noise(&raw, config.obstacles.noise_window);
        Ok(Self { map, atlas, draw_list, scene, obstacles, renderer, config })
    }

    pub fn map(&self) -> &SceneMap {
        &self.map
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn draw_list(&self) -> &DrawList {
        &self.draw_list
    }

    pub fn scene(&self) -> &Raster {
        &self.scene
    }

    pub fn obstacles(&self) -> &ObstacleMap {
        &self.obstacles
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn viewport(&self) -> (u32, u32) {
        (self.scene.width(), self.scene.height())
    }

    pub fn light_texture(&self) -> &LightTexture {
        self.renderer.texture()
    }

    /// Retrace or displacement step only.
    pub fn trace_phase(&mut self, lights: &[LightSource], frame_index: u64, camera_delta: (i32, i32)) -> FrameTrace {
        self.renderer.trace(lights, &self.obstacles, frame_index, camera_delta)
    }

    /// Opacity correction; a no-op when disabled. Returns cells touched.
    pub fn correction_phase(&mut self, lights: &[LightSource]) -> Result<usize> {
        let Some(reference) = self.config.correction else {
            return Ok(0);
        };
        let correction = OpacityCorrection { draw_list: &self.draw_list, atlas: &self.atlas, reference };
        self.renderer.correct(lights, &correction)
    }

    pub fn blur_phase(&self) -> LightTexture {
        box_blur(self.renderer.texture(), self.config.shade.blur_radius)
    }

    /// Shades the scene with an already blurred texture.
    pub fn shade_phase(&self, blurred: &LightTexture) -> Result<Raster> {
        let params = ShadeParams { blur_radius: 0, ..self.config.shade };
        if self.config.parallel_shading {
            composite_frame_par(&self.scene, blurred, &params)
        } else {
            composite_frame(&self.scene, blurred, &params)
        }
    }

    /// Updates the light texture for `frame_index` (correction only runs on
    /// retrace frames).
    pub fn update_lights(
        &mut self,
        lights: &[LightSource],
        frame_index: u64,
        camera_delta: (i32, i32),
    ) -> Result<FrameTrace> {
        let frame = self.trace_phase(lights, frame_index, camera_delta);
        if frame.retraced {
            self.correction_phase(lights)?;
        }
        Ok(frame)
    }

    pub fn render_frame(
        &mut self,
        lights: &[LightSource],
        frame_index: u64,
        camera_delta: (i32, i32),
    ) -> Result<(Raster, FrameTrace)> {
        let frame = self.update_lights(lights, frame_index, camera_delta)?;
        let blurred = self.blur_phase();
        Ok((self.shade_phase(&blurred)?, frame))
    }

    /// Obstacle cells inside the viewport as white on transparent.
    pub fn obstacle_overlay(&self) -> Raster {
        let (w, h) = self.viewport();
        let m = self.config.margin;
        let mut out = Raster::filled(w, h, [0; 4]).expect("viewport is nonempty");
        for (x, y) in self.obstacles.iter_blocked() {
            if x >= m && y >= m && x - m < w && y - m < h {
                out.set(x - m, y - m, [255; 4]);
            }
        }
        out
    }

    /// Opacity maps of all overlays in screen space as white on transparent.
    pub fn opacity_overlay(&self) -> Result<Raster> {
        let (w, h) = self.viewport();
        let mut out = Raster::filled(w, h, [0; 4])?;
        for placed in self.draw_list.iter().filter(|p| !p.is_block()) {
            let opacity = &self.atlas.get(&placed.sprite_id)?.opacity;
            for sy in 0..opacity.height() {
                for sx in 0..opacity.width() {
                    let (x, y) = (placed.x + sx as i32, placed.y + sy as i32);
                    if opacity.is_opaque(sx, sy) && x >= 0 && y >= 0 && (x as u32) < w && (y as u32) < h {
                        out.set(x as u32, y as u32, [255; 4]);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `overlay` alpha-composited over a copy of `base`.
pub fn overlay_onto(base: &Raster, overlay: &Raster) -> Raster {
    let mut out = base.clone();
    blit(&mut out, overlay, 0, 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procgen::{generate_map, Palette};

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            scene: SceneConfig { viewport: Some((320, 240)), ..Default::default() },
            margin: 32,
            ..Default::default()
        }
    }

    fn pipeline(config: PipelineConfig) -> Pipeline {
        let map = generate_map("paper-demo", 10, 4, &Palette::standard()).unwrap();
        Pipeline::new(map, Atlas::synthetic("paper-demo", 0), config).unwrap()
    }

    #[test]
    fn obstacles_live_in_texture_space() {
        let p = pipeline(small_config());
        assert_eq!(p.viewport(), (320, 240));
        assert_eq!((p.obstacles().width(), p.obstacles().height()), (384, 304));
        assert!(p.obstacles().count() > 0);
    }

    #[test]
    fn frame_without_lights_at_full_ambient_is_the_scene() {
        let mut config = small_config();
        config.shade.ambient_clarity = 1.0;
        let mut p = pipeline(config);
        let (frame, trace) = p.render_frame(&[], 0, (0, 0)).unwrap();
        assert!(trace.retraced);
        assert_eq!(&frame, p.scene());
    }

    #[test]
    fn lights_brighten_the_frame() {
        let mut p = pipeline(small_config());
        let (dark, _) = p.render_frame(&[], 0, (0, 0)).unwrap();
        let (lit, trace) = p.render_frame(&[LightSource::new((160, 120), (64, 64))], 0, (0, 0)).unwrap();
        assert!(trace.stats.rays > 0);
        let sum = |r: &Raster| r.pixels().iter().map(|p| p[0] as u64 + p[1] as u64 + p[2] as u64).sum::<u64>();
        assert!(sum(&lit) > sum(&dark));
    }

    #[test]
    fn overlays_have_viewport_size() {
        let p = pipeline(small_config());
        let obstacles = p.obstacle_overlay();
        assert_eq!((obstacles.width(), obstacles.height()), (320, 240));
        assert!(obstacles.pixels().iter().any(|p| p[3] == 255));
        let opacity = p.opacity_overlay().unwrap();
        assert!(opacity.pixels().iter().any(|p| p[3] == 255));
        let composed = overlay_onto(p.scene(), &obstacles);
        assert_eq!((composed.width(), composed.height()), (320, 240));
    }
}
