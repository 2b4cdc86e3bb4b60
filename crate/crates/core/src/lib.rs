//! Headless 2.5D lighting for procedurally generated isometric tile maps.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`procgen`] turns a text seed into a [`SceneMap`] of blocks and overlays.
//! 2. [`scene`] places the sprites in isometric screen space and composites
//!    the unlit scene in painter's order.
//! 3. [`occlusion`] estimates an obstacle map from the sprite silhouettes.
//! 4. [`lighting`] traces Bresenham rays from every light into an 8-bit
//!    light texture and corrects it with per-sprite opacity maps.
//! 5. [`shading`] blurs the texture and blends it into the scene.
//!
//! [`pipeline::Pipeline`] wires the stages together for repeated frames.

pub mod assets;
pub mod error;
pub mod lighting;
pub mod occlusion;
pub mod pipeline;
pub mod procgen;
pub mod scene;
pub mod shading;

pub use assets::{extract_opacity_map, load_sprite, synth_sprite, Atlas, OpacityMap, Raster, Sprite, SpriteKind};
pub use error::{Error, Result};
pub use lighting::{
    displace_texture, intensity, render_light, trace_ray, trace_shadow_ray, CorrectionReference, LightRenderer,
    LightSource, LightTexture, TraceConfig, TraceMode, TraceStats,
};
pub use occlusion::{build_obstacle_map, reduce_noise, BandAnchor, ObstacleMap, ObstacleParams};
pub use pipeline::{Pipeline, PipelineConfig};
pub use procgen::{generate_map, hash_seed, next_random, Palette, PrngState, SceneMap};
pub use scene::{block_screen_position, compose_scene, DrawList, IsoLayout, PlacedSprite, SceneConfig};
pub use shading::{box_blur, composite_frame, shade_fragment, write_png, ShadeParams};
