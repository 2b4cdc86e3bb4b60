//! Headless frame-time harness.
//!
//! A [`BenchScenario`] describes a map, a viewport and a set of lights that
//! orbit the viewport center one degree per frame. [`run_benchmark`] builds
//! the scene once, runs the warmup frames untimed, then times every phase of
//! each frame (trace, correction, blur, shade) and counts the work done so
//! runs can be compared independently of wall-clock noise.

use std::fs::OpenOptions;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use isolume_core::pipeline::{Pipeline, PipelineConfig, DEFAULT_MARGIN};
use isolume_core::{
    generate_map, Atlas, CorrectionReference, IsoLayout, LightSource, ObstacleParams, Palette, SceneConfig,
    ShadeParams, TraceConfig, TraceMode,
};

/// Texture cells above which a scenario is refused.
pub const MAX_TEXTURE_CELLS: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] isolume_core::Error),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Fields missing from a scenario file take their [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchScenario {
    pub name: String,
    pub seed: String,
    pub map_rows: usize,
    pub map_cols: usize,
    pub viewport: (u32, u32),
    pub light_count: u32,
    pub light_area: (u32, u32),
    pub skip: u32,
    pub update_interval: u32,
    pub blur_radius: u32,
    pub frames: u32,
    pub warmup_frames: u32,
    pub ambient_clarity: f64,
    pub margin: u32,
    pub shadow_mode: bool,
    pub parallel_shading: bool,
    /// Orbit radius in pixels; defaults to a quarter of the smaller
    /// viewport side.
    pub orbit_radius: Option<u32>,
    /// Map palette; defaults to [`Palette::standard`].
    pub palette: Option<Palette>,
}

impl Default for BenchScenario {
    /// 1280x720, two 256x256 lights, skip 2, retrace every 3 frames, blur 2,
    /// 300 timed frames.
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: "paper-demo".into(),
            map_rows: 26,
            map_cols: 11,
            viewport: (1280, 720),
            light_count: 2,
            light_area: (256, 256),
            skip: 2,
            update_interval: 3,
            blur_radius: 2,
            frames: 300,
            warmup_frames: 10,
            ambient_clarity: 0.4,
            margin: DEFAULT_MARGIN,
            shadow_mode: false,
            parallel_shading: false,
            orbit_radius: None,
            palette: None,
        }
    }
}

impl BenchScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(BenchError::InvalidScenario(msg.into()));
        if self.frames == 0 {
            return fail("frames must be at least 1");
        }
        if self.map_rows == 0 || self.map_cols == 0 {
            return fail("map must have at least one row and column");
        }
        if self.viewport.0 == 0 || self.viewport.1 == 0 {
            return fail("viewport must be nonempty");
        }
        if self.light_area.0 == 0 || self.light_area.1 == 0 {
            return fail("light half extents must be at least 1");
        }
        let cells =
            (self.viewport.0 as u64 + 2 * self.margin as u64) * (self.viewport.1 as u64 + 2 * self.margin as u64);
        if cells > MAX_TEXTURE_CELLS {
            return Err(BenchError::InvalidScenario(format!(
                "light texture of {cells} cells exceeds the {MAX_TEXTURE_CELLS} cell limit"
            )));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            scene: SceneConfig {
                layout: IsoLayout::default(),
                viewport: Some(self.viewport),
                background: [0, 0, 0, 255],
            },
            margin: self.margin,
            obstacles: ObstacleParams::default(),
            trace: TraceConfig {
                skip: self.skip,
                update_interval: self.update_interval,
                mode: if self.shadow_mode { TraceMode::Shadow } else { TraceMode::Light },
            },
            shade: ShadeParams {
                ambient_clarity: self.ambient_clarity,
                blur_radius: self.blur_radius,
                dark_outside: false,
            },
            correction: Some(CorrectionReference::FootprintCenter),
            parallel_shading: self.parallel_shading,
        }
    }

    /// Light positions for `frame`: evenly spaced on a circle around the
    /// viewport center, advancing one degree per frame.
    pub fn lights_at(&self, frame: u64) -> Vec<LightSource> {
        let (cx, cy) = (self.viewport.0 as f64 / 2.0, self.viewport.1 as f64 / 2.0);
        let radius = self.orbit_radius.unwrap_or(self.viewport.0.min(self.viewport.1) / 4) as f64;
        (0..self.light_count)
            .map(|k| {
                let degrees = (frame % 360) as f64 + 360.0 * k as f64 / self.light_count as f64;
                let (sin, cos) = degrees.to_radians().sin_cos();
                let center = ((cx + radius * cos).round() as i32, (cy + radius * sin).round() as i32);
                LightSource::new(center, self.light_area)
            })
            .collect()
    }
}

/// Mean, median and 95th percentile in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseStats {
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
}

impl PhaseStats {
    pub fn from_samples(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        us.sort_by(f64::total_cmp);
        let mean_us = us.iter().sum::<f64>() / us.len() as f64;
        let median_us =
            if us.len() % 2 == 1 { us[us.len() / 2] } else { (us[us.len() / 2 - 1] + us[us.len() / 2]) / 2.0 };
        // nearest-rank percentile
        let rank = ((0.95 * us.len() as f64).ceil() as usize).clamp(1, us.len());
        Self { mean_us, median_us, p95_us: us[rank - 1] }
    }
}

/// Deterministic work done over the timed frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WorkCounts {
    pub frames: u64,
    pub retraces: u64,
    pub rays: u64,
    pub pixel_writes: u64,
    pub shadowed: u64,
    pub correction_cells: u64,
    pub fragments: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: BenchScenario,
    pub trace: PhaseStats,
    pub correction: PhaseStats,
    pub blur: PhaseStats,
    pub shade: PhaseStats,
    pub total: PhaseStats,
    pub fps: f64,
    /// Mean trace + correction time of retrace frames.
    pub retrace_light_us: f64,
    /// Mean trace time of displacement-only frames; 0 when there were none.
    pub displace_light_us: f64,
    pub work: WorkCounts,
    pub environment: String,
}

pub fn environment_note() -> String {
    format!(
        "{} {} cpus={} profile={}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        std::thread::available_parallelism().map_or(1, |n| n.get()),
        if cfg!(debug_assertions) { "debug" } else { "release" },
    )
}

fn camera_delta(scenario: &BenchScenario, frame: u64) -> (i32, i32) {
    if frame == 0 || scenario.light_count == 0 {
        return (0, 0);
    }
    let now = scenario.lights_at(frame)[0].center;
    let before = scenario.lights_at(frame - 1)[0].center;
    (now.0 - before.0, now.1 - before.1)
}

pub fn run_benchmark(scenario: &BenchScenario) -> Result<BenchReport> {
    scenario.validate()?;
    let palette = scenario.palette.clone().unwrap_or_else(Palette::standard);
    let map = generate_map(&scenario.seed, scenario.map_rows, scenario.map_cols, &palette)?;
    let atlas = Atlas::synthetic(&scenario.seed, 0);
    let mut pipeline = Pipeline::new(map, atlas, scenario.pipeline_config())?;
    if pipeline.viewport() != scenario.viewport {
        let (w, h) = pipeline.viewport();
        return Err(BenchError::InvalidScenario(format!(
            "a {}x{} map only covers {w}x{h} of the {}x{} viewport",
            scenario.map_rows, scenario.map_cols, scenario.viewport.0, scenario.viewport.1
        )));
    }

    let mut frame = 0u64;
    for _ in 0..scenario.warmup_frames {
        let lights = scenario.lights_at(frame);
        pipeline.render_frame(&lights, frame, camera_delta(scenario, frame))?;
        frame += 1;
    }

    let n = scenario.frames as usize;
    let (mut trace, mut correction, mut blur, mut shade, mut total) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut retrace_light = Vec::new();
    let mut displace_light = Vec::new();
    let mut work = WorkCounts::default();

    for _ in 0..scenario.frames {
        let lights = scenario.lights_at(frame);
        let delta = camera_delta(scenario, frame);

        let start = Instant::now();
        let traced = pipeline.trace_phase(&lights, frame, delta);
        let t_trace = start.elapsed();

        let t0 = Instant::now();
        let cells = if traced.retraced { pipeline.correction_phase(&lights)? } else { 0 };
        let t_correct = t0.elapsed();

        let t0 = Instant::now();
        let blurred = pipeline.blur_phase();
        let t_blur = t0.elapsed();

        let t0 = Instant::now();
        let out = pipeline.shade_phase(&blurred)?;
        let t_shade = t0.elapsed();
        let t_total = start.elapsed();

        trace.push(t_trace);
        correction.push(t_correct);
        blur.push(t_blur);
        shade.push(t_shade);
        total.push(t_total);
        if traced.retraced {
            retrace_light.push(t_trace + t_correct);
        } else {
            displace_light.push(t_trace);
        }

        work.frames += 1;
        work.retraces += traced.retraced as u64;
        work.rays += traced.stats.rays;
        work.pixel_writes += traced.stats.writes;
        work.shadowed += traced.stats.shadowed;
        work.correction_cells += cells as u64;
        work.fragments += out.pixels().len() as u64;
        frame += 1;
    }

    let mean_us = |s: &[Duration]| PhaseStats::from_samples(s).mean_us;
    let total = PhaseStats::from_samples(&total);
    Ok(BenchReport {
        scenario: scenario.clone(),
        trace: PhaseStats::from_samples(&trace),
        correction: PhaseStats::from_samples(&correction),
        blur: PhaseStats::from_samples(&blur),
        shade: PhaseStats::from_samples(&shade),
        fps: if total.mean_us > 0.0 { 1e6 / total.mean_us } else { f64::INFINITY },
        total,
        retrace_light_us: mean_us(&retrace_light),
        displace_light_us: mean_us(&displace_light),
        work,
        environment: environment_note(),
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    seed: &'a str,
    map_rows: usize,
    map_cols: usize,
    viewport_w: u32,
    viewport_h: u32,
    light_count: u32,
    light_a: u32,
    light_b: u32,
    skip: u32,
    update_interval: u32,
    blur_radius: u32,
    frames: u32,
    warmup_frames: u32,
    trace_mean_us: String,
    correction_mean_us: String,
    blur_mean_us: String,
    shade_mean_us: String,
    total_mean_us: String,
    trace_p95_us: String,
    correction_p95_us: String,
    blur_p95_us: String,
    shade_p95_us: String,
    total_p95_us: String,
    total_median_us: String,
    fps: String,
    rays: u64,
    pixel_writes: u64,
    fragments: u64,
    environment: &'a str,
}

fn fixed(v: f64) -> String {
    format!("{v:.3}")
}

impl<'a> From<&'a BenchReport> for CsvRow<'a> {
    fn from(r: &'a BenchReport) -> Self {
        let s = &r.scenario;
        Self {
            name: &s.name,
            seed: &s.seed,
            map_rows: s.map_rows,
            map_cols: s.map_cols,
            viewport_w: s.viewport.0,
            viewport_h: s.viewport.1,
            light_count: s.light_count,
            light_a: s.light_area.0,
            light_b: s.light_area.1,
            skip: s.skip,
            update_interval: s.update_interval,
            blur_radius: s.blur_radius,
            frames: s.frames,
            warmup_frames: s.warmup_frames,
            trace_mean_us: fixed(r.trace.mean_us),
            correction_mean_us: fixed(r.correction.mean_us),
            blur_mean_us: fixed(r.blur.mean_us),
            shade_mean_us: fixed(r.shade.mean_us),
            total_mean_us: fixed(r.total.mean_us),
            trace_p95_us: fixed(r.trace.p95_us),
            correction_p95_us: fixed(r.correction.p95_us),
            blur_p95_us: fixed(r.blur.p95_us),
            shade_p95_us: fixed(r.shade.p95_us),
            total_p95_us: fixed(r.total.p95_us),
            total_median_us: fixed(r.total.median_us),
            fps: fixed(r.fps),
            rays: r.work.rays,
            pixel_writes: r.work.pixel_writes,
            fragments: r.work.fragments,
            environment: &r.environment,
        }
    }
}

/// Writes one header row and one row per report. With `append`, rows are
/// added to an existing file and the header is only written if the file
/// was empty.
pub fn write_csv(reports: &[BenchReport], path: impl AsRef<Path>, append: bool) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| BenchError::Io { path: path.display().to_string(), source };
    let existing = append && path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    let file =
        OpenOptions::new().create(true).write(true).append(append).truncate(!append).open(path).map_err(io_err)?;
    let mut writer = csv::WriterBuilder::new().has_headers(!existing).from_writer(file);
    for report in reports {
        writer.serialize(CsvRow::from(report))?;
    }
    writer.flush().map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let samples: Vec<Duration> = (1..=20).map(Duration::from_micros).collect();
        let s = PhaseStats::from_samples(&samples);
        assert!((s.mean_us - 10.5).abs() < 1e-9);
        assert!((s.median_us - 10.5).abs() < 1e-9);
        assert!((s.p95_us - 19.0).abs() < 1e-9);
        assert_eq!(PhaseStats::from_samples(&[]), PhaseStats::default());
    }

    #[test]
    fn orbit_is_one_degree_per_frame() {
        let s = BenchScenario { viewport: (400, 400), light_count: 2, ..Default::default() };
        let l0 = s.lights_at(0);
        assert_eq!(l0[0].center, (300, 200));
        assert_eq!(l0[1].center, (100, 200));
        assert_eq!(s.lights_at(90)[0].center, (200, 300));
        assert_eq!(s.lights_at(360)[0].center, l0[0].center);
    }

    #[test]
    fn scenario_validation() {
        assert!(BenchScenario::default().validate().is_ok());
        assert!(BenchScenario { frames: 0, ..Default::default() }.validate().is_err());
        assert!(BenchScenario { viewport: (100_000, 100_000), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn scenario_json_defaults() {
        let s = BenchScenario::from_json(
            r#"{"seed":"s","map_rows":4,"map_cols":3,"viewport":[64,48],"light_count":1,
                "light_area":[8,8],"skip":1,"update_interval":2,"blur_radius":1,"frames":3}"#,
        )
        .unwrap();
        assert_eq!(s.name, "default");
        assert_eq!(s.margin, DEFAULT_MARGIN);
        assert_eq!(s.warmup_frames, 10);
        assert!(s.palette.is_none());
        assert_eq!(BenchScenario::from_json("{}").unwrap(), BenchScenario::default());
        assert!(BenchScenario::from_json(r#"{"frame":3}"#).is_err());
    }
}
