//! `isolume`: generate maps, render lit frames and animations, inspect the
//! intermediate buffers and run the frame-time harness.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use isolume_bench::{run_benchmark, write_csv, BenchScenario};
use isolume_core::pipeline::{overlay_onto, Pipeline, PipelineConfig, DEFAULT_LIGHT_AREA};
use isolume_core::shading::write_gray_png;
use isolume_core::{
    generate_map, Atlas, BandAnchor, CorrectionReference, IsoLayout, LightSource, ObstacleParams, Palette, SceneConfig,
    SceneMap, ShadeParams, TraceConfig, TraceMode,
};

use args::{parse_cells, parse_lights, parse_pair, parse_size, parse_viewport};

#[derive(Debug, Parser)]
#[command(name = "isolume", version, about = "Headless 2.5D isometric lighting renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a map from a seed and write it as JSON.
    Generate(GenerateArgs),
    /// Render one lit frame to a PNG.
    Render(RenderArgs),
    /// Render a numbered PNG sequence with a moving light.
    Animate(AnimateArgs),
    /// Run the frame-time harness on a scenario file.
    Bench(BenchArgs),
    /// Dump an intermediate buffer.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: String,
    /// Map size as ROWSxCOLS.
    #[arg(long, value_parser = parse_size, default_value = "26x11")]
    size: (usize, usize),
    /// Palette JSON; the built-in palette when omitted.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where the map comes from and how the scene is laid out and lit.
#[derive(Debug, Args)]
struct SceneArgs {
    /// Generate the map from this seed.
    #[arg(long, conflicts_with = "map", required_unless_present = "map")]
    seed: Option<String>,
    /// Load a map JSON written by `generate`.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Size of the generated map as ROWSxCOLS.
    #[arg(long, value_parser = parse_size, default_value = "26x11")]
    size: (usize, usize),
    /// Palette JSON for generated maps.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Sprite directory; synthetic sprites when omitted.
    #[arg(long, env = "ISOLUME_ATLAS")]
    atlas: Option<PathBuf>,
    /// Alpha values above this count as opaque.
    #[arg(long, default_value_t = 0)]
    alpha_threshold: u8,
    /// Cells that get a character overlay, as "r,c;r,c".
    #[arg(long, value_parser = parse_cells)]
    characters: Option<::std::vec::Vec<(usize, usize)>>,
    /// Viewport as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_viewport, default_value = "1280x720")]
    viewport: (u32, u32),
    /// Screen position of cell (0, 0) as X,Y.
    #[arg(long, value_parser = parse_pair::<i32>, default_value = "0,0", allow_hyphen_values = true)]
    origin: (i32, i32),
    /// Light texture margin around the viewport.
    #[arg(long, default_value_t = 128)]
    margin: u32,
    /// Rows of the obstacle band.
    #[arg(long, default_value_t = 25)]
    delta_y: u32,
    /// Where the obstacle band starts.
    #[arg(long, value_enum, default_value_t = BandArg::FirstOpaqueRow)]
    band_anchor: BandArg,
    /// Window of the obstacle noise filter.
    #[arg(long, default_value_t = 3)]
    noise_window: u32,
    /// Trace every SKIP-th border pixel.
    #[arg(long, default_value_t = 2)]
    skip: u32,
    /// Stop rays at obstacles by zeroing instead of halting.
    #[arg(long)]
    shadow_mode: bool,
    /// Skip the opacity correction pass.
    #[arg(long)]
    no_correction: bool,
    /// Reference point used to decide which side of an overlay is lit.
    #[arg(long, value_enum, default_value_t = ReferenceArg::Footprint)]
    correction_ref: ReferenceArg,
    /// Ambient clarity in [0, 1].
    #[arg(long, default_value_t = 0.4)]
    ambient: f64,
    /// Box blur radius applied to the light texture.
    #[arg(long, default_value_t = 2)]
    blur: u32,
    /// Scale the unlit scene by the light value.
    #[arg(long)]
    dark_outside: bool,
    /// Lights as "x,y,a,b;x,y,a,b" in screen pixels; "x,y" uses 256x256.
    #[arg(long, value_parser = parse_lights, conflicts_with = "no_lights", allow_hyphen_values = true)]
    lights: Option<::std::vec::Vec<LightSource>>,
    /// Render with no light sources.
    #[arg(long)]
    no_lights: bool,
    /// Shade on N worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BandArg {
    FirstOpaqueRow,
    TopEdge,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceArg {
    Footprint,
    Anchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RenderInspect {
    Obstacles,
    Opacity,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Draw an overlay over the unlit scene instead of the lit frame.
    #[arg(long, value_enum)]
    inspect: Option<RenderInspect>,
    /// Output PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnimateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Path of the moving light as "x0,y0;x1,y1", walked linearly.
    #[arg(long, value_parser = parse_lights, allow_hyphen_values = true)]
    path: Option<::std::vec::Vec<LightSource>>,
    /// Half extents of the moving light as A,B.
    #[arg(long, value_parser = parse_pair::<u32>)]
    light_area: Option<(u32, u32)>,
    #[arg(long, default_value_t = 30)]
    frames: u32,
    /// Retrace every INTERVAL frames.
    #[arg(long, default_value_t = 3)]
    interval: u32,
    /// Camera motion per frame as DX,DY.
    #[arg(long, value_parser = parse_pair::<i32>, default_value = "0,0", allow_hyphen_values = true)]
    camera_delta: (i32, i32),
    /// Also write the light texture of every frame.
    #[arg(long)]
    lighttex: bool,
    /// Directory for the frame PNGs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Scenario JSON; the default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// CSV file for the summary row.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append to an existing CSV instead of replacing it.
    #[arg(long)]
    append: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InspectKind {
    Obstacles,
    Lighttex,
    Opacity,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(value_enum)]
    kind: InspectKind,
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain joined with ": ", skipping causes whose text the
/// previous message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    let mut last = text.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            text.push_str(": ");
            text.push_str(&msg);
        }
        last = msg;
    }
    text
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Render(args) => cmd_render(args),
        Command::Animate(args) => cmd_animate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn load_palette(path: Option<&Path>) -> Result<Palette> {
    match path {
        Some(p) => Palette::load(p).with_context(|| format!("loading palette {}", p.display())),
        None => Ok(Palette::standard()),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let palette = load_palette(args.palette.as_deref())?;
    let map = generate_map(&args.seed, args.size.0, args.size.1, &palette)?;
    let json = map.to_json();
    match args.out {
        Some(path) => fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

impl SceneArgs {
    fn load_map(&self) -> Result<SceneMap> {
        let mut map = match (&self.map, &self.seed) {
            (Some(path), _) => SceneMap::load(path).with_context(|| format!("loading map {}", path.display()))?,
            (None, Some(seed)) => {
                generate_map(seed, self.size.0, self.size.1, &load_palette(self.palette.as_deref())?)?
            }
            (None, None) => bail!("either --seed or --map is required"),
        };
        for &(r, c) in self.characters.iter().flatten() {
            if r >= map.rows || c >= map.cols {
                bail!("character cell ({r}, {c}) is outside the {}x{} map", map.rows, map.cols);
            }
            map.cells[r][c].overlays.push("character".into());
        }
        Ok(map)
    }

    fn atlas(&self, seed: &str) -> Result<Atlas> {
        match &self.atlas {
            Some(dir) => {
                Atlas::load_dir(dir, self.alpha_threshold).with_context(|| format!("loading atlas {}", dir.display()))
            }
            None => Ok(Atlas::synthetic(seed, self.alpha_threshold)),
        }
    }

    fn config(&self, interval: u32) -> PipelineConfig {
        PipelineConfig {
            scene: SceneConfig {
                layout: IsoLayout { origin: self.origin, ..IsoLayout::default() },
                viewport: Some(self.viewport),
                ..SceneConfig::default()
            },
            margin: self.margin,
            obstacles: ObstacleParams {
                delta_y: self.delta_y,
                band_anchor: match self.band_anchor {
                    BandArg::FirstOpaqueRow => BandAnchor::FirstOpaqueRow,
                    BandArg::TopEdge => BandAnchor::TopEdge,
                },
                noise_window: self.noise_window,
            },
            trace: TraceConfig {
                skip: self.skip,
                update_interval: interval,
                mode: if self.shadow_mode { TraceMode::Shadow } else { TraceMode::Light },
            },
            shade: ShadeParams {
                ambient_clarity: self.ambient,
                blur_radius: self.blur,
                dark_outside: self.dark_outside,
            },
            correction: (!self.no_correction).then_some(match self.correction_ref {
                ReferenceArg::Footprint => CorrectionReference::FootprintCenter,
                ReferenceArg::Anchor => CorrectionReference::Anchor,
            }),
            parallel_shading: self.threads.is_some_and(|n| n > 1),
        }
    }

    fn pipeline(&self, interval: u32) -> Result<Pipeline> {
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let map = self.load_map()?;
        let atlas = self.atlas(&map.seed_string)?;
        Ok(Pipeline::new(map, atlas, self.config(interval))?)
    }

    /// Explicit lights, or one light at the feet of every character, or a
    /// single light in the middle of the viewport.
    fn lights(&self, pipeline: &Pipeline) -> Result<Vec<LightSource>> {
        if self.no_lights {
            return Ok(Vec::new());
        }
        if let Some(lights) = &self.lights {
            return Ok(lights.clone());
        }
        let mut lights = Vec::new();
        for placed in pipeline.draw_list().iter().filter(|p| p.sprite_id == "character") {
            let opacity = &pipeline.atlas().get(&placed.sprite_id)?.opacity;
            if let (Some((_, r1)), Some((c0, c1))) = (opacity.row_extent(), opacity.col_extent()) {
                let center = (placed.x + ((c0 + c1) / 2) as i32, placed.y + r1 as i32);
                lights.push(LightSource::new(center, DEFAULT_LIGHT_AREA));
            }
        }
        if lights.is_empty() {
            let (w, h) = pipeline.viewport();
            lights.push(LightSource::new(((w / 2) as i32, (h / 2) as i32), DEFAULT_LIGHT_AREA));
        }
        Ok(lights)
    }
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let mut pipeline = args.scene.pipeline(1)?;
    let frame = match args.inspect {
        Some(RenderInspect::Obstacles) => overlay_onto(pipeline.scene(), &pipeline.obstacle_overlay()),
        Some(RenderInspect::Opacity) => overlay_onto(pipeline.scene(), &pipeline.opacity_overlay()?),
        None => {
            let lights = args.scene.lights(&pipeline)?;
            pipeline.render_frame(&lights, 0, (0, 0))?.0
        }
    };
    isolume_core::write_png(&frame, &args.out).with_context(|| format!("writing {}", args.out.display()))
}

fn cmd_animate(args: AnimateArgs) -> Result<()> {
    if args.frames == 0 {
        bail!("--frames must be at least 1");
    }
    let mut pipeline = args.scene.pipeline(args.interval)?;
    let statics = if args.scene.lights.is_some() { args.scene.lights(&pipeline)? } else { Vec::new() };
    let area = args.light_area.unwrap_or(DEFAULT_LIGHT_AREA);
    let (start, end) = match args.path.as_deref().unwrap_or_default() {
        [] => {
            let (w, h) = pipeline.viewport();
            let c = ((w / 2) as i32, (h / 2) as i32);
            (c, c)
        }
        [p] => (p.center, p.center),
        [p, q] => (p.center, q.center),
        _ => bail!("--path takes one or two points"),
    };
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let steps = (args.frames - 1).max(1) as f64;
    for f in 0..args.frames {
        let t = f as f64 / steps;
        let lerp = |a: i32, b: i32| (a as f64 + (b - a) as f64 * t).round() as i32;
        let mut lights = vec![LightSource::new((lerp(start.0, end.0), lerp(start.1, end.1)), area)];
        lights.extend_from_slice(&statics);
        let delta = if f == 0 { (0, 0) } else { args.camera_delta };

        let (frame, trace) = pipeline.render_frame(&lights, f as u64, delta)?;
        let path = args.out_dir.join(format!("frame_{f:04}.png"));
        isolume_core::write_png(&frame, &path).with_context(|| format!("writing {}", path.display()))?;
        if args.lighttex {
            let path = args.out_dir.join(format!("lighttex_{f:04}.png"));
            write_gray_png(pipeline.light_texture(), &path).with_context(|| format!("writing {}", path.display()))?;
        }
        println!(
            "frame {f:04} {} rays={} writes={}",
            if trace.retraced { "retrace" } else { "displace" },
            trace.stats.rays,
            trace.stats.writes
        );
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            BenchScenario::from_json(&text)?
        }
        None => BenchScenario::default(),
    };
    let report = run_benchmark(&scenario)?;
    if let Some(out) = &args.out {
        write_csv(std::slice::from_ref(&report), out, args.append)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let mut pipeline = args.scene.pipeline(1)?;
    let out = &args.out;
    let written = match args.kind {
        InspectKind::Obstacles => {
            isolume_core::write_png(&overlay_onto(pipeline.scene(), &pipeline.obstacle_overlay()), out)
        }
        InspectKind::Opacity => {
            isolume_core::write_png(&overlay_onto(pipeline.scene(), &pipeline.opacity_overlay()?), out)
        }
        InspectKind::Lighttex => {
            let lights = args.scene.lights(&pipeline)?;
            pipeline.update_lights(&lights, 0, (0, 0))?;
            write_gray_png(pipeline.light_texture(), out)
        }
    };
    written.with_context(|| format!("writing {}", out.display()))
}
