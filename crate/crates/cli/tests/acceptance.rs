//! Acceptance checks, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::Command;
use std::time::Instant;

use isolume_bench::{run_benchmark, BenchScenario};
use isolume_core::lighting::{apply_opacity_correction, border_targets, trace_ray_with, RayWalk};
use isolume_core::pipeline::{Pipeline, PipelineConfig};
use isolume_core::procgen::Prng;
use isolume_core::{
    box_blur, build_obstacle_map, compose_scene, composite_frame, generate_map, intensity, render_light, Atlas,
    CorrectionReference, DrawList, LightSource, LightTexture, ObstacleMap, ObstacleParams, Palette, PlacedSprite,
    SceneConfig, ShadeParams, TraceConfig, TraceMode,
};

const ORACLE_TIME_LIMIT_MS: u128 = 1000;
const HALTING_TRIALS: usize = 200;
const PERMUTATIONS: usize = 10;
const FRAME_BUDGET_US: f64 = 33_000.0;
const DISPLACE_COST_RATIO: f64 = 0.20;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Textbook integer Bresenham over all octants. The decision variable
/// starts at 2*minor - major; a zero decision steps the minor axis, and a
/// tie between the axes walks the vertical axis.
fn bresenham_oracle(dst: (i32, i32)) -> Vec<(i32, i32)> {
    let (dx, dy) = dst;
    let (sx, sy) = (dx.signum(), dy.signum());
    let (ax, ay) = (dx.abs(), dy.abs());
    let y_major = ay >= ax;
    let (major, minor) = if y_major { (ay, ax) } else { (ax, ay) };
    let mut d = 2 * minor - major;
    let (mut p, mut q) = (0, 0);
    let mut out = vec![(0, 0)];
    for _ in 0..major {
        if d >= 0 {
            q += 1;
            d -= 2 * major;
        }
        d += 2 * minor;
        p += 1;
        out.push(if y_major { (q * sx, p * sy) } else { (p * sx, q * sy) });
    }
    out
}

fn c1_bresenham() -> Outcome {
    let start = Instant::now();
    let open = ObstacleMap::new(64, 64);
    let origin = (32, 32);
    let mut cases = 0;
    for dy in -20..=20 {
        for dx in -20..=20 {
            let mut tex = LightTexture::new(64, 64, 0);
            let mut visits = Vec::new();
            trace_ray_with(&mut tex, &open, origin, (32 + dx, 32 + dy), origin, |x, y| visits.push((x - 32, y - 32)));
            let expected = bresenham_oracle((dx, dy));
            check(visits == expected, format!("destination ({dx}, {dy}): {visits:?} != {expected:?}"))?;
            cases += 1;
        }
    }
    let ms = start.elapsed().as_millis();
    check(cases == 1681, format!("{cases} cases"))?;
    check(ms < ORACLE_TIME_LIMIT_MS, format!("took {ms} ms"))?;
    Ok(format!("{cases}/1681 destinations match in {ms} ms"))
}

fn c2_intensity() -> Outcome {
    let got = [intensity(0, 0), intensity(10, 4), intensity(254, 0)];
    // floor(255 / (1 + max)) computed independently
    let expected = [0u32, 10, 254].map(|d| (255 / (1 + d)) as u8);
    check(got == expected && expected == [255, 23, 1], format!("{got:?} != {expected:?}"))?;
    Ok("i(0,0)=255, i(10,4)=23, i(254,0)=1".into())
}

fn c3_halting() -> Outcome {
    let mut rng = Prng::from_seed("acceptance/halting");
    let mut rays = 0usize;
    for trial in 0..HALTING_TRIALS {
        let (w, h) = (48 + (rng.next_u64() % 48) as u32, 48 + (rng.next_u64() % 48) as u32);
        let density = 1 + rng.next_u64() % 30;
        let mut obstacles = ObstacleMap::new(w, h);
        for y in 0..h {
            for x in 0..w {
                if rng.next_u64() % 100 < density {
                    obstacles.set_blocked(x as i64, y as i64);
                }
            }
        }
        let center = ((rng.next_u64() % w as u64) as i32, (rng.next_u64() % h as u64) as i32);
        let area = (1 + (rng.next_u64() % 40) as u32, 1 + (rng.next_u64() % 40) as u32);
        let skip = 1 + (rng.next_u64() % 3) as u32;
        let mut tex = LightTexture::new(w, h, 0);
        for dst in border_targets(center, area, skip) {
            let mut lit = Vec::new();
            trace_ray_with(&mut tex, &obstacles, center, dst, center, |x, y| lit.push((x, y)));
            let walk: Vec<(i32, i32)> = RayWalk::new(center, dst).collect();
            let stop = walk
                .iter()
                .position(|&(x, y)| x < 0 || y < 0 || x >= w as i32 || y >= h as i32 || obstacles.is_blocked(x, y))
                .unwrap_or(walk.len());
            check(lit == walk[..stop], format!("trial {trial}: ray to {dst:?} lit past its first blocked pixel"))?;
            rays += 1;
        }
        for (x, y) in obstacles.iter_blocked() {
            check(tex.get(x, y) == 0, format!("trial {trial}: obstacle ({x}, {y}) lit"))?;
        }
    }
    Ok(format!("{HALTING_TRIALS} maps, {rays} rays, nothing lit beyond an obstacle"))
}

fn c4_opacity_correction() -> Outcome {
    let atlas = Atlas::synthetic("acceptance", 0);
    let extents = |id: &str| {
        let op = &atlas.get(id).unwrap().opacity;
        (op.row_extent().unwrap(), op.col_extent().unwrap())
    };
    let ((tr0, tr1), (tc0, tc1)) = extents("tree");
    let ((br0, _), (bc0, bc1)) = extents("bush");

    let tree = (120, 60);
    let light_x = tree.0 + ((tc0 + tc1) / 2) as i32;
    let light_y = tree.1 + ((tr0 + tr1) / 2) as i32 + 8;
    check(light_y > tree.1 + tr0 as i32 && light_y < tree.1 + tr1 as i32, "light row does not cut the tree")?;
    // bush footprint entirely below the light row
    let bush = (light_x - ((bc0 + bc1) / 2) as i32, light_y + 4 - br0 as i32);

    let placed = |id: &str, (x, y): (i32, i32), cell| PlacedSprite { sprite_id: id.into(), x, y, layer: 1, cell };
    let draw_list = DrawList::new(vec![placed("tree", tree, (0, 0)), placed("bush", bush, (1, 0))]);
    let margin = 64;
    let mut tex = LightTexture::for_viewport((400, 400), margin).unwrap();
    let size = (tex.width(), tex.height());
    let obstacles =
        build_obstacle_map(&draw_list, &atlas, &ObstacleParams::default(), size, (margin as i32, margin as i32))
            .map_err(|e| e.to_string())?;
    let light = LightSource::new((light_x, light_y), (96, 96));
    render_light(&mut tex, &light, &obstacles, &TraceConfig::default());

    let cells = |id: &str, (x, y): (i32, i32)| -> Vec<(u32, u32)> {
        let op = &atlas.get(id).unwrap().opacity;
        let mut out = Vec::new();
        for sy in 0..op.height() {
            for sx in 0..op.width() {
                let (tx, ty) = (x + sx as i32 + margin as i32, y + sy as i32 + margin as i32);
                let inside = (light_x - 96..=light_x + 96).contains(&(tx - margin as i32))
                    && (light_y - 96..=light_y + 96).contains(&(ty - margin as i32));
                if op.is_opaque(sx, sy) && inside {
                    out.push((tx as u32, ty as u32));
                }
            }
        }
        out
    };
    let bush_cells = cells("bush", bush);
    let tree_cells = cells("tree", tree);
    let lit_bush_before = bush_cells.iter().filter(|&&(x, y)| tex.get(x, y) > 0).count();
    let shadowed_tree: Vec<(u32, u32)> = tree_cells.iter().copied().filter(|&(x, y)| tex.get(x, y) == 0).collect();
    check(lit_bush_before > 0, "bush was not half lit before correction")?;
    check(!shadowed_tree.is_empty(), "tree had no shadowed cells before correction")?;

    apply_opacity_correction(&mut tex, &draw_list, &atlas, &[light], CorrectionReference::FootprintCenter)
        .map_err(|e| e.to_string())?;
    let lit_bush_after = bush_cells.iter().filter(|&&(x, y)| tex.get(x, y) > 0).count();
    let relit = shadowed_tree.iter().filter(|&&(x, y)| tex.get(x, y) > 0).count();
    check(lit_bush_after == 0, format!("{lit_bush_after} bush cells still lit"))?;
    check(relit > 0, "no shadowed tree cell was re-lit")?;
    Ok(format!("bush {lit_bush_before} -> 0 lit cells, {relit}/{} shadowed tree cells re-lit", shadowed_tree.len()))
}

fn c5_shading_identity() -> Outcome {
    let map = generate_map("paper-demo", 26, 11, &Palette::standard()).map_err(|e| e.to_string())?;
    let atlas = Atlas::synthetic("paper-demo", 0);
    let config = SceneConfig { viewport: Some((1280, 720)), ..Default::default() };
    let (_, scene) = compose_scene(&map, &atlas, &config).map_err(|e| e.to_string())?;
    let tex = LightTexture::for_viewport((scene.width(), scene.height()), 128).unwrap();
    for blur_radius in [0, 2] {
        let params = ShadeParams { ambient_clarity: 1.0, blur_radius, dark_outside: false };
        let out = composite_frame(&scene, &tex, &params).map_err(|e| e.to_string())?;
        check(out.as_bytes() == scene.as_bytes(), format!("frame differs from scene at blur {blur_radius}"))?;
    }
    Ok(format!("{}x{} frame byte-equal to the scene", scene.width(), scene.height()))
}

fn c6_order_invariance() -> Outcome {
    let mut rng = Prng::from_seed("acceptance/order");
    let map = generate_map("paper-demo", 26, 11, &Palette::standard()).map_err(|e| e.to_string())?;
    let lights: Vec<LightSource> = (0..4)
        .map(|_| {
            let c = ((rng.next_u64() % 1280) as i32, (rng.next_u64() % 720) as i32);
            LightSource::new(c, (64 + (rng.next_u64() % 192) as u32, 64 + (rng.next_u64() % 192) as u32))
        })
        .collect();
    let mut checked = 0;
    for mode in [TraceMode::Light, TraceMode::Shadow] {
        let config = PipelineConfig { trace: TraceConfig { mode, ..Default::default() }, ..Default::default() };
        let mut pipeline =
            Pipeline::new(map.clone(), Atlas::synthetic("paper-demo", 0), config).map_err(|e| e.to_string())?;
        pipeline.update_lights(&lights, 0, (0, 0)).map_err(|e| e.to_string())?;
        let reference = pipeline.light_texture().clone();
        for _ in 0..PERMUTATIONS {
            let mut order = lights.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
            }
            pipeline.update_lights(&order, 0, (0, 0)).map_err(|e| e.to_string())?;
            check(pipeline.light_texture() == &reference, format!("{mode:?} order {order:?} differs"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} permutations of 4 lights, light and shadow mode, identical textures"))
}

fn isolume(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_isolume")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (a, b, ja, jb) = (path("a.png"), path("b.png"), path("a.json"), path("b.json"));
    isolume(&["render", "--seed", "paper-demo", "--out", &a])?;
    isolume(&["render", "--seed", "paper-demo", "--out", &b])?;
    isolume(&["generate", "--seed", "paper-demo", "--out", &ja])?;
    isolume(&["generate", "--seed", "paper-demo", "--out", &jb])?;
    let read = |p: &str| std::fs::read(p).map_err(|e| e.to_string());
    let (pa, pb) = (read(&a)?, read(&b)?);
    check(pa == pb, "render outputs differ")?;
    check(read(&ja)? == read(&jb)?, "generate outputs differ")?;
    Ok(format!("two renders ({} bytes) and two maps byte-identical", pa.len()))
}

fn c8_blur() -> Outcome {
    for value in [0u8, 1, 77, 128, 255] {
        let mut tex = LightTexture::new(37, 23, 0);
        tex.data_mut().fill(value);
        for radius in [0, 1, 2, 3, 5, 12, 40] {
            check(box_blur(&tex, radius) == tex, format!("constant {value} changed at radius {radius}"))?;
        }
    }
    let mut tex = LightTexture::new(9, 9, 0);
    tex.set(4, 4, 255);
    let blurred = box_blur(&tex, 1);
    // round(255 / 9)
    let expected = ((255.0f64 / 9.0).round()) as u8;
    for y in 0..9 {
        for x in 0..9 {
            let inside = (3..=5).contains(&x) && (3..=5).contains(&y);
            let want = if inside { expected } else { 0 };
            check(blurred.get(x, y) == want, format!("({x}, {y}) = {} != {want}", blurred.get(x, y)))?;
        }
    }
    check(expected == 28, "impulse mean is not 28")?;
    Ok("constant fields preserved at radii 0..40, impulse 3x3 mean 28".into())
}

fn c9_performance() -> Outcome {
    let default = BenchScenario::default();
    let report = run_benchmark(&default).map_err(|e| e.to_string())?;
    let mean_ms = report.total.mean_us / 1000.0;
    check(
        report.total.mean_us <= FRAME_BUDGET_US,
        format!("(a) mean frame {mean_ms:.2} ms over {} frames exceeds 33 ms", report.work.frames),
    )?;

    let spread = |n: u32| BenchScenario {
        name: format!("lights-{n}"),
        light_count: n,
        light_area: (64, 64),
        orbit_radius: Some(250),
        frames: 6,
        warmup_frames: 0,
        ..BenchScenario::default()
    };
    let rays: Vec<u64> = [1, 2, 4]
        .iter()
        .map(|&n| run_benchmark(&spread(n)).map(|r| r.work.rays))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    check(rays[0] > 0 && rays[1] == 2 * rays[0] && rays[2] == 4 * rays[0], format!("(b) ray counts {rays:?}"))?;

    let ratio = report.displace_light_us / report.retrace_light_us;
    check(
        ratio <= DISPLACE_COST_RATIO,
        format!(
            "(c) displacement {:.0} us is {:.1}% of retrace {:.0} us",
            report.displace_light_us,
            100.0 * ratio,
            report.retrace_light_us
        ),
    )?;
    Ok(format!(
        "(a) {mean_ms:.2} ms mean frame ({:.1} fps) over {} frames; (b) rays {rays:?} for 1/2/4 lights; \
         (c) displacement at {:.1}% of retrace light time",
        report.fps,
        report.work.frames,
        100.0 * ratio
    ))
}

fn c10_shadow_agreement() -> Outcome {
    let mut rng = Prng::from_seed("acceptance/shadow");
    let open = ObstacleMap::new(1536, 976);
    let mut compared = 0;
    for _ in 0..8 {
        let count = 1 + rng.next_u64() % 4;
        let lights: Vec<LightSource> = (0..count)
            .map(|_| {
                // some lights hang over the texture edge
                let c = ((rng.next_u64() % 1600) as i32 - 160, (rng.next_u64() % 1000) as i32 - 140);
                LightSource::new(c, (1 + (rng.next_u64() % 256) as u32, 1 + (rng.next_u64() % 256) as u32))
            })
            .collect();
        let skip = 1 + (rng.next_u64() % 3) as u32;
        let mut textures = Vec::new();
        for mode in [TraceMode::Light, TraceMode::Shadow] {
            let cfg = TraceConfig { skip, mode, ..Default::default() };
            let mut tex = LightTexture::for_viewport((1280, 720), 128).unwrap();
            for light in &lights {
                render_light(&mut tex, light, &open, &cfg);
            }
            textures.push(tex);
        }
        check(textures[0] == textures[1], format!("modes differ for {lights:?}"))?;
        compared += 1;
    }
    Ok(format!("{compared} light sets byte-identical in both modes"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("bresenham oracle", c1_bresenham),
        ("intensity formula", c2_intensity),
        ("obstacle halting", c3_halting),
        ("opacity correction", c4_opacity_correction),
        ("shading identity", c5_shading_identity),
        ("light order invariance", c6_order_invariance),
        ("cli determinism", c7_determinism),
        ("blur properties", c8_blur),
        ("performance", c9_performance),
        ("shadow/light agreement", c10_shadow_agreement),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
