use isolume_bench::{run_benchmark, write_csv, BenchScenario};
use isolume_core::procgen::WeightedId;
use isolume_core::Palette;

fn small() -> BenchScenario {
    BenchScenario {
        name: "small".into(),
        seed: "harness".into(),
        map_rows: 12,
        map_cols: 5,
        viewport: (512, 256),
        light_count: 1,
        light_area: (48, 48),
        skip: 2,
        update_interval: 3,
        blur_radius: 1,
        frames: 6,
        warmup_frames: 1,
        margin: 64,
        ..Default::default()
    }
}

/// Floor blocks only, so the obstacle map is empty.
fn bare_palette() -> Palette {
    Palette { blocks: vec![WeightedId { id: "grass".into(), weight: 1.0 }], overlays: vec![], slots: [0.0; 3] }
}

#[test]
fn empty_workload_is_well_formed() {
    let report = run_benchmark(&BenchScenario { light_count: 0, frames: 1, warmup_frames: 0, ..small() }).unwrap();
    assert_eq!(report.work.rays, 0);
    assert_eq!(report.work.pixel_writes, 0);
    assert_eq!(report.work.frames, 1);
    assert!(report.trace.mean_us < 1000.0, "{}", report.trace.mean_us);
    assert!(report.fps.is_finite() && report.fps > 0.0);
    assert_eq!(report.work.fragments, 512 * 256);
}

#[test]
fn work_counts_are_deterministic() {
    let s = BenchScenario { light_count: 2, ..small() };
    let a = run_benchmark(&s).unwrap();
    let b = run_benchmark(&s).unwrap();
    assert_eq!(a.work, b.work);
    assert_eq!(a.work.retraces, 2);
}

#[test]
fn report_totals_bound_phases() {
    let r = run_benchmark(&small()).unwrap();
    for phase in [r.trace, r.correction, r.blur, r.shade] {
        assert!(r.total.mean_us >= phase.mean_us);
    }
    assert!((r.fps - 1e6 / r.total.mean_us).abs() < 1e-9);
}

#[test]
fn doubling_separated_lights_doubles_work() {
    let one = BenchScenario {
        viewport: (1024, 256),
        map_cols: 9,
        orbit_radius: Some(300),
        light_area: (64, 64),
        frames: 3,
        warmup_frames: 0,
        palette: Some(bare_palette()),
        ..small()
    };
    let two = BenchScenario { light_count: 2, ..one.clone() };
    let a = run_benchmark(&one).unwrap().work;
    let b = run_benchmark(&two).unwrap().work;
    assert!(a.pixel_writes > 0);
    assert_eq!(b.rays, 2 * a.rays);
    assert_eq!(b.pixel_writes, 2 * a.pixel_writes);
}

#[test]
fn trace_work_scales_with_perimeter_over_skip() {
    let base =
        BenchScenario { frames: 1, warmup_frames: 0, light_area: (64, 64), palette: Some(bare_palette()), ..small() };
    let run = |area: u32, skip: u32| {
        run_benchmark(&BenchScenario { light_area: (area, area), skip, ..base.clone() }).unwrap().work
    };
    let s1 = run(64, 1);
    let s2 = run(64, 2);
    // 4(a+b) rays at skip 1, 4(a+b)/2 + 4 corners at skip 2
    assert_eq!(s1.rays, 512);
    assert_eq!(s2.rays, 260);
    let write_ratio = s1.pixel_writes as f64 / s2.pixel_writes as f64;
    let ray_ratio = s1.rays as f64 / s2.rays as f64;
    assert!((write_ratio / ray_ratio - 1.0).abs() <= 0.10, "{write_ratio} vs {ray_ratio}");

    let big = run(32, 1);
    assert_eq!(s1.rays, 2 * big.rays);
}

#[test]
fn viewport_larger_than_map_is_rejected() {
    let err = run_benchmark(&BenchScenario { viewport: (4096, 256), ..small() }).unwrap_err();
    assert!(err.to_string().contains("viewport"), "{err}");
}

#[test]
fn csv_shape_and_append() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let report = run_benchmark(&BenchScenario { frames: 2, ..small() }).unwrap();

    write_csv(std::slice::from_ref(&report), &path, false).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let row = reader.records().next().unwrap().unwrap();
    let mean: f64 = row[col("total_mean_us")].parse().unwrap();
    let fps: f64 = row[col("fps")].parse().unwrap();
    // both columns carry three decimals
    let tolerance = 1e6 / (mean - 5e-4) - 1e6 / (mean + 5e-4) + 1e-3;
    assert!((fps - 1e6 / mean).abs() <= tolerance, "{fps} vs {}", 1e6 / mean);
    assert_eq!(&row[col("viewport_w")], "512");
    assert_eq!(&row[col("light_count")], "1");

    write_csv(std::slice::from_ref(&report), &path, true).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("name,")).count(), 1);

    write_csv(&[report], &path, false).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}
