use std::path::{Path, PathBuf};
use std::sync::Arc;

use vxct_core::engine::{benchmark, read_ppm, RenderJob, RenderMode, Renderer};
use vxct_core::Scene;

fn scene(name: &str) -> Arc<Scene> {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name);
    Arc::new(Scene::load(&path).unwrap())
}

#[test]
fn bundled_scenes_render_in_every_mode() {
    for name in ["cornell.scene", "complex.scene", "wave.scene"] {
        let s = scene(name);
        assert!(s.triangle_count() > 0, "{name}");
        let mut renderer = Renderer::new();
        for mode in RenderMode::NAMES {
            let mode = RenderMode::parse(mode, 1).unwrap();
            let job = RenderJob::new(s.clone(), 32, 24, mode, 16).unwrap();
            let img = renderer.render(&job).unwrap();
            assert_eq!(renderer.last_stats().near_plane_rejected, 0, "{name}");
            let back = read_ppm(&img.to_ppm()).unwrap();
            assert_eq!(back, img);
            assert!(img.data.iter().any(|&b| b > 0), "{name} {mode} is black");
        }
    }
}

#[test]
fn indirect_light_brightens_the_cornell_box() {
    let s = scene("cornell.scene");
    let mean = |mode| {
        let img =
            vxct_core::render_frame(&RenderJob::new(s.clone(), 48, 48, mode, 32).unwrap()).unwrap();
        img.data.iter().map(|&b| b as f64).sum::<f64>() / img.data.len() as f64
    };
    let indirect = mean(RenderMode::IndirectDiffuseOnly);
    assert!(indirect > 0.5, "indirect diffuse mean {indirect}");
}

#[test]
fn finer_grid_is_slower_on_complex_scene() {
    let s = scene("complex.scene");
    let time = |grid| {
        benchmark(
            &RenderJob::new(s.clone(), 48, 48, RenderMode::Vxct, grid).unwrap(),
            2,
        )
        .unwrap()
    };
    let (coarse, fine) = (time(64), time(256));
    assert!(coarse < fine, "64^3 {coarse} s vs 256^3 {fine} s");
}
