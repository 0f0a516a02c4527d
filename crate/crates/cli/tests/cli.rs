use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vxct_core::engine::read_ppm;
use vxct_core::mipvolume::VoxelGrid;
use vxct_core::Scene;

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

fn vxct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vxct"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn render_writes_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frame.ppm");
    let scene = scenes().join("cornell.scene");
    let o = vxct(&[
        "render",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--width",
        "24",
        "--height",
        "16",
        "--grid",
        "16",
        "--mode",
        "vxct",
        "--threads",
        "2",
        "--gamma",
        "2.2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = read_ppm(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (24, 16));
}

#[test]
fn voxels_mode_with_lod() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.ppm");
    let scene = scenes().join("cornell.scene");
    let o = vxct(&[
        "render",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--width",
        "16",
        "--height",
        "16",
        "--grid",
        "16",
        "--mode",
        "voxels",
        "--lod",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scene_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scene");
    std::fs::write(&bad, "model {\n  shape: \"cube\"\n").unwrap();
    let out = dir.path().join("x.ppm");
    let o = vxct(&[
        "render",
        "--scene",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3:"));

    let missing = dir.path().join("missing.scene");
    let o = vxct(&[
        "voxelize",
        "--scene",
        missing.to_str().unwrap(),
        "--dump",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn other_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ppm");
    let scene = scenes().join("cornell.scene");
    let o = vxct(&[
        "render",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "24",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = vxct(&[
        "render",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "xray",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn voxelize_dump_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("grid.vxg");
    let scene_path = scenes().join("cornell.scene");
    let o = vxct(&[
        "voxelize",
        "--scene",
        scene_path.to_str().unwrap(),
        "--grid",
        "16",
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scene = Scene::load(&scene_path).unwrap();
    let grid = VoxelGrid::load(std::fs::File::open(&dump).unwrap(), scene.bounds).unwrap();
    assert_eq!(grid.resolution(), 16);
    assert!(grid.data().iter().any(|v| v[3] == 1.0));
}

#[test]
fn bench_prints_one_row_per_grid() {
    let scene = scenes().join("complex.scene");
    let o = vxct(&[
        "bench",
        "--scene",
        scene.to_str().unwrap(),
        "--frames",
        "2",
        "--grid",
        "16,32",
        "--width",
        "16",
        "--height",
        "16",
        "--revoxelize",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].contains("with revoxelization"));
    for (line, grid) in lines[1..].iter().zip(["16^3", "32^3"]) {
        let cols: Vec<_> = line.split_whitespace().collect();
        assert_eq!(cols[0], grid);
        assert!(cols[1].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn serve_fails_on_taken_address() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let scene = scenes().join("cornell.scene");
    let o = vxct(&[
        "serve",
        "--scene",
        scene.to_str().unwrap(),
        "--addr",
        &addr,
        "--grid",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot bind"));
}

#[test]
fn serve_answers_health_checks() {
    use std::io::{Read, Write};
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let scene = scenes().join("cornell.scene");
    let mut child = Command::new(env!("CARGO_BIN_EXE_vxct"))
        .args([
            "serve",
            "--scene",
            scene.to_str().unwrap(),
            "--addr",
            &addr,
            "--grid",
            "16",
        ])
        .env("RUST_LOG", "warn")
        .spawn()
        .unwrap();
    let mut reply = String::new();
    for _ in 0..100 {
        if let Ok(mut s) = std::net::TcpStream::connect(&addr) {
            s.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
                .unwrap();
            s.read_to_string(&mut reply).unwrap();
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.ends_with("ok"), "{reply}");
}
