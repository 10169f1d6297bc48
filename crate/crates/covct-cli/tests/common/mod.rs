//! Shared helpers for the CLI integration tests. Each test target compiles
//! this module separately and uses a different subset of it.
#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use covct::phantom::lung_phantom;
use covct::volume::Volume;

/// Path to the compiled `covct` binary under test.
pub fn covct_bin() -> &'static str {
    env!("CARGO_BIN_EXE_covct")
}

/// Runs the binary with fresh (empty) `COVCT_*` surroundings so ambient
/// environment variables cannot leak into a test.
pub fn run_covct(args: &[&str]) -> Output {
    let mut command = Command::new(covct_bin());
    for (key, _) in std::env::vars() {
        if key.starts_with("COVCT_") {
            command.env_remove(key);
        }
    }
    command.args(args).output().expect("binary runs")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Writes `volume` as one 8-bit grayscale PNG per depth slice; image columns
/// are the width axis and rows the height axis.
pub fn write_scan_slices(dir: &Path, volume: &Volume) {
    fs::create_dir_all(dir).unwrap();
    let (depth, width, height) = volume.dims();
    for d in 0..depth {
        let slice = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
            let v = volume.get(d, x as usize, y as usize).clamp(0.0, 1.0);
            image::Luma([(v * 255.0).round() as u8])
        });
        slice
            .save(dir.join(format!("slice_{d:03}.png")))
            .expect("png encodes");
    }
}

/// A scan whose segmentation must fall back to the full volume: uniform
/// tissue with no air pockets at all.
pub fn write_uniform_scan(dir: &Path) {
    let uniform = Volume::filled(12, 24, 24, 0.8).unwrap();
    write_scan_slices(dir, &uniform);
}

/// Builds the five-scan corpus: four lung phantoms of different grid sizes
/// plus one uniform scan that exercises the full-volume fallback.
pub fn build_corpus(root: &Path) {
    let phantoms = [
        ("scan_a", (24usize, 40usize, 36usize)),
        ("scan_b", (26, 44, 40)),
        ("scan_c", (28, 40, 44)),
        ("scan_d", (24, 48, 36)),
    ];
    for (name, (d, w, h)) in phantoms {
        let (volume, _) = lung_phantom(d, w, h).expect("phantom");
        write_scan_slices(&root.join(name), &volume);
    }
    write_uniform_scan(&root.join("scan_e"));
}

/// Reads every `.cvol` in a directory into (file name, bytes), sorted.
pub fn read_cvols(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cvol"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
