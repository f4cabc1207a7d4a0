#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_lowedge");

/// `[model]` table for an i.i.d. (or box-kernel) uniform field.
pub fn model(n: usize, d: usize, a: f64, kernel_radius: usize) -> String {
    let taps: Vec<String> =
        box_offsets(d, kernel_radius).into_iter().map(|o| format!("{{ offset = {o:?}, weight = 1.0 }}")).collect();
    format!(
        "[model]\nn = {n}\nd = {d}\ninteraction = {{ r0 = 1, phi = [1.0, 0.5] }}\n\n\
         [model.field]\nd = {d}\nbase = {{ law = \"uniform\", a = {a:?} }}\nkernel = [{}]\n",
        taps.join(", ")
    )
}

fn box_offsets(d: usize, r: usize) -> Vec<Vec<i64>> {
    let side = 2 * r + 1;
    (0..side.pow(d as u32))
        .map(|mut i| {
            let mut o = vec![0i64; d];
            for k in (0..d).rev() {
                o[k] = (i % side) as i64 - r as i64;
                i /= side;
            }
            o
        })
        .collect()
}

/// A small, fast configuration for every experiment kind.
pub fn smoke_configs() -> Vec<(&'static str, String)> {
    let head = |kind: &str, trials: u64| format!("kind = \"{kind}\"\ntrials = {trials}\nseed = 7\n");
    vec![
        (
            "field-certify",
            format!(
                "{}\n{}\n[field_certify]\ndistances = [1, 5]\ncontinuity_eps = 0.05\n",
                head("field-certify", 1000),
                model(1, 1, 1.0, 2)
            ),
        ),
        (
            "large-deviation",
            format!(
                "{}\n{}\n[large_deviation]\nenergy = 0.18\nbeta = 0.0504\nc = 30.0\n",
                head("large-deviation", 1000),
                model(1, 1, 1.0, 0)
            ),
        ),
        (
            "lifshitz",
            format!("{}\n{}\n[lifshitz]\nsizes = [8, 16]\nc = 1.1\n", head("lifshitz", 100), model(1, 1, 1.0, 0)),
        ),
        ("ct-check", format!("{}\n{}\n[ct_check]\nn = 2\nsizes = [2]\n", head("ct-check", 8), model(2, 1, 1.0, 1))),
        (
            "msa-initial",
            format!("{}\n{}\n[msa]\nn_max = 1\nscales = [8, 16]\n", head("msa-initial", 100), model(1, 1, 1.0, 0)),
        ),
        (
            "eigen-decay",
            format!("{}\n{}\n[eigen_decay]\nsize = 15\nwidth = 0.5\n", head("eigen-decay", 6), model(1, 1, 4.0, 0)),
        ),
        (
            "dynloc",
            format!(
                "{}\n{}\n[dynloc]\nsize = 6\nwindow = [0.0, 1.5]\ns = 1.0\n",
                head("dynloc", 4),
                model(1, 1, 2.0, 0)
            ),
        ),
        (
            "spectral-edge",
            format!("{}\n{}\n[spectral_edge]\nn = 2\nsizes = [3]\n", head("spectral-edge", 10), model(2, 1, 1.0, 0)),
        ),
    ]
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

pub fn lowedge(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

/// Files in `dir` with the given extension, sorted.
pub fn files(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().path()).filter(|p| p.to_string_lossy().ends_with(suffix)).collect())
        .unwrap_or_default();
    v.sort();
    v
}

/// Runs one experiment through the binary and returns the per-trial CSV.
pub fn run_records(config: &Path, out: &Path, workers: usize) -> Vec<u8> {
    let kind = config.file_stem().unwrap().to_string_lossy().into_owned();
    let o = lowedge(&[
        &kind,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        &workers.to_string(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
    let csv: Vec<PathBuf> =
        files(out, ".csv").into_iter().filter(|p| !p.to_string_lossy().ends_with("-summary.csv")).collect();
    assert_eq!(csv.len(), 1, "{csv:?}");
    std::fs::read(&csv[0]).unwrap()
}
