use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ifs_lab_cli::render::ring_pixel;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ifs-lab"));
    c.env_remove("IFS_LAB_THREADS");
    c
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

const UNREACHABLE: &str = "\
[system]
space = grid 3
map = permutation{cycles = (0 1)}

[scenario]
kind = chains
from = 0
to = 2
delta = 0.5
epsilon = 0.25
";

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = run(bin().args(["run"]).arg(shipped("minimal-grid-estimate.cfg")).arg("--out").arg(tmp.path().join("a")));
    assert_eq!(ok.status.code(), Some(0));

    let bad = write(
        tmp.path(),
        "bad.cfg",
        "[system]\nspace = circle\nmap = rotation{alpha = 1}\nmap = rotation{alpha = 2}\nweights = 0.5, 0.6\n[scenario]\nkind = chaos-game\n",
    );
    let out = run(bin().arg("run").arg(&bad).arg("--out").arg(tmp.path().join("b")));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("weights sum"), "{err}");
    assert!(!tmp.path().join("b").exists());

    let missing = run(bin().args(["run", "/nonexistent/config.cfg"]));
    assert_eq!(missing.status.code(), Some(1));

    let chains = write(tmp.path(), "chains.cfg", UNREACHABLE);
    let lenient = run(bin().arg("run").arg(&chains).arg("--out").arg(tmp.path().join("c")));
    assert_eq!(lenient.status.code(), Some(0));
    let strict = run(bin().arg("run").arg(&chains).arg("--strict").arg("--out").arg(tmp.path().join("d")));
    assert_eq!(strict.status.code(), Some(3));
    // The report is still written before the strict exit.
    assert!(tmp.path().join("d/summary.json").exists());

    let threads = run(bin().env("IFS_LAB_THREADS", "zero").arg("validate").arg(shipped("theorem-b.cfg")));
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn validate_does_not_write() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.cfg", &fs::read_to_string(shipped("chaos-game-circle.cfg")).unwrap());
    let out = run(bin().arg("validate").arg(&cfg));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = run(bin()
        .arg("run")
        .arg(shipped("chaos-game-circle.cfg"))
        .args(["--seed", "9", "--trials", "12", "--out"])
        .arg(&first));
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(first.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["trials"], 12);
    let echo = write(tmp.path(), "echo.cfg", summary["config"].as_str().unwrap());

    let second = tmp.path().join("second");
    assert!(run(bin().arg("run").arg(&echo).arg("--out").arg(&second)).status.success());
    assert_eq!(fs::read(first.join("trials.csv")).unwrap(), fs::read(second.join("trials.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tmp.path().join(threads);
        let out = run(bin()
            .env("IFS_LAB_THREADS", threads)
            .arg("run")
            .arg(shipped("theorem-c-sphere.cfg"))
            .arg("--out")
            .arg(&dir));
        assert!(out.status.success());
        outputs.push(files(&dir));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn circle_render_covers_the_ring() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    assert!(run(bin().arg("render").arg(shipped("render-circle.cfg")).arg("--out").arg(&dir)).status.success());
    let bytes = fs::read(dir.join("attractor.ppm")).unwrap();
    let header = b"P6\n256 256\n255\n";
    assert!(bytes.starts_with(header));
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), 256 * 256 * 3);

    let ring: BTreeSet<(usize, usize)> = (0..200_000)
        .map(|i| ring_pixel(i as f64 * std::f64::consts::TAU / 200_000.0, 256, 256))
        .collect();
    let lit = ring.iter().filter(|&&(x, y)| pixels[3 * (y * 256 + x)] > 0).count();
    assert!(lit as f64 >= 0.99 * ring.len() as f64, "{lit} of {} ring pixels", ring.len());
    // Nothing off the ring.
    let total = pixels.chunks(3).filter(|p| p[0] > 0).count();
    assert_eq!(total, lit);
}

#[test]
fn default_output_dir_is_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "grid.cfg", &fs::read_to_string(shipped("minimal-grid-estimate.cfg")).unwrap());
    assert!(run(bin().arg("run").arg(&cfg)).status.success());
    assert!(tmp.path().join("out/minimal-grid-estimate/summary.json").exists());
}
