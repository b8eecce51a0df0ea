use std::path::Path;
use std::process::{Command, Output};

use iwin_core::pgm::PgmImage;
use serde_json::Value;

fn iwin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn iwin")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn make_phantom(dir: &Path) {
    ok(&iwin(
        &["phantom", "--seed", "4", "--width", "96", "--height", "80", "--radius", "28",
          "--output", "p.pgm", "--truth", "truth.pgm"],
        dir,
    ));
}

#[test]
fn phantom_segment_dice_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    make_phantom(dir);
    let info: Value = serde_json::from_str(&ok(&iwin(&["info", "--input", "p.pgm", "--json"], dir))).unwrap();
    assert_eq!((info["width"].as_u64(), info["height"].as_u64()), (Some(96), Some(80)));
    assert_eq!(info["bits_allocated"], 16);

    ok(&iwin(&["segment", "--input", "p.pgm", "--output", "mask.pgm"], dir));
    let score: f64 = ok(&iwin(&["dice", "--a", "mask.pgm", "--b", "truth.pgm"], dir)).trim().parse().unwrap();
    assert!(score >= 0.95, "{score}");

    let same = ok(&iwin(&["dice", "--a", "truth.pgm", "--b", "truth.pgm"], dir));
    assert_eq!(same.trim(), "1.0");
}

#[test]
fn window_json_and_render() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    make_phantom(dir);
    let full: Value = serde_json::from_str(&ok(&iwin(
        &["window", "--input", "p.pgm", "--strategy", "minmax", "--json"], dir,
    )))
    .unwrap();
    let fg: Value = serde_json::from_str(&ok(&iwin(
        &["window", "--input", "p.pgm", "--strategy", "minmax", "--auto-segment", "--json", "--output", "r.pgm"],
        dir,
    )))
    .unwrap();
    assert_eq!(full["suppress"], false);
    assert_eq!(fg["suppress"], true);
    assert!(full["ww"].as_f64().unwrap() > fg["ww"].as_f64().unwrap());

    let render = PgmImage::decode(&std::fs::read(dir.join("r.pgm")).unwrap()).unwrap();
    let truth = PgmImage::decode(&std::fs::read(dir.join("truth.pgm")).unwrap()).unwrap().to_mask();
    assert_eq!((render.width, render.height), (96, 80));
    assert!(render.samples.iter().zip(truth.bits()).all(|(&s, &t)| t || s == 0));

    let with_mask: Value = serde_json::from_str(&ok(&iwin(
        &["window", "--input", "p.pgm", "--mask", "truth.pgm", "--strategy", "minmax", "--json"], dir,
    )))
    .unwrap();
    assert_eq!(with_mask["suppress"], true);
    assert!(with_mask["ww"].as_f64().unwrap() < full["ww"].as_f64().unwrap());
}

#[test]
fn errors_name_the_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.bin"), b"garbage bytes here").unwrap();
    let out = iwin(&["info", "--input", "bad.bin"], dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NotDicom"));

    make_phantom(dir);
    let out = iwin(&["window", "--input", "p.pgm", "--strategy", "percentile:90,10"], dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InvalidStrategy"));

    let out = iwin(&["info", "--input", "missing.pgm"], dir);
    assert_eq!(out.status.code(), Some(1));
}
