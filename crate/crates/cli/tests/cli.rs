use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use micromech::arrayfile::ArrayFile;
use micromech::image::decode_pgm;
use serde_json::{json, Value};

fn micromech(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_micromech"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write_json(p: impl AsRef<Path>, v: &Value) {
    fs::write(p, serde_json::to_string(v).unwrap()).unwrap();
}

#[test]
fn homogeneous_cell_reports_phase_properties() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "rve": {"uniform": {"resolution": [32, 32], "domain": [10.0, 10.0], "phase": 0}},
        "matrix": {"E": 3.63, "nu": 0.34},
    });
    write_json(dir.path().join("c.json"), &cfg);
    let o = micromech(
        &["homogenize", "--config", "c.json", "--out", "h"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(dir.path().join("h/summary.json"));
    assert!((s["E"].as_f64().unwrap() - 3.63).abs() <= 1e-10, "{s}");
    assert!((s["nu"].as_f64().unwrap() - 0.34).abs() <= 1e-10, "{s}");
    assert_eq!(s["iterations"], json!([1, 1, 1]));
}

#[test]
fn rerun_from_echo_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let o = micromech(
        &[
            "homogenize",
            "--set",
            "rve.fibers.resolution=[64,64]",
            "--set",
            "rve.fibers.seed=5",
            "--out",
            "a",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = read_json(dir.path().join("a/config.json"));
    assert_eq!(echo["solver"]["tol"], json!(1e-6), "defaults are filled in");
    assert_eq!(echo["rve"]["fibers"]["gap_frac"], json!(0.1));
    let o = micromech(
        &["homogenize", "--config", "a/config.json", "--out", "b"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    for f in ["microstructure.arr", "concentration.arr", "config.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn dataset_then_validate_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = micromech(
        &[
            "dataset",
            "--set",
            "n_samples=2",
            "--set",
            "resolution=[64,64]",
            "--set",
            "master_seed=11",
            "--set",
            "n_vof_groups=2",
            "--out",
            "ds",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_json(dir.path().join("ds/manifest.json"));
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 2);
    assert_eq!(
        read_json(dir.path().join("ds/summary.json"))["samples"],
        json!(2)
    );

    let o = micromech(&["validate", "--dataset", "ds"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(
        read_json(dir.path().join("ds/validation.json"))["violations"]
            .as_array()
            .unwrap()
            .is_empty()
    );

    // shift the mean of one concentration component
    let path = dir.path().join("ds/sample_00001/concentration.arr");
    let mut a = ArrayFile::read(&path).unwrap();
    let mut v = a.to_f64_vec();
    v[0] += 1.0;
    a = ArrayFile::f64(a.shape.clone(), v).unwrap();
    a.write(&path).unwrap();
    let o = micromech(&["validate", "--dataset", "ds"], dir.path());
    assert_eq!(code(&o), 1);
    let report = read_json(dir.path().join("ds/validation.json"));
    assert_eq!(
        report["violations"].as_array().unwrap().len(),
        1,
        "{report}"
    );

    fs::write(dir.path().join("ds/sample_00000/stray.arr"), b"x").unwrap();
    assert_eq!(
        code(&micromech(&["validate", "--dataset", "ds"], dir.path())),
        1
    );
}

#[test]
fn microstructure_exports_two_gray_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = micromech(
        &[
            "gen-rve",
            "--set",
            "resolution=[64,48]",
            "--set",
            "domain=[50,37.5]",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = micromech(
        &[
            "export-image",
            "--field",
            "r/microstructure.arr",
            "--out",
            "img/m.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (w, h, px) = decode_pgm(&fs::read(dir.path().join("img/m.pgm")).unwrap()).unwrap();
    assert_eq!((w, h), (48, 64));
    let mut levels: Vec<u8> = px.clone();
    levels.sort_unstable();
    levels.dedup();
    assert_eq!(levels, [0, 255]);
    let side = read_json(dir.path().join("img/m.pgm.json"));
    assert_eq!(
        (side["min"].as_f64(), side["max"].as_f64()),
        (Some(0.0), Some(1.0))
    );
}

#[test]
fn concentration_component_keeps_grid_shape_and_constant_field_degenerates() {
    let dir = tempfile::tempdir().unwrap();
    let o = micromech(
        &[
            "homogenize",
            "--set",
            "rve.fibers.resolution=[40,32]",
            "--set",
            "rve.fibers.domain=[50,40]",
            "--out",
            "h",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = micromech(
        &[
            "export-image",
            "--field",
            "h/concentration.arr",
            "--component",
            "4",
            "--out",
            "a.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (w, h, _) = decode_pgm(&fs::read(dir.path().join("a.pgm")).unwrap()).unwrap();
    assert_eq!((w, h), (32, 40));

    ArrayFile::f64(vec![8, 8], vec![2.5; 64])
        .unwrap()
        .write(dir.path().join("flat.arr"))
        .unwrap();
    let o = micromech(
        &["export-image", "--field", "flat.arr", "--out", "flat.pgm"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("WARN"));
    let (_, _, px) = decode_pgm(&fs::read(dir.path().join("flat.pgm")).unwrap()).unwrap();
    assert!(px.iter().all(|&p| p == 0));
    assert_eq!(
        read_json(dir.path().join("flat.pgm.json"))["degenerate"],
        json!(true)
    );
}

#[test]
fn spinodal_and_solve_write_their_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = micromech(
        &[
            "gen-spinodal",
            "--set",
            "resolution=[32,32]",
            "--set",
            "domain=[6.25,6.25]",
            "--set",
            "params.steps=50",
            "--out",
            "sp",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(dir.path().join("sp/summary.json"));
    assert!(s["mean_drift"].as_f64().unwrap() <= 1e-12);
    assert_eq!(
        ArrayFile::read(dir.path().join("sp/concentration.arr"))
            .unwrap()
            .shape,
        [32, 32]
    );

    let o = micromech(
        &[
            "solve",
            "--set",
            r#"rve={"spinodal":{"resolution":[32,32],"domain":[6.25,6.25],"params":{"steps":50}}}"#,
            "--set",
            "macro_strain=[0,0,0.01]",
            "--out",
            "so",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(dir.path().join("so/summary.json"));
    assert_eq!(s["converged"], json!(true));
    let strain = ArrayFile::read(dir.path().join("so/strain.arr")).unwrap();
    assert_eq!(strain.shape, [32, 32, 3]);
    let mean12 = strain.to_f64_vec().chunks(3).map(|c| c[2]).sum::<f64>() / 1024.0;
    assert!((mean12 - 0.01).abs() < 1e-12);
}

#[test]
fn tiny_plate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "nx": 2, "ny": 3, "load_steps": 2, "recover_elements": [0],
        "micro": {"resolution": [32, 32], "n_vof_groups": 3},
    });
    write_json(dir.path().join("p.json"), &cfg);
    let o = micromech(
        &[
            "multiscale",
            "--config",
            "p.json",
            "--out",
            "m",
            "--threads",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(dir.path().join("m/summary.json"));
    assert_eq!(s["n_elements"], json!(6));
    assert_eq!(s["steps"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("m/config.json").is_file());
}

#[test]
fn exit_codes_separate_misuse_from_domain_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&micromech(&["frobnicate"], p)), 2);
    assert_eq!(code(&micromech(&["solve", "--no-such-flag"], p)), 2);
    assert_eq!(
        code(&micromech(&["solve", "--config", "missing.json"], p)),
        2
    );
    assert_eq!(code(&micromech(&["solve", "--set", "unknown_key=1"], p)), 2);
    assert_eq!(
        code(&micromech(&["gen-rve", "--set", "vof_target=0.9"], p)),
        2
    );
    assert_eq!(code(&micromech(&["solve", "--set", "novalue"], p)), 2);
    fs::write(p.join("bad.json"), "{not json").unwrap();
    assert_eq!(code(&micromech(&["dataset", "--config", "bad.json"], p)), 2);

    let help = micromech(&["--help"], p);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("export-image"));

    // an iteration cap too small for a contrasted cell is a domain failure
    let o = micromech(
        &[
            "solve",
            "--set",
            "rve.fibers.resolution=[64,64]",
            "--set",
            "solver.max_iter=2",
            "--out",
            "s",
        ],
        p,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
    assert_eq!(
        code(&micromech(&["validate", "--dataset", "nowhere"], p)),
        1
    );
}
