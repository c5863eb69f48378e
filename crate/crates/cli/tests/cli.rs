use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodalquad")).args(args).current_dir(dir).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn studies_are_byte_for_byte_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["study", "scalar", "--eps", "1", "--mesh", "random", "--seed", "7", "--n", "4,8"];
    let a = run(&[&args[..], &["--out", "a.csv"]].concat(), dir.path());
    let b = run(&[&args[..], &["--out", "b.csv"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success());
    let a_csv = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a_csv, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a_csv).unwrap();
    assert!(text.starts_with("n,error_1,"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "sequence", "--mesh", "rect", "--n", "2"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["study", "scalar", "--eps", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["study", "scalar", "--mesh", "trap", "--delta", "0.5"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["study", "scalar", "--n", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["study", "scalar", "--format", "csv"], dir.path()).status.code(), Some(2));

    // a geometry hash that no longer matches the vertices
    assert!(run(&["mesh", "export", "--n", "2", "--out", "m.json"], dir.path()).status.success());
    let path = dir.path().join("m.json");
    let text = fs::read_to_string(&path).unwrap().replacen("0.5", "0.51", 1);
    fs::write(&path, text).unwrap();
    assert_eq!(run(&["mesh", "import", "m.json"], dir.path()).status.code(), Some(2));

    // a run that cannot write its report fails after the numerics
    let o = run(&["mesh", "export", "--n", "2", "--out", "missing/dir/m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

fn hash_of(o: &Output) -> String {
    let s = stdout(o);
    s.split("hash ").nth(1).expect("hash in summary").trim().to_string()
}

#[test]
fn mesh_round_trip_keeps_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let export = run(&["mesh", "export", "--mesh", "random", "--seed", "3", "--n", "4", "--out", "r.json"], dir.path());
    assert!(export.status.success(), "{}", String::from_utf8_lossy(&export.stderr));
    let first = run(&["mesh", "import", "r.json", "--out", "s.json"], dir.path());
    assert!(first.status.success());
    let second = run(&["mesh", "import", "s.json"], dir.path());
    assert_eq!(hash_of(&first), hash_of(&second));

    let rect = run(&["mesh", "export", "--n", "2", "--out", "rect.json"], dir.path());
    assert!(rect.status.success());
    let summary = stdout(&run(&["mesh", "import", "rect.json"], dir.path()));
    assert!(summary.contains("9 vertices, 4 cells"), "{summary}");
}

#[test]
fn flat_trapezoids_match_the_rectangular_mesh() {
    let dir = tempfile::tempdir().unwrap();
    run(&["mesh", "export", "--n", "4", "--out", "rect.json"], dir.path());
    run(&["mesh", "export", "--mesh", "trap", "--delta", "0", "--n", "4", "--out", "trap.json"], dir.path());
    let a = hash_of(&run(&["mesh", "import", "rect.json"], dir.path()));
    let b = hash_of(&run(&["mesh", "import", "trap.json"], dir.path()));
    assert_eq!(a, b);
}

#[test]
fn sequence_verification() {
    let dir = tempfile::tempdir().unwrap();
    let rect = stdout(&run(&["verify", "sequence", "--mesh", "rect", "--n", "2"], dir.path()));
    assert!(rect.contains("| dims (W_h, V_h, P_h) | (3, 6, 3) |"), "{rect}");
    assert!(rect.contains("overall: pass"));
    let random = run(&["verify", "sequence", "--mesh", "random", "--seed", "9", "--n", "4", "--out", "seq.json"], dir.path());
    assert!(random.status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("seq.json")).unwrap()).unwrap();
    assert_eq!(json["exact"], serde_json::Value::Bool(true));
}

#[test]
fn element_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "element", "--samples", "1000", "--seed", "1", "--out", "cert.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cert.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
    assert_eq!(json["samples"], 1000);
}

#[test]
fn matrices_are_dumped_in_matrix_market_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["study", "brinkman", "--nu", "1", "--alpha", "0", "--n", "2,4", "--dump-matrix", "mtx"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(dir.path().join("mtx")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(files.len() >= 2, "{files:?}");
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"), "{f:?}");
    }
}

#[test]
fn config_file_drives_a_study() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "nu = [0]\nalpha = [1]\nn = [4, 8]\nformat = \"json\"\nout = \"darcy.json\"\n").unwrap();
    let o = run(&["study", "brinkman", "--config", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("darcy.json")).unwrap()).unwrap();
    assert!(json.to_string().contains("Darcy"));
}
