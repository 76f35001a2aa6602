use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoembed::shapes;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geoembed"));
    cmd.env_remove("GE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    mesh: PathBuf,
    pre: PathBuf,
    n: usize,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("bumpy.off");
    let m = shapes::bumpy_sphere(1, 0.3, 4);
    std::fs::write(&mesh, m.to_off_string()).unwrap();
    let pre = dir.path().join("bumpy.gepc");
    let o = run(&[
        "precompute", "--mesh", s(&mesh), "--out", s(&pre), "--dim", "3", "--rounds", "2", "--k", "12", "--ks", "4",
        "--seed", "7", "--threads", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    Fixture {
        n: m.num_vertices(),
        _dir: dir,
        mesh,
        pre,
    }
}

fn query(f: &Fixture, u: usize, v: usize) -> String {
    let o = run(&[
        "query", "--mesh", s(&f.mesh), "--pre", s(&f.pre), "--src", &u.to_string(), "--dst", &v.to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    stdout(&o).trim().to_string()
}

#[test]
fn query_same_vertex_prints_zero() {
    let f = fixture();
    assert_eq!(query(&f, 5, 5), "0");
    let d: f64 = query(&f, 0, 9).parse().unwrap();
    assert!(d > 0.0);
}

#[test]
fn ssad_matches_single_queries() {
    let f = fixture();
    let out = f.pre.with_extension("txt");
    let o = run(&["ssad", "--mesh", s(&f.mesh), "--pre", s(&f.pre), "--src", "3", "--out", s(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), f.n);
    for v in [0, 3, 7, f.n - 1] {
        let (idx, dist) = lines[v].split_once(' ').unwrap();
        assert_eq!(idx, v.to_string());
        assert_eq!(dist, query(&f, 3, v));
    }
}

#[test]
fn info_reports_saved_parameters() {
    let f = fixture();
    let o = run(&["info", "--pre", s(&f.pre)]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in [format!("n {}", f.n), "m 3".into(), "l 2".into(), "K 12".into(), "K_S 4".into(), "seed 7".into()] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }
    let o = run(&["info", "--pre", s(&f.pre), "--json", "--mesh", s(&f.mesh)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["header"]["l"], 2);
    assert_eq!(v["epsilon_history"].as_array().unwrap().len(), 3);
}

#[test]
fn single_threaded_precompute_is_reproducible() {
    let f = fixture();
    let again = f.pre.with_extension("again.gepc");
    let o = bin()
        .env("GE_THREADS", "1")
        .args([
            "precompute", "--mesh", s(&f.mesh), "--out", s(&again), "--dim", "3", "--rounds", "2", "--k", "12", "--ks",
            "4", "--seed", "7",
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&f.pre).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn eval_writes_report() {
    let f = fixture();
    let out = f.pre.with_extension("json");
    let o = run(&[
        "eval", "--mesh", s(&f.mesh), "--pre", s(&f.pre), "--pairs", "50", "--seed", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let eps = v["mean_relative_error"].as_f64().unwrap();
    assert!((0.0..0.5).contains(&eps), "{eps}");
    assert_eq!(v["timing"]["queries"], 50);
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let f = fixture();
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["query", "--mesh", s(&f.mesh)]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let o = run(&["query", "--mesh", s(&f.mesh), "--pre", s(&f.pre), "--src", "0", "--dst", "100000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(run(&["info", "--pre", "/nonexistent/x.gepc"]).status.code(), Some(2));

    let bytes = std::fs::read(&f.pre).unwrap();
    let cut = f.pre.with_extension("cut.gepc");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let o = run(&["query", "--mesh", s(&f.mesh), "--pre", s(&cut), "--src", "0", "--dst", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));

    let other = f.mesh.with_file_name("other.off");
    std::fs::write(&other, shapes::bumpy_sphere(1, 0.3, 5).to_off_string()).unwrap();
    let o = run(&["query", "--mesh", s(&other), "--pre", s(&f.pre), "--src", "0", "--dst", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different mesh"));
}
