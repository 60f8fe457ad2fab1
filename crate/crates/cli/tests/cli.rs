use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memovis_core::adapters::ModelSuite;
use memovis_core::scene::{write_glb, Mesh};
use memovis_core::viewpoint::ViewpointIndex;
use memovis_core::{SceneModel, Viewpoint};
use serde_json::Value;
use tempfile::TempDir;

fn memovis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memovis"))
        .args(args)
        .env_remove("MEMOVIS_DATA_DIR")
        .env_remove("MEMOVIS_PORT")
        .output()
        .expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<Value> {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn three_cubes(dir: &Path) -> PathBuf {
    let scene = SceneModel::new(vec![
        Mesh::cuboid([-1.5, 0.0, 0.0], [0.5; 3], [220, 40, 40]).with_name("A"),
        Mesh::cuboid([0.0, 0.0, 0.0], [0.5; 3], [40, 200, 60]).with_name("B"),
        Mesh::cuboid([1.5, 0.0, 0.0], [0.5; 3], [40, 60, 220]).with_name("C"),
    ])
    .unwrap();
    let path = dir.join("scene.glb");
    fs::write(&path, write_glb(&scene)).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_index(dir: &Path, scene: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let lines = stdout_lines(&memovis(&[
        "index", p(scene), "--out", p(&out), "--mock", "--bins", "1", "--step", "90", "--radii", "1",
        "--render-size", "48",
    ]));
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["rows"], 8);
    out
}

fn front_view_json() -> String {
    serde_json::to_string(&Viewpoint::new(FRAC_PI_2, FRAC_PI_2, 2.0, [0.0; 3])).unwrap()
}

#[test]
fn index_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let a = small_index(dir.path(), &scene, "a.mvix");
    let b = small_index(dir.path(), &scene, "b.mvix");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn suggest_agrees_with_brute_force_cosine() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let index_path = small_index(dir.path(), &scene, "s.mvix");
    let text = "the red cube looks too tall";
    let lines = stdout_lines(&memovis(&["suggest", p(&index_path), "--text", text, "--k", "3", "--mock"]));
    assert_eq!(lines.len(), 3);

    let index = ViewpointIndex::read(&index_path).unwrap();
    let q = ModelSuite::mock().text.embed_text(text).unwrap();
    let cos = |row: usize| {
        let e = index.embedding(row);
        let dot: f64 = q.iter().zip(e).map(|(a, b)| *a as f64 * *b as f64).sum();
        let nq: f64 = q.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        let ne: f64 = e.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        dot / (nq * ne)
    };
    let mut rows: Vec<usize> = (0..index.len()).collect();
    rows.sort_by(|&a, &b| cos(b).total_cmp(&cos(a)).then(a.cmp(&b)));
    for (rank, line) in lines.iter().enumerate() {
        assert_eq!(line["rank"], rank + 1);
        assert_eq!(line["row"], rows[rank]);
        assert!((line["score"].as_f64().unwrap() - cos(rows[rank])).abs() < 1e-5);
    }
}

#[test]
fn empty_suggest_text_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = memovis(&["suggest", p(&dir.path().join("none.mvix")), "--text", "  ", "--mock"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[validation]:"), "{}", stderr(&out));
}

#[test]
fn modify_is_deterministic_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let payload = dir.path().join("payload.json");
    fs::write(
        &payload,
        r#"{"strokes": {"add_strokes": [{"points": [[10, 20], [30, 20]], "radius": 3}]}}"#,
    )
    .unwrap();
    let view = front_view_json();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let lines = stdout_lines(&memovis(&[
            "modify", p(&scene), "--comment-text", "a lamp on top", "--viewpoint", &view, "--kind",
            "text-scribble", "--payload", p(&payload), "--seed", "7", "--render-size", "48", "--mock",
            "--out", p(&out),
        ]));
        assert_eq!(lines[0]["seed"], 7);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["reference.png", "syn.png", "seg.png", "provenance.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn modify_accepts_an_index_row_as_viewpoint() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let index = small_index(dir.path(), &scene, "r.mvix");
    let payload = dir.path().join("paint.json");
    fs::write(&payload, r#"{"strokes": {"add_strokes": [{"points": [[24, 24]], "radius": 4}]}}"#).unwrap();
    let out = dir.path().join("out");
    let lines = stdout_lines(&memovis(&[
        "modify", p(&scene), p(&index), "--comment-text", "make it wooden", "--viewpoint", "row:3",
        "--kind", "text-paint", "--payload", p(&payload), "--render-size", "48", "--mock", "--out",
        p(&out),
    ]));
    assert_eq!(lines[0]["kind"], "text-paint");
    assert!(out.join("provenance.json").is_file());

    let bad = memovis(&[
        "modify", p(&scene), p(&index), "--comment-text", "x", "--viewpoint", "row:8", "--kind",
        "text-paint", "--payload", p(&payload), "--mock", "--out", p(&dir.path().join("o2")),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("outside the index"));
}

#[test]
fn modify_without_an_anchor_is_refused() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let out = memovis(&[
        "modify", p(&scene), "--comment-text", "x", "--kind", "text-scribble", "--mock", "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error[validation]:") && err.contains("anchored viewpoint"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn text_paint_without_strokes_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let scene = three_cubes(dir.path());
    let view = front_view_json();
    let out = memovis(&[
        "modify", p(&scene), "--comment-text", "x", "--viewpoint", &view, "--kind", "text-paint",
        "--render-size", "48", "--mock", "--out", p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("paint strokes"), "{}", stderr(&out));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn bad_config_key_is_named_before_anything_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("memovis.toml");
    fs::write(&cfg, "k = 0\n").unwrap();
    let out = memovis(&["--config", p(&cfg), "serve", "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`k`"), "{}", stderr(&out));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = memovis(&["--config", p(&cfg), "serve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no_such_key"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = memovis(&["index"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[validation]:"));
    assert_eq!(memovis(&["--help"]).status.code(), Some(0));
    let out = memovis(&["modify", "x.glb", "--kind", "lasso", "--comment-text", "a", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_scene_is_reported_on_one_line() {
    let out = memovis(&["index", "/nonexistent/scene.glb", "--out", "/tmp/x.mvix", "--mock"]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(stderr(&out).lines().count(), 1, "{}", stderr(&out));
}
