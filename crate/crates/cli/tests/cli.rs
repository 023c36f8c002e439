use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridge")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let o = ridge(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn p(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn generate_writes_points_truth_and_config() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "generate",
        "--dataset",
        "swiss-roll",
        "--n",
        "300",
        "--seed",
        "2",
        "--out",
        p(t.path()),
    ]);
    assert_eq!(rows(&t.path().join("points.csv")), 300);
    assert_eq!(rows(&t.path().join("truth.csv")), 300);
    let head = fs::read_to_string(t.path().join("points.csv")).unwrap();
    assert!(head.starts_with("x0,x1,x2\n"));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["version"], ridge_core::VERSION);
    assert_eq!(cfg["seed"], 2);
    assert_eq!(cfg["dataset"]["name"], "swiss_roll");
}

#[test]
fn noiseless_line_fully_converges() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "project",
        "--dataset",
        "line",
        "--noise",
        "0",
        "--dim",
        "1",
        "--out",
        p(t.path()),
    ]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["converged_fraction"], 1.0);
    assert_eq!(rows(&t.path().join("ridge.csv")), m["n"].as_u64().unwrap() as usize);
}

#[test]
fn project_reads_csv_input_and_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("in.csv");
    let mut s = String::from("a,b\n");
    for i in 0..60 {
        let x = i as f64 / 10.0;
        s.push_str(&format!("{x},{}\n", 0.1 * (7.0 * x).sin()));
    }
    fs::write(&data, s).unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        ok(&[
            "project",
            "--input",
            p(&data),
            "--dim",
            "1",
            "--bandwidth",
            "0.09",
            "--threads",
            threads,
            "--out",
            p(out),
        ]);
    }
    assert_eq!(fs::read(a.join("ridge.csv")).unwrap(), fs::read(b.join("ridge.csv")).unwrap());
    assert_eq!(rows(&a.join("ridge.csv")), 60);
}

#[test]
fn usage_errors_exit_with_two() {
    let t = tempfile::tempdir().unwrap();
    let out = p(t.path());
    // d must be below the ambient dimension.
    assert_eq!(
        ridge(&["project", "--dataset", "spiral", "--dim", "2", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ridge(&["project", "--dataset", "spiral", "--dim", "0", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ridge(&["project", "--dataset", "torus", "--dim", "1", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ridge(&["project", "--dim", "1", "--out", out]).status.code(), Some(2));
    assert_eq!(ridge(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ridge(&["pca", "--dataset", "plane", "--target-dim", "3", "--out", out])
            .status
            .code(),
        Some(2)
    );
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(ridge(&["plot", "--dir", p(empty.path())]).status.code(), Some(2));
}

#[test]
fn disconnected_geodesic_exits_with_three() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("two.csv");
    let mut s = String::from("x,y,z\n");
    for i in 0..10 {
        for j in 0..10 {
            s.push_str(&format!("{},{},0\n", 0.2 * i as f64, 0.2 * j as f64));
            s.push_str(&format!("{},{},0\n", 50.0 + 0.2 * i as f64, 0.2 * j as f64));
        }
    }
    fs::write(&data, s).unwrap();
    let o = ridge(&[
        "geodesic",
        "--input",
        p(&data),
        "--dim",
        "2",
        "--bandwidth",
        "0.09",
        "--knn",
        "6",
        "--from",
        "0",
        "--to",
        "1",
        "--out",
        p(&t.path().join("g")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flat_plane_geodesic_and_overlay() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("g");
    ok(&[
        "geodesic",
        "--dataset",
        "plane",
        "--n",
        "400",
        "--noise",
        "0",
        "--dim",
        "2",
        "--bandwidth",
        "0.09",
        "--from",
        "0",
        "--to",
        "1",
        "--out",
        p(&out),
    ]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let (len, eu) = (m["length"].as_f64().unwrap(), m["euclidean"].as_f64().unwrap());
    assert!((len - eu).abs() < 0.005 * eu, "{len} vs {eu}");
    let svg = fs::read_to_string(out.join("geodesic.svg")).unwrap();
    assert!(svg.contains("class=\"path\""));
    assert_eq!(rows(&out.join("geodesic.csv")), 50);
}

#[test]
fn unwrap_and_plot() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("u");
    ok(&["unwrap", "--dataset", "spiral", "--seed", "1", "--dim", "1", "--out", p(&out)]);
    let coords = fs::read_to_string(out.join("coords.csv")).unwrap();
    assert!(coords.starts_with("index,chart,l0,g0\n"));
    assert_eq!(rows(&out.join("coords.csv")), 500);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(m["spearman_truth"].as_f64().unwrap().abs() > 0.95);
    let charts = m["charts"].as_u64().unwrap() as usize;
    assert!(charts >= 2);

    ok(&["plot", "--dir", p(&out)]);
    let basins = fs::read_to_string(out.join("basins.svg")).unwrap();
    assert_eq!(basins.matches("class=\"marker\"").count(), 500);
    let fills: std::collections::BTreeSet<&str> = basins
        .split("fill=\"")
        .skip(1)
        .map(|s| &s[..s.find('"').unwrap()])
        .filter(|f| f.starts_with("hsl("))
        .collect();
    assert_eq!(fills.len(), charts);
    assert!(out.join("global.svg").is_file() && out.join("ridge.svg").is_file());
}

#[test]
fn pca_scores() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "pca",
        "--dataset",
        "plane",
        "--noise",
        "0",
        "--target-dim",
        "2",
        "--out",
        p(t.path()),
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("pca.json")).unwrap()).unwrap();
    let var: Vec<f64> = v["pca"]["variances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(var[0] >= var[1]);
    assert_eq!(
        fs::read_to_string(t.path().join("scores.csv")).unwrap().lines().next(),
        Some("pc0,pc1")
    );
}

#[test]
fn eval_mse_small_grid() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "eval-mse",
        "--n",
        "200",
        "--bandwidths",
        "0.25,0.5",
        "--noise",
        "0.05",
        "--out",
        p(t.path()),
    ]);
    let table = fs::read_to_string(t.path().join("mse.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "sigma2,noise,mse,converged_fraction,reference");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",0.0079"));
}
