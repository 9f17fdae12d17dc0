//! End-to-end tests driving the compiled `nestnorm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nestnorm"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary launches");
    assert!(
        out.status.success(),
        "expected success for {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary launches");
    assert_eq!(
        out.status.code(),
        Some(2),
        "expected exit code 2 for {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A small planar instance written by hand so tests are independent of the
/// generator: six points in two triangles, three candidate facilities.
fn tiny_instance(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    fs::write(
        &path,
        r#"{
  "planar": {
    "points": [[0.0,0.0],[1.0,0.0],[0.0,1.0],[8.0,0.0],[9.0,0.0],[8.0,1.0]],
    "facilities": [[0.3,0.3],[8.3,0.3],[4.0,4.0]]
  }
}"#,
    )
    .unwrap();
    path
}

#[test]
fn generate_default_reproduces_committed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    run_ok(&["generate", "--out", out_a.to_str().unwrap()]);
    run_ok(&["generate", "--out", out_b.to_str().unwrap()]);

    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "default generation must be deterministic");

    let committed = fs::read(fixture("two_gaussians.json")).unwrap();
    assert_eq!(
        a, committed,
        "default generation must reproduce the committed fixture byte for byte"
    );

    // A different seed changes the data, not just the recorded spec.
    let out_c = dir.path().join("c.json");
    run_ok(&["generate", "--seed", "7", "--out", out_c.to_str().unwrap()]);
    let c = fs::read(&out_c).unwrap();
    assert_ne!(a, c, "seed must influence the generated instance");
}

#[test]
fn generate_with_custom_spec_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{
  "seed": 5,
  "clusters": [
    { "center": [0.0, 0.0], "stddev": 0.1, "count": 3 },
    { "center": [4.0, 0.0], "stddev": 0.1, "count": 2 }
  ],
  "facility_mode": { "type": "on_points" }
}"#,
    )
    .unwrap();

    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    run_ok(&["generate", "--spec", spec.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    run_ok(&["generate", "--spec", spec.to_str().unwrap(), "--out", out_b.to_str().unwrap()]);
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    let parsed: serde_json::Value = serde_json::from_slice(&fs::read(&out_a).unwrap()).unwrap();
    assert_eq!(parsed["planar"]["points"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["planar"]["facilities"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["labels"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["generator"]["seed"], 5);
}

#[test]
fn run_missing_file_exits_two() {
    let out = run_err(&[
        "run",
        "/nonexistent/instance.json",
        "--objective",
        "l1",
        "--epsilon",
        "1",
        "-k",
        "1",
    ]);
    assert!(!out.stderr.is_empty(), "errors must be reported on stderr");
}

#[test]
fn run_rejects_malformed_objective() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path());
    run_err(&[
        "run",
        inst.to_str().unwrap(),
        "--objective",
        "top:3",
        "--epsilon",
        "1",
        "-k",
        "1",
    ]);
    run_err(&[
        "run",
        inst.to_str().unwrap(),
        "--objective",
        "ord:1,2",
        "--epsilon",
        "1",
        "-k",
        "2",
    ]);
}

#[test]
fn run_with_oracle_reports_ratio_and_appends_csv() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path());
    let json_out = dir.path().join("result.json");
    let csv_out = dir.path().join("runs.csv");

    let args = [
        "run",
        inst.to_str().unwrap(),
        "--objective",
        "topl:2",
        "--outer",
        "l1",
        "--epsilon",
        "1",
        "-k",
        "2",
        "--oracle",
        "--out-json",
        json_out.to_str().unwrap(),
        "--out-csv",
        csv_out.to_str().unwrap(),
    ];
    run_ok(&args);

    let result: serde_json::Value =
        serde_json::from_slice(&fs::read(&json_out).unwrap()).unwrap();
    let x = result["X"].as_array().unwrap();
    assert!(!x.is_empty() && x.len() <= 2, "at most k facilities open");
    assert_eq!(result["r"].as_array().unwrap().len(), x.len());
    assert_eq!(result["assignment"].as_array().unwrap().len(), 6);
    let cost = result["cost"].as_f64().unwrap();
    let opt = result["meta"]["oracle_cost"].as_f64().unwrap();
    let ratio = result["meta"]["ratio"].as_f64().unwrap();
    assert!(opt > 0.0);
    assert!(
        ratio >= 1.0 - 1e-9,
        "approximation can never beat the exact optimum: ratio {ratio}"
    );
    assert!((ratio - cost / opt).abs() <= 1e-9 * ratio.max(1.0));
    let factor = result["meta"]["factor_value"].as_f64().unwrap();
    assert!(ratio <= factor + 1e-9, "ratio {ratio} above claimed factor {factor}");

    // CSV: one header, one row per run, appended across invocations.
    let csv = fs::read_to_string(&csv_out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "# nestnorm-csv v1: instance,objective,outer,epsilon,k,cost,oracle_cost,ratio,wall_ms"
    );
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 9);
    assert_eq!(fields[1], "topl:2");
    assert_eq!(fields[2], "l1");
    let csv_cost: f64 = fields[5].parse().unwrap();
    assert!((csv_cost - cost).abs() <= 1e-9 * cost.max(1.0));

    run_ok(&args);
    let csv = fs::read_to_string(&csv_out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "second run appends a row, not a header");
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn run_covering_route_reports_radii() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path());
    let json_out = dir.path().join("result.json");
    run_ok(&[
        "run",
        inst.to_str().unwrap(),
        "--objective",
        "linf",
        "--outer",
        "ord:1,0.5",
        "--epsilon",
        "9",
        "-k",
        "2",
        "--out-json",
        json_out.to_str().unwrap(),
    ]);

    let result: serde_json::Value =
        serde_json::from_slice(&fs::read(&json_out).unwrap()).unwrap();
    let radii: Vec<f64> = result["meta"]["radii_sorted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(radii.len(), 2, "radius vector is padded to k");
    assert!(radii[0] >= radii[1] && radii[1] >= 0.0);
    let ord_value = result["meta"]["ord_value"].as_f64().unwrap();
    let expected = radii[0] + 0.5 * radii[1];
    assert!((ord_value - expected).abs() <= 1e-9 * expected.max(1.0));

    // Cover assignments keep every cluster's farthest point inside its ball,
    // so the nested cost never exceeds the ordered norm of the radii.
    let cost = result["cost"].as_f64().unwrap();
    assert!(cost <= ord_value + 1e-9 * ord_value.max(1.0));
}

/// Reduces an SVG document to a sequence of (tag, attribute, value) triples
/// with numeric values rounded, so the comparison survives cosmetic changes
/// to whitespace or attribute order but still pins geometry and styling.
fn svg_structure(svg: &str) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for raw in svg.split('<').skip(1) {
        let elem = raw.split('>').next().unwrap_or("");
        let mut parts = elem.split_whitespace();
        let tag = match parts.next() {
            Some(t) if !t.starts_with('/') && !t.starts_with('?') => t.to_string(),
            _ => continue,
        };
        let mut attrs: Vec<(String, String)> = Vec::new();
        for piece in elem.split('"').collect::<Vec<_>>().chunks(2) {
            if piece.len() != 2 {
                continue;
            }
            let key = piece[0]
                .split_whitespace()
                .last()
                .unwrap_or("")
                .trim_end_matches('=');
            let value = piece[1];
            let canon = match value.parse::<f64>() {
                Ok(x) => format!("{:.1}", x),
                Err(_) => value.to_string(),
            };
            attrs.push((key.to_string(), canon));
        }
        attrs.sort();
        for (k, v) in attrs {
            out.push((tag.clone(), k, v));
        }
    }
    out
}

#[test]
fn plot_matches_committed_golden_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out_svg = dir.path().join("plot.svg");
    run_ok(&[
        "plot",
        fixture("two_gaussians.json").to_str().unwrap(),
        fixture("two_gaussians_result.json").to_str().unwrap(),
        "--out-svg",
        out_svg.to_str().unwrap(),
    ]);
    let got = svg_structure(&fs::read_to_string(&out_svg).unwrap());
    let want = svg_structure(&fs::read_to_string(fixture("two_gaussians.svg")).unwrap());
    assert!(!want.is_empty());
    assert_eq!(got, want, "plot output diverged from the committed golden SVG");

    let pts = got.iter().filter(|(t, k, v)| t == "circle" && k == "class" && v == "pt").count();
    let balls = got.iter().filter(|(t, k, v)| t == "circle" && k == "class" && v == "ball").count();
    assert_eq!(pts, 24);
    assert_eq!(balls, 2);
}

#[test]
fn plot_requires_planar_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("matrix.json");
    // Distances drawn from a line embedding (points at 0, 1, 3; facilities
    // at 0.5 and 2.5), supplied as a full site-by-site matrix.
    fs::write(
        &inst,
        r#"{
  "matrix": {
    "n_points": 3,
    "n_facilities": 2,
    "matrix": [
      [0.0, 1.0, 3.0, 0.5, 2.5],
      [1.0, 0.0, 2.0, 0.5, 1.5],
      [3.0, 2.0, 0.0, 2.5, 0.5],
      [0.5, 0.5, 2.5, 0.0, 2.0],
      [2.5, 1.5, 0.5, 2.0, 0.0]
    ]
  }
}"#,
    )
    .unwrap();

    // Solving a matrix instance works fine...
    let json_out = dir.path().join("result.json");
    run_ok(&[
        "run",
        inst.to_str().unwrap(),
        "--objective",
        "l1",
        "--epsilon",
        "1",
        "-k",
        "1",
        "--out-json",
        json_out.to_str().unwrap(),
    ]);

    // ...but plotting needs 2-D coordinates.
    let out_svg = dir.path().join("plot.svg");
    let out = run_err(&[
        "plot",
        inst.to_str().unwrap(),
        json_out.to_str().unwrap(),
        "--out-svg",
        out_svg.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("planar"),
        "error should mention the missing planar embedding: {stderr}"
    );
}
