use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pwlnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwlnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("fig1.expr"),
        "max(0, x1 - x2) + max(0, x2) - max(0, -x2)\n",
    )
    .unwrap();
    fs::write(dir.path().join("max3.expr"), "max(0, x1, 2*x1)\n").unwrap();
    dir
}

#[test]
fn eval_fig1() {
    let d = workdir();
    assert_eq!(
        stdout(&pwlnet(d.path(), &["eval", "fig1.expr", "--at", "3,5"])),
        "5\n"
    );
    assert_eq!(
        stdout(&pwlnet(d.path(), &["eval", "fig1.expr", "--at", "-1/2,-7"])),
        "-1/2\n"
    );
}

#[test]
fn pieces_fig1() {
    let d = workdir();
    assert_eq!(
        stdout(&pwlnet(d.path(), &["pieces", "fig1.expr"])),
        "1*x2\n1*x1\n"
    );
}

#[test]
fn decompose_writes_expression_and_sidecar() {
    let d = workdir();
    let out = stdout(&pwlnet(
        d.path(),
        &["decompose", "max3.expr", "-o", "out.expr"],
    ));
    assert_eq!(out, "1*max(0, 2*x1)\n");
    let file = fs::read_to_string(d.path().join("out.expr")).unwrap();
    assert!(file.contains("1*max(0, 2*x1)"));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out.expr.json")).unwrap()).unwrap();
    assert_eq!(side[0]["subsets"][0]["S"], serde_json::json!([1, 3]));
    assert_eq!(side[0]["subsets"][0]["c"], 1);
}

#[test]
fn decompose_rejects_small_bounds() {
    let d = workdir();
    let o = pwlnet(d.path(), &["decompose", "max3.expr", "--max-terms", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convexify_both_routes() {
    let d = workdir();
    let split = stdout(&pwlnet(d.path(), &["convexify", "fig1.expr"]));
    assert_eq!(
        split,
        "g = 1*max(0, 1*x2) + 1*max(0, 1*x1 + -1*x2)\n\
         h = 1*max(-1*x2, 0)\n\
         convex(g) = true (1000 samples, seed 0)\n\
         convex(h) = true (1000 samples, seed 0)\n"
    );
    let by_pieces = stdout(&pwlnet(
        d.path(),
        &[
            "convexify",
            "fig1.expr",
            "--paper",
            "--samples",
            "300",
            "--seed",
            "4",
        ],
    ));
    assert!(by_pieces.contains("h = 1*max(1*x2, 1*x1)\n"));
    assert!(by_pieces.contains("convex(g) = true (300 samples, seed 4)"));
}

#[test]
fn compile_and_network_tools() {
    let d = workdir();
    let stats = stdout(&pwlnet(
        d.path(),
        &["compile", "fig1.expr", "-o", "net.json", "--samples", "50"],
    ));
    assert_eq!(stats, "depth 2 width 3 size 3\n");
    assert_eq!(
        stdout(&pwlnet(
            d.path(),
            &["net", "eval", "net.json", "--at", "3,5"]
        )),
        "5\n"
    );
    let dot = stdout(&pwlnet(d.path(), &["net", "dot", "net.json"]));
    assert!(dot.starts_with("digraph relu {"));
    assert_eq!(dot.matches("->").count(), 7);
    let pair = stdout(&pwlnet(
        d.path(),
        &["net", "newton", "net.json", "-o", "pair.json"],
    ));
    assert!(pair.starts_with("|P| = "));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("pair.json")).unwrap()).unwrap();
    assert_eq!(v["P"]["dim"], 2);

    fs::write(d.path().join("shift.expr"), "max(x1, 1)\n").unwrap();
    stdout(&pwlnet(
        d.path(),
        &["compile", "shift.expr", "-o", "shift.json"],
    ));
    let o = pwlnet(d.path(), &["net", "newton", "shift.json"]);
    assert_eq!(o.status.code(), Some(2));
    stdout(&pwlnet(
        d.path(),
        &["net", "homogenize", "shift.json", "-o", "flat.json"],
    ));
    assert_eq!(
        stdout(&pwlnet(
            d.path(),
            &["net", "eval", "flat.json", "--at", "-2"]
        )),
        "0\n"
    );
}

#[test]
fn compile_min_depth_in_four_dimensions() {
    let d = workdir();
    fs::write(d.path().join("max5.expr"), "max(0, x1, x2, x3, x4)\n").unwrap();
    let stats = stdout(&pwlnet(
        d.path(),
        &[
            "compile",
            "max5.expr",
            "--min-depth",
            "-o",
            "n.json",
            "--samples",
            "100",
        ],
    ));
    let depth: usize = stats.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(depth <= 4);
}

#[test]
fn witness_network() {
    let d = workdir();
    let out = stdout(&pwlnet(d.path(), &["witness", "--n", "4", "-o", "w.json"]));
    assert!(out.lines().nth(1).unwrap().starts_with("depth 3 "));
    assert_eq!(
        stdout(&pwlnet(
            d.path(),
            &["net", "eval", "w.json", "--at", "0,0,1,1"]
        )),
        "2\n"
    );
    assert_eq!(
        pwlnet(d.path(), &["witness", "--n", "6"]).status.code(),
        Some(2)
    );
}

#[test]
fn mip_build_has_thirty_integer_columns() {
    let d = workdir();
    let mps = stdout(&pwlnet(d.path(), &["mip", "build"]));
    let mut inside = false;
    let mut cols = BTreeSet::new();
    for line in mps.lines() {
        if line.contains("'INTORG'") {
            inside = true;
        } else if line.contains("'INTEND'") {
            inside = false;
        } else if inside {
            cols.insert(line.split_whitespace().next().unwrap().to_string());
        }
    }
    assert_eq!(cols.len(), 30);
    assert!(mps.starts_with("NAME          MAX5\n"));
}

#[test]
fn analog_solve_and_resume() {
    let d = workdir();
    stdout(&pwlnet(d.path(), &["mip", "analog2d", "-o", "a.mps"]));
    let first = stdout(&pwlnet(
        d.path(),
        &[
            "mip",
            "solve",
            "a.mps",
            "--nodes",
            "3",
            "--checkpoint",
            "c.json",
        ],
    ));
    assert!(first.contains("status budget exhausted"));
    let second = stdout(&pwlnet(
        d.path(),
        &["mip", "solve", "a.mps", "--resume", "c.json"],
    ));
    assert!(
        second.contains("status optimal\nbound 0\nincumbent 0\n"),
        "{second}"
    );
    assert!(second.contains("sessions 2"));
    assert!(second.contains("decoded phi 0"));
}

#[test]
fn table_lists_phi() {
    let d = workdir();
    let out = stdout(&pwlnet(d.path(), &["mip", "table"]));
    assert_eq!(
        out.lines()
            .filter(|l| l.starts_with("phi(") && l.ends_with(" = 0"))
            .count(),
        29
    );
    assert!(out.contains("phi(g01234) = 1\n"));
    assert!(out.ends_with("rank = 30\n"));
}

#[test]
fn malformed_input_exits_one() {
    let d = workdir();
    fs::write(d.path().join("bad.expr"), "max(0, x1\n  + ) ").unwrap();
    let o = pwlnet(d.path(), &["eval", "bad.expr", "--at", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.expr:2:5:"));
    fs::write(d.path().join("bad.json"), "{").unwrap();
    assert_eq!(
        pwlnet(d.path(), &["net", "dot", "bad.json"]).status.code(),
        Some(1)
    );
    fs::write(d.path().join("bad.mps"), "ROWS\n X OBJ\n").unwrap();
    assert_eq!(
        pwlnet(d.path(), &["mip", "solve", "bad.mps"]).status.code(),
        Some(1)
    );
}

#[test]
fn dimension_mismatch_exits_two() {
    let d = workdir();
    let o = pwlnet(d.path(), &["eval", "fig1.expr", "--at", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let d = workdir();
    let a = stdout(&pwlnet(
        d.path(),
        &["convexify", "fig1.expr", "--pieces", "--seed", "9"],
    ));
    let b = stdout(&pwlnet(
        d.path(),
        &["convexify", "fig1.expr", "--pieces", "--seed", "9"],
    ));
    assert_eq!(a, b);
    let m1 = stdout(&pwlnet(d.path(), &["mip", "build"]));
    let m2 = stdout(&pwlnet(d.path(), &["mip", "build"]));
    assert_eq!(m1, m2);
}
