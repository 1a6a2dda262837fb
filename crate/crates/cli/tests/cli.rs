//! End-to-end runs of the `coex` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coex::linalg::Matrix;
use coex::lmo::FeasibleSet;
use coex::problem::{Func, ProblemSpec, Quadratic};
use serde_json::Value;
use tempfile::TempDir;

/// Generator flags for a plan small enough to solve in milliseconds.
const SMALL: [&str; 8] = [
    "--half-length",
    "3",
    "--angles",
    "6",
    "--rows",
    "3",
    "--cols",
    "4",
];

fn coex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn trace_rows(dir: &Path) -> usize {
    let text = fs::read_to_string(dir.join("trace.csv")).unwrap();
    text.lines().count() - 1
}

#[test]
fn generate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let first = stdout_json(&coex(&["generate", "--seed", "5", "--out-dir", path(&a)]));
    stdout_json(&coex(&["generate", "--seed", "5", "--out-dir", path(&b)]));
    stdout_json(&coex(&["generate", "--seed", "6", "--out-dir", path(&c)]));
    assert_eq!(first["voxels"], 4096);
    for name in ["instance.json", "dose.bin"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap()
        );
    }
    assert_ne!(
        fs::read(a.join("instance.json")).unwrap(),
        fs::read(c.join("instance.json")).unwrap()
    );
}

#[test]
fn single_iteration_writes_one_trace_row() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["solve", "--iters", "1", "--out-dir", path(tmp.path())];
    args.extend(SMALL);
    let summary = stdout_json(&coex(&args));
    assert_eq!(summary["iterations"], 1);
    assert_eq!(trace_rows(tmp.path()), 1);
    for name in ["summary.json", "plan.json", "dvh.csv"] {
        assert!(tmp.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn saved_instances_solve_with_every_solver() {
    let tmp = TempDir::new().unwrap();
    let inst = tmp.path().join("inst");
    let mut gen = vec!["generate", "--seed", "2", "--out-dir", path(&inst)];
    gen.extend(SMALL);
    stdout_json(&coex(&gen));
    for solver in ["coexcg", "coexdurcg", "adaptive", "conex", "classic-fw"] {
        let out = tmp.path().join(solver);
        let summary = stdout_json(&coex(&[
            "solve",
            "--instance",
            path(&inst),
            "--solver",
            solver,
            "--iters",
            "20",
            "--out-dir",
            path(&out),
        ]));
        assert_eq!(summary["iterations"], 20, "{solver}");
        assert!(
            summary["objective"].as_f64().unwrap().is_finite(),
            "{solver}"
        );
    }
}

#[test]
fn bad_configuration_exits_with_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(coex(&["solve", "--iters", "0"]).status.code(), Some(2));
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"iterations": 5}"#).unwrap();
    assert_eq!(
        coex(&["solve", "--config", path(&cfg)]).status.code(),
        Some(2)
    );
    assert_eq!(
        coex(&["solve", "--problem", path(&cfg), "--phi", "0.1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oversized_projection_problems_exit_with_4() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec![
        "solve",
        "--solver",
        "conex",
        "--dim-cap",
        "10",
        "--out-dir",
        path(tmp.path()),
    ];
    args.extend(SMALL);
    let out = coex(&args);
    assert_eq!(out.status.code(), Some(4));
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"iters": 7, "solver": "adaptive", "emit": ["trace", "summary"],
            "generator": {"half_length": 3.0, "angles": 6, "rows": 3, "cols": 4}}"#,
    )
    .unwrap();
    let summary = stdout_json(&coex(&[
        "solve",
        "--config",
        path(&cfg),
        "--iters",
        "3",
        "--out-dir",
        path(tmp.path()),
    ]));
    assert_eq!(summary["iterations"], 3);
    assert_eq!(summary["solver"], "adaptive");
    assert_eq!(trace_rows(tmp.path()), 3);
    assert!(!tmp.path().join("plan.json").exists());
}

#[test]
fn untimed_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let runs: Vec<_> = ["x", "y"]
        .iter()
        .map(|name| {
            let dir = tmp.path().join(name);
            let mut args = vec![
                "solve",
                "--seed",
                "4",
                "--iters",
                "30",
                "--no-timing",
                "--out-dir",
                path(&dir),
            ];
            args.extend(SMALL);
            stdout_json(&coex(&args));
            dir
        })
        .collect();
    for name in ["trace.csv", "summary.json", "plan.json", "dvh.csv"] {
        assert_eq!(
            fs::read(runs[0].join(name)).unwrap(),
            fs::read(runs[1].join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn dense_problem_files_are_solved() {
    let tmp = TempDir::new().unwrap();
    // min ½‖x − c‖² over the simplex; c lies inside it, so x* = c.
    let c = [0.5, 0.3, 0.2];
    let spec = ProblemSpec {
        objective: Func::Quadratic(
            Quadratic::new(
                Some(Matrix::identity(3)),
                c.iter().map(|v| -v).collect(),
                0.5 * c.iter().map(|v| v * v).sum::<f64>(),
            )
            .unwrap(),
        ),
        affine: None,
        constraints: vec![],
        set: FeasibleSet::Simplex { dim: 3 },
        overrides: Default::default(),
    };
    let file = tmp.path().join("qp.json");
    fs::write(&file, spec.to_json().unwrap()).unwrap();
    for solver in ["coexcg", "conex"] {
        let out = tmp.path().join(solver);
        let summary = stdout_json(&coex(&[
            "solve",
            "--problem",
            path(&file),
            "--solver",
            solver,
            "--iters",
            "400",
            "--out-dir",
            path(&out),
        ]));
        assert!(summary["objective"].as_f64().unwrap() < 1e-3, "{solver}");
        assert!(out.join("solution.json").exists());
    }
}

#[test]
fn ratefit_recovers_inverse_square_root_decay() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("trace.csv");
    let mut text = String::from("k,f,infeas,q_norm,r_norm,vertex_id,millis\n");
    for k in 1..=256usize {
        let s = 1.0 / (k as f64).sqrt();
        text += &format!("{k},{},{},0,0,0,0\n", 1.0 + 2.0 * s, 3.0 * s);
    }
    fs::write(&trace, text).unwrap();
    let out_file = tmp.path().join("fit.json");
    let report = stdout_json(&coex(&[
        "ratefit",
        path(&trace),
        "--f-star",
        "1",
        "--out",
        path(&out_file),
    ]));
    assert_eq!(report["points"].as_array().unwrap().len(), 9);
    let slope = |key: &str| report[key]["slope"].as_f64().unwrap();
    assert!((slope("infeasibility") + 0.5).abs() < 1e-9);
    assert!((slope("objective_gap") + 0.5).abs() < 1e-9);
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_file).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn ratefit_needs_three_points() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("trace.csv");
    fs::write(
        &trace,
        "k,f,infeas,q_norm,r_norm,vertex_id,millis\n1,1,1,0,0,0,0\n2,1,1,0,0,0,0\n",
    )
    .unwrap();
    assert_eq!(coex(&["ratefit", path(&trace)]).status.code(), Some(2));
}
