use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

use platebend::flow::StopReason;
use platebend_app::config::parse_config_value;
use platebend_app::driver::{run_dynamics, run_static};
use platebend_app::export::{format_vtk, read_vtk, sample_points};
use platebend_app::setup::Setup;

fn clamped_square() -> Value {
    json!({
        "model": "prestrain",
        "mesh": { "kind": "rectangle", "x": [0.0, 1.0], "y": [0.0, 1.0], "n": [3, 3] },
        "boundary": { "kind": "clamped" },
        "flow": { "tau": 0.1, "tol": 1e-8, "max_iter": 50 }
    })
}

fn setup(value: Value) -> Setup {
    Setup::new(&parse_config_value(value, Path::new(".")).unwrap()).unwrap()
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_platebend")).args(args).output().unwrap()
}

#[test]
fn clamped_flat_plate_stays_flat() {
    let run = run_static(&setup(clamped_square())).unwrap();
    assert_eq!(run.report.stopped_by, StopReason::Tolerance);
    assert!(run.report.last.total.abs() <= 1e-10, "{:?}", run.report.last);
    let names: Vec<_> = run.stages.iter().map(|s| s.name).collect();
    assert_eq!(names, ["bc_preprocess", "metric_preprocess", "flow"]);
}

#[test]
fn vtk_round_trip_is_exact() {
    let run = run_static(&setup(clamped_square())).unwrap();
    let disc = run.disc();
    let text = format_vtk(disc, &run.report.y, &[]);
    let (points, quads) = read_vtk(&text).unwrap();
    let expected = sample_points(disc, &run.report.y);
    assert_eq!(points.len(), 9 * disc.space.n_cells);
    assert_eq!(quads.len(), 4 * disc.space.n_cells);
    for (p, q) in points.iter().zip(&expected) {
        assert_eq!(p.map(f64::to_bits), q.map(f64::to_bits));
    }
    assert!(points.iter().all(|p| p[2].abs() < 1e-12));
}

#[test]
fn runs_are_deterministic() {
    let mut value = clamped_square();
    value["initial"] = json!({ "kind": "immersion", "immersion": { "expr": ["x1", "x2", "0.1 * x1 * x1"] } });
    value["boundary"]["kind"] = json!("free");
    value["flow"]["max_iter"] = json!(5);
    let a = run_static(&setup(value.clone())).unwrap();
    let b = run_static(&setup(value)).unwrap();
    assert_eq!(a.report.y.data, b.report.y.data);
    assert_eq!(a.report.iterations, 5);
    assert_eq!(a.report.stopped_by, StopReason::MaxIter);
}

#[test]
fn single_step_dynamics_without_data_change_matches_static() {
    let mut value = clamped_square();
    value["initial"] = json!({ "kind": "identity" });
    let static_run = run_static(&setup(value.clone())).unwrap();
    value["dynamics"] = json!({ "dt": 1.0, "steps": 1 });
    let mut seen = Vec::new();
    let steps = run_dynamics(&setup(value), &mut |m, run| {
        seen.push((m, run.report.y.data.clone()));
        Ok(())
    })
    .unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(seen[0].0, 1);
    let diff = seen[0].1.iter().zip(&static_run.report.y.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn cli_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plate.json");
    std::fs::write(&config, clamped_square().to_string()).unwrap();
    let out = dir.path().join("out");
    let status = cli(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    let iterations = summary["iterations"].as_u64().unwrap() as usize;
    assert_eq!(summary["stopped_by"], "tolerance");
    let csv = std::fs::read_to_string(out.join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iter,E_total,E_S,E_B,S_h,F,N_h,defect,step_norm,tau,wall_ms");
    assert_eq!(lines.count(), iterations);
    assert!(out.join("run.vtk").exists());
    assert!(out.join("run_stages.csv").exists());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, v: &Value| {
        let p = dir.path().join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    };

    let mut bad = clamped_square();
    bad["flow"]["tua"] = json!(0.1);
    let r = cli(&["run", write("bad.json", &bad).to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("flow"));

    let mut short = clamped_square();
    short["boundary"]["kind"] = json!("free");
    short["initial"] = json!({ "kind": "immersion", "immersion": { "expr": ["x1", "x2", "0.1 * x1 * x2"] } });
    short["flow"]["max_iter"] = json!(2);
    let out = dir.path().join("out");
    let r = cli(&["run", write("short.json", &short).to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));

    let r = cli(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));

    let blocked = write("blocked", &json!(null));
    let r =
        cli(&["run", write("plate.json", &clamped_square()).to_str().unwrap(), "--out", blocked.join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn hessian_study_reports_first_order() {
    let r = cli(&["hessian-study", "--levels", "3"]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    let rates: Vec<f64> = text.lines().skip(2).map(|l| l.split_whitespace().last().unwrap().parse().unwrap()).collect();
    assert_eq!(rates.len(), 2);
    assert!(rates.iter().all(|&r| r >= 0.9), "{text}");
}

#[test]
fn starshade_valley_points_follow_the_program() {
    let value = json!({
        "scenario": "starshade",
        "preprocess": { "max_iter": 20 },
        "flow": { "max_iter": 20 },
        "dynamics": { "dt": 0.05, "steps": 2 }
    });
    let mut radii = Vec::new();
    run_dynamics(&setup(value), &mut |m, run| {
        let disc = run.disc();
        let mesh = disc.mesh();
        for k in (1..=11).step_by(2) {
            let x = platebend::mesh::Vec2::new(7.0 * ((k - 1) as f64 * PI / 6.0).cos(), 7.0 * ((k - 1) as f64 * PI / 6.0).sin());
            let v = mesh.vertices.iter().position(|p| (p - x).norm() < 1e-9).unwrap();
            let (c, corner) =
                (0..mesh.n_cells()).find_map(|c| mesh.cells[c].iter().position(|&a| a == v).map(|i| (c, i))).unwrap();
            let xi = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]][corner];
            let p: Vec<f64> = (0..3).map(|i| disc.space.eval_scalar(run.report.y.component(i), c, xi).0).collect();
            radii.push((m, (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()));
        }
        Ok(())
    })
    .unwrap();
    for (m, r) in radii {
        let expected = (1.0 - 2.0 * 0.25 * 0.05 * m as f64) * 7.0;
        assert!((r - expected).abs() < 0.02 * expected, "step {m}: radius {r} vs {expected}");
    }
}
