use std::path::Path;
use std::process::{Command, Output};

use slngeo::io::Table;
use slngeo_cli::commands::{simulate, sweep_table};
use slngeo_cli::config::{ScenarioConfig, SweepConfig};

fn slngeo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slngeo"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> Table {
    Table::read_csv(std::fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn classify_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "i2.json", "[[1, 0], [0, 1]]");
    write(d, "z2.json", "[[0, -1], [1, 0]]");
    write(d, "k2.json", "[[0, 1], [1, 0]]");
    write(d, "shear.json", "[[0, 1], [0, 0]]");
    let first_line = |kind: &str, a: &str, b: &str| {
        let o = slngeo(&["classify", "--kind", kind, "--a", a, "--b", b], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).lines().next().unwrap().to_string()
    };
    assert_eq!(first_line("exp", "i2.json", "z2.json"), "Rotational, kappa = -1");
    assert_eq!(first_line("line", "i2.json", "shear.json"), "Linear geodesic, index 2");
    assert_eq!(first_line("exp", "i2.json", "k2.json"), "NotGeodesic");
    let o = slngeo(&["classify", "--kind", "exp", "--a", "i2.json", "--b", "k2.json"], d);
    assert!(stdout(&o).contains("certificate: SymmetricLeaf"));
    let o = slngeo(&["classify", "--kind", "exp", "--a", "missing.json", "--b", "k2.json"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig1_run_is_periodic_with_overlapping_axes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "fig1.json", r#"{"family": "preset", "preset": "fig1", "integrator": {"dt_out": 0.05}}"#);
    let o = slngeo(&["run", "--config", "fig1.json", "--out", "out"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let period = summary["period"]["period"].as_f64().expect("period detected");
    assert!(period > 1.0);
    assert!(summary["period"]["return_residual"].as_f64().unwrap() < 1e-4);
    let t = read_csv(&d.join("out/fig1.csv"));
    let (a1, a2) = (t.column("axis_1").unwrap(), t.column("axis_2").unwrap());
    assert!(a1.iter().zip(&a2).all(|(x, y)| (x - y).abs() < 1e-9));
    assert!(d.join("out/fig1.summary.json").exists());
}

#[test]
fn fig3_axis_one_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = slngeo(&["figures", "--id", "3", "--out", "."], d);
    assert!(o.status.success());
    let t = read_csv(&d.join("fig3.csv"));
    assert_eq!(t.columns, ["t", "axis_1", "axis_2", "axis_3"]);
    let a1 = t.column("axis_1").unwrap();
    assert!(a1[0] < 1e-2, "axis 1 at the window start: {}", a1[0]);
    let peak = a1.iter().cloned().fold(0.0, f64::max);
    assert!(*a1.last().unwrap() < peak);
    for axis in ["axis_2", "axis_3"] {
        let v = t.column(axis).unwrap();
        assert!(v.iter().all(|x| x.is_finite() && *x > 0.0 && *x < 100.0));
    }
    assert_eq!(slngeo(&["figures", "--id", "4", "--out", "."], d).status.code(), Some(2));
}

#[test]
fn linear_run_has_zero_sff() {
    let config: ScenarioConfig = serde_json::from_str(
        r#"{"family": "linear", "b": [[2, 0], [0, 0.5]], "m": [[0, 1], [0, 0]], "t_span": [-5, 5],
            "integrator": {"dt_out": 0.1}}"#,
    )
    .unwrap();
    let (table, summary) = simulate(&config).unwrap();
    assert_eq!(summary.classification.as_deref(), Some("Linear geodesic, index 2"));
    assert_eq!(table.columns[0], "t");
    assert_eq!(table.columns[1], "A_11");
    assert_eq!(&table.columns[9..], ["energy", "det_drift", "zeta_drift", "angmom_drift", "sff", "virial_residual", "trace_omega"]);
    assert!(table.column("sff").unwrap().iter().all(|s| s.abs() < 1e-12));
}

#[test]
fn runs_are_byte_identical_and_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{
        "family": "custom_reduced",
        "beta": [[2, 0, 0], [0, 1, 0], [0, 0, 0.5]],
        "omega": [[0, 0.1, 0], [0.1, 0, 0.2], [0, 0.2, 0]],
        "zeta": [[0, 0.3, 0], [-0.3, 0, 0], [0, 0, 0]],
        "t_span": [0, 3],
        "integrator": {"dt_out": 0.05},
        "output": {"format": "json", "path": "traj.json"}
    }"#;
    write(d, "c.json", config);
    for out in ["a", "b"] {
        assert!(slngeo(&["run", "--config", "c.json", "--out", out], d).status.success());
    }
    let a = std::fs::read(d.join("a/traj.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/traj.json")).unwrap());
    let parsed = Table::read_json(a.as_slice()).unwrap();
    let (in_memory, _) = simulate(&serde_json::from_str(config).unwrap()).unwrap();
    assert_eq!(parsed, in_memory);
    assert_eq!(parsed.columns[1], "beta_11");
    assert_eq!(parsed.columns[19], "zeta_11");
}

#[test]
fn bad_configs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.json", r#"{"family": "preset", "preset": "fig9"}"#);
    let o = slngeo(&["run", "--config", "bad.json"], d);
    assert_eq!(o.status.code(), Some(2));
    write(d, "nottangent.json", r#"{"family": "custom_phase", "a": [[1, 0], [0, 1]], "adot": [[1, 0], [0, 1]]}"#);
    let o = slngeo(&["run", "--config", "nottangent.json"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not tangent"));
    write(d, "notsl.json", r#"{"family": "custom_phase", "a": [[2, 0], [0, 1]], "adot": [[0, 0], [0, 0]]}"#);
    let o = slngeo(&["run", "--config", "notsl.json"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not in SL(n)"));
    write(d, "dim.json", r#"{"family": "preset", "preset": "fig2", "n": 4}"#);
    assert_eq!(slngeo(&["run", "--config", "dim.json"], d).status.code(), Some(3));
}

#[test]
fn sweeps_are_deterministic() {
    let config: SweepConfig = serde_json::from_str(
        r#"{"kind": "phase", "dims": [2, 3], "count": 3, "t_end": 2, "seed": 7, "integrator": {"dt_out": 0.1}}"#,
    )
    .unwrap();
    let a = sweep_table(&config).unwrap();
    assert_eq!(a.rows.len(), 6);
    assert_eq!(a, sweep_table(&config).unwrap());
    assert!(a.column("energy_drift").unwrap().iter().all(|e| *e < 1e-8));
    let block: SweepConfig = serde_json::from_str(
        r#"{"kind": "block", "dims": [1, 2], "count": 2, "t_end": 2, "odd": true, "seed": 7}"#,
    )
    .unwrap();
    let b = sweep_table(&block).unwrap();
    assert_eq!(b.column("dim").unwrap(), vec![3.0, 3.0, 5.0, 5.0]);

    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.json", r#"{"kind": "phase", "dims": [2], "count": 2, "t_end": 1}"#);
    let o = slngeo(&["sweep", "--config", "s.json", "--out", "res"], dir.path());
    assert!(o.status.success());
    assert_eq!(read_csv(&dir.path().join("res/sweep.csv")).rows.len(), 2);
}
