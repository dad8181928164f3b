use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dephasing(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dephasing"));
    cmd.args(args).env_remove("DEPHASING_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("DEPHASING_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Header row and data rows, comments stripped.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = table(path);
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn two_qubit_short_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dephasing(&["run", "two-qubit", "--t-end", "20", "--out", out], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let series = dir.path().join("two_qubit_timeseries.csv");
    let (header, rows) = table(&series);
    assert_eq!(header, ["t", "P_common", "P_independent", "Q_common", "Q_independent"]);
    assert_eq!(rows.len(), 201);
    let (pc, pi) = (column(&series, "P_common"), column(&series, "P_independent"));
    assert!(pc.iter().zip(&pi).all(|(a, b)| a >= b));

    let rates = dir.path().join("two_qubit_rates.csv");
    let (header, rows) = table(&rates);
    assert_eq!(&header[..4], ["quantity", "bath", "closed_form", "fitted"]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let (exact, fitted): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((fitted - exact).abs() / exact < 0.01, "{r:?}");
    }
    let text = fs::read_to_string(&rates).unwrap();
    assert!(text.starts_with("# collective-dephasing "));
    assert!(text.contains("#   t_end = 20.0\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "chain", "--t-end", "20", "--initial-states", "1"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        assert_eq!(code(&dephasing(&args, Some(dir.path()))), 0);
        snapshots.push(
            ["chain_timeseries.csv", "chain_rates.csv", "chain_transitions.csv"]
                .map(|f| fs::read(dir.path().join(f)).unwrap()),
        );
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn decoherence_free_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = dephasing(&["run", "two-qubit", "--chi", "0.02,0.02", "--bath", "common"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let p = column(&dir.path().join("two_qubit_timeseries.csv"), "P_common");
    assert!(p.iter().all(|x| (x - 1.0).abs() <= 1e-8));
}

#[test]
fn chain_rates_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = dephasing(&["run", "chain", "--t-end", "100"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let rates = dir.path().join("chain_rates.csv");
    let (_, rows) = table(&rates);
    let chi: Vec<f64> = (1..=3).map(|i| 0.1 * (i as f64 * std::f64::consts::PI / 6.0).sin()).collect();
    let w = 0.2 * 2f64.sqrt();
    let j = |x: f64| x * w / w.tanh();
    let gamma2_common = 0.5 * j(chi[0]) + 0.5 * j(chi[2]) - (j(chi[0]) * j(chi[2])).sqrt();
    let row = rows.iter().find(|r| r[0] == "2" && r[1] == "common").unwrap();
    let closed: f64 = row[3].parse().unwrap();
    assert!((closed - gamma2_common).abs() < 1e-12);
    for r in &rows {
        let sup: f64 = r[7].parse().unwrap();
        assert!(sup < 0.05);
    }
}

#[test]
fn scan_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.toml");
    fs::write(&cfg, "scenario = \"scan-n\"\nn_min = 3\nn_max = 7\n").unwrap();
    let out = dir.path().join("res");
    let o = dephasing(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    let csv = out.join("scan_n.csv");
    assert_eq!(column(&csv, "N"), [3.0, 4.0, 5.0, 6.0, 7.0]);
    let (com, ind) = (column(&csv, "gamma1_common"), column(&csv, "gamma1_independent"));
    assert!(com.iter().zip(&ind).all(|(a, b)| a <= b));
    assert!(fs::read_to_string(&csv).unwrap().contains("# check gamma1_independent strictly decreasing: holds"));
}

#[test]
fn environment_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = dephasing(&["run", "scan-n", "--n-max", "4"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("scan_n.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = Some(dir.path());
    assert_eq!(code(&dephasing(&["run"], d)), 1);
    assert_eq!(code(&dephasing(&["run", "two-qubit", "--bogus"], d)), 1);
    assert_eq!(code(&dephasing(&["run", "two-qubit", "--n-qubits", "3"], d)), 1);
    assert_eq!(code(&dephasing(&["run", "two-qubit", "--generator", "nope"], d)), 1);
    assert_eq!(code(&dephasing(&["run", "chain", "--scenario", "scan-n"], d)), 1);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scenario = \"chain\"\nlambada = 0.2\n").unwrap();
    assert_eq!(code(&dephasing(&["run", "--config", bad.to_str().unwrap()], d)), 1);
    // unstable step size breaks positivity
    assert_eq!(code(&dephasing(&["run", "two-qubit", "--generator", "lindblad", "--dt", "20"], d)), 2);
    assert_eq!(code(&dephasing(&["run", "scan-n", "--n-max", "65"], d)), 3);
    assert_eq!(code(&dephasing(&["run", "chain", "--n-qubits", "12", "--generator", "redfield"], d)), 1);
}

#[test]
fn list_shows_registries() {
    let o = dephasing(&["list"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["lindblad", "redfield", "rk4", "expm", "sine", "uniform"] {
        assert!(text.contains(name), "{name}");
    }
}
