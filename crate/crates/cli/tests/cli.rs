use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coefid(cfg: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coefid"))
        .arg("--config")
        .arg(cfg)
        .args(extra)
        .output()
        .unwrap()
}

fn write_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!("out = {}\n{body}", dir.join("out").display()),
    )
    .unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forward_scalar_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mode = forward\npreset = scalar_decay\ngamma = const:0.5\nN = 50\n",
    );
    let o = coefid(&cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let phi = fs::read_to_string(dir.path().join("out/phi.csv")).unwrap();
    let lines: Vec<&str> = phi.lines().collect();
    assert_eq!(lines[0], "t,value");
    assert_eq!(lines.len(), 52);
    assert!(!phi.contains('\r'));
    assert!(lines.iter().all(|l| !l.ends_with(',')));
}

#[test]
fn forward_parabolic_reports_positivity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mode = forward\npreset = heat_sine\nN = 40\nM = 20\nstepper = ie\n",
    );
    let o = coefid(&cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("discrete maximum principle (unperturbed scheme): holds"));
    assert!(summary.contains("trajectory nonnegative: yes"));
}

#[test]
fn invalid_steps_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "mode = forward\npreset = scalar_decay\nN = 1\n");
    let o = coefid(&cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("N:"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mode = forward\npreset = scalar_decay\ntolerance = 1e-3\n",
    );
    let o = coefid(&cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("tolerance"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = coefid(Path::new("/nonexistent/run.cfg"), &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn invert_round_trips_scalar_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "preset = scalar_decay\ngamma = const:0.5\nN = 200\n",
    );
    let o = coefid(&cfg, &["--mode", "invert"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gamma = fs::read_to_string(dir.path().join("out/gamma.csv")).unwrap();
    let mut lines = gamma.lines();
    assert_eq!(lines.next(), Some("t,gamma"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 201);
    assert!(values[1..200].iter().all(|g| (g - 0.5).abs() <= 1e-4));
    for name in ["xi.csv", "hypotheses.txt", "residual.txt", "phi.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}

#[test]
fn zero_crossing_measurement_exits_with_hypothesis_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut phi = String::from("t,value\n");
    for n in 0..=10 {
        let t = n as f64 / 10.0;
        phi.push_str(&format!("{t},{}\n", 1.0 - 2.0 * t));
    }
    fs::write(dir.path().join("phi.csv"), phi).unwrap();
    let cfg = write_cfg(
        dir.path(),
        &format!(
            "mode = invert\npreset = scalar_decay\nN = 10\nphi_file = {}\n",
            dir.path().join("phi.csv").display()
        ),
    );
    let o = coefid(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("measurement not separated from zero"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn misaligned_measurement_times_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("phi.csv"), "t,value\n0,1\n0.4,0.9\n1,0.8\n").unwrap();
    let cfg = write_cfg(
        dir.path(),
        &format!(
            "mode = invert\npreset = scalar_decay\nN = 2\nphi_file = {}\n",
            dir.path().join("phi.csv").display()
        ),
    );
    let o = coefid(&cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("does not match"));
}

#[test]
fn sign_change_truncates_gamma_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    // A rotation gives alpha(t) = cos t, so with phi = 1 xi changes sign at pi / 2.
    let mut phi = String::from("t,value\n");
    for n in 0..=40 {
        phi.push_str(&format!("{},1\n", n as f64 / 20.0));
    }
    fs::write(dir.path().join("phi.csv"), phi).unwrap();
    let cfg = write_cfg(
        dir.path(),
        &format!(
            "mode = invert\npreset = matrix\nmatrix = 0, 1; -1, 0\nu0 = 1, 0\nsource = 0, 0\nweight = 1, 0\nT = 2\nN = 40\nphi_file = {}\n",
            dir.path().join("phi.csv").display()
        ),
    );
    let o = coefid(&cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("out/hypotheses.txt")).unwrap();
    assert!(
        report.contains("warning: positivity horizon reached"),
        "{report}"
    );
    let gamma = fs::read_to_string(dir.path().join("out/gamma.csv")).unwrap();
    assert_eq!(gamma.lines().count() - 1, 32);
}

#[test]
fn convergence_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mode = convergence\npreset = scalar_decay\nN = 50\nlevels = 3\n",
    );
    let o = coefid(&cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(text.lines().next(), Some("steps,h,max_error,order"));
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        ["50", "100", "200"]
    );
    assert_eq!(rows[0][3], "NaN");
    for r in &rows[1..] {
        assert!(r[3].parse::<f64>().unwrap() >= 1.9);
    }
}

#[test]
fn single_level_convergence_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mode = convergence\npreset = scalar_decay\nlevels = 1\n",
    );
    let o = coefid(&cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(
        stderr(&o).contains("convergence mode needs ≥ 2 levels"),
        "{}",
        stderr(&o)
    );
}
