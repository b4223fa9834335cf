use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const ALLEE: &str = r#"
[field.population]
r = { constant = 1.0 }
k = { constant = 2.0, harmonics = [{ amp = 0.5, freq = 1.7320508075688772, kind = "sin" }] }
b = { constant = 2.1, harmonics = [{ amp = 0.3, freq = 1.0, kind = "cos" }] }
s = 2.6
horizon = 2000.0

[numerics]
t_run = 2000.0
t_eval = 200.0
"#;

const CASE3: &str = r#"
[field.coefficients]
c = 2.6
b = { constant = 2.1, harmonics = [{ amp = 0.3, freq = 1.0, kind = "cos" }] }
s = 2.6

[numerics]
t_run = 2000.0
t_eval = 200.0
"#;

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpcubic"))
        .arg(args[0])
        .arg(cfg)
        .args(&args[1..])
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_reports_regimes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["classify"], &write_config(&dir, "a.toml", ALLEE), dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("kind: case1_below"));

    let o = run(&["classify"], &write_config(&dir, "b.toml", CASE3), dir.path());
    assert!(stdout(&o).contains("kind: case3_transcritical"));

    let sign_change = "[field.coefficients]\nc = 1.0\na = -1.0\n\
        b = { constant = 0.2, harmonics = [{ amp = 0.5, freq = 1.0, kind = \"cos\" }] }\n";
    let o = run(&["classify"], &write_config(&dir, "c.toml", sign_change), dir.path());
    let s = stdout(&o);
    assert!(s.contains("b_nonneg: false") && s.contains("kind: unclassified"), "{s}");
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", "[field]\n");
    assert_eq!(run(&["classify"], &cfg, dir.path()).status.code(), Some(2));
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    let o = run(&["scan", "--from", "0.1", "--h", "-1"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["classify"], &missing, dir.path()).status.code(), Some(2));
}

#[test]
fn single_step_scan_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&["scan", "--from", "0.1", "--steps", "1", "--jobs", "1"], &cfg, &a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(a.join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1.00000000000000e-1,3,"));
    assert!(fs::read_to_string(a.join("scan.svg")).unwrap().contains("<svg"));

    run(&["scan", "--from", "0.1", "--steps", "1", "--jobs", "2"], &cfg, &b);
    assert_eq!(csv, fs::read_to_string(b.join("scan.csv")).unwrap());
}

#[test]
fn scan_rows_in_epsilon_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    let o = run(&["scan", "--from", "0", "--to", "0.25", "--steps", "6"], &cfg, dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let rows: Vec<(f64, u8)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    let counts: Vec<u8> = rows.iter().map(|r| r.1).collect();
    assert_eq!(counts, [2, 3, 3, 3, 3, 1]);
    let svg = fs::read_to_string(dir.path().join("scan.svg")).unwrap();
    assert!(svg.contains("stroke-dasharray"), "the middle branch is drawn dashed");
}

#[test]
fn bisect_autonomous_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "auto.toml",
        "[field.coefficients]\nc = 1.0\nb = 0.0\na = -1.0\n\n[numerics]\nh = 0.0625\nt_run = 2048.0\nt_eval = 64.0\nreport_stride = 16\nreduced_t_run = 256.0\n",
    );
    let o = run(&["bisect", "--lo", "0.1", "--hi", "0.2", "--target-width", "1e-6"], &cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bisect.csv")).unwrap();
    let mid: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((mid - 4.0 / 27.0).abs() < 1e-5, "{mid}");

    let o = run(&["bisect", "--lo", "0.2", "--hi", "0.3"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn lyap_sign_flip_on_constant_branch() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "case3.toml", CASE3);
    let o = run(&["lyap", "--eps", "3.0", "--branch", "upper", "--window", "2000,200"], &cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("lyap.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("Negative"), "{csv}");

    let o = run(&["lyap", "--eps", "3.5", "--branch", "middle", "--window", "2000,200"], &cfg, dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("lyap.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("Positive"), "{csv}");
}

#[test]
fn simulate_writes_trajectories_and_outcomes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    let o = run(
        &["simulate", "--eps", "0.1", "--x0", "0", "--x0", "2.5", "--horizon", "2000"],
        &cfg,
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("outcomes.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[1].contains(",extinction,"), "{table}");
    assert!(lines[2].contains(",survival,"), "{table}");
    assert!(dir.path().join("trajectory_1.csv").exists());
}

#[test]
fn simulate_needs_population_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "case3.toml", CASE3);
    assert_eq!(run(&["simulate", "--x0", "1"], &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn population_threshold_bracket() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    let o = run(
        &["population", "--x0", "0.9", "--lo", "0.1", "--hi", "0.15", "--target-width", "1e-3"],
        &cfg,
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("population.csv")).unwrap();
    let f: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let (lo, hi): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
    assert!(0.1 < lo && hi < 0.15 && hi - lo <= 1e-3);
}

#[test]
fn effective_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "allee.toml", ALLEE);
    run(&["classify", "--t-eval", "100"], &cfg, dir.path());
    let written = fs::read_to_string(dir.path().join("experiment.toml")).unwrap();
    assert!(written.contains("t_eval = 100.0"));
    let o = run(&["classify"], &dir.path().join("experiment.toml"), &dir.path().join("again"));
    assert!(o.status.success());
    assert_eq!(written, fs::read_to_string(dir.path().join("again/experiment.toml")).unwrap());
}
