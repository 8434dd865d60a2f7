use starcap::solver::read_dump;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const ANNULUS: &str = r#"
[factor]
kind = "euclidean"
[ring.outer]
constant = 2.0
[ring.inner]
constant = 1.0
[solver]
q = 2.0
grid = "32x16"
"#;

const OVAL_RING: &str = r#"
[ring.outer]
cos = [1.5, 0.0, 0.3]
[ring.inner]
cos = [0.5, 0.1]
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("exp.toml"), config).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("exp.toml")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, command: &str, out: &str, extra: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_starcap"));
        cmd.arg(command).arg("--config").arg(self.config()).arg("--out").arg(self.out(out)).args(extra);
        cmd.env_remove("STARCAP_THREADS");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        self.exec(command, "out", extra, &[])
    }

    fn read(&self, out: &str, file: &str) -> String {
        fs::read_to_string(self.out(out).join(file)).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap()).collect()
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn solve_writes_dump_log_and_manifest() {
    let run = Run::new(ANNULUS);
    let out = run.run("solve", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_dump(fs::read(run.out("out").join("field.dump")).unwrap().as_slice()).unwrap();
    assert_eq!((header.m, header.k), (32, 16));
    assert_eq!(rows.len(), 32 * 16);
    assert!(run.read("out", "solve.log").contains("converged true"));
    let manifest: toml::Value = run.read("out", "manifest.toml").parse().unwrap();
    assert_eq!(manifest["command"].as_str(), Some("solve"));
    assert_eq!(manifest["exit_code"].as_integer(), Some(0));
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().filter_map(|v| v.as_str()).collect();
    assert!(files.contains(&"field.dump") && files.contains(&"solve.log"));
}

#[test]
fn grid_override_reaches_the_dump_header() {
    let run = Run::new(ANNULUS);
    let out = run.run("solve", &["--grid", "16x8"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, _) = read_dump(fs::read(run.out("out").join("field.dump")).unwrap().as_slice()).unwrap();
    assert_eq!((header.m, header.k), (16, 8));
}

#[test]
fn coincident_radii_are_rejected() {
    let run = Run::new(&ANNULUS.replace("constant = 1.0", "constant = 2.0"));
    let out = run.run("solve", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("inner radius must be strictly less"), "{}", stderr(&out));
}

#[test]
fn exhausted_picard_budget_exits_two() {
    let run = Run::new(&ANNULUS.replace("q = 2.0", "q = 3.0\nmax_picard = 1"));
    let out = run.run("solve", &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(run.read("out", "solve.log").contains("NOT CONVERGED"));
    let manifest: toml::Value = run.read("out", "manifest.toml").parse().unwrap();
    assert_eq!(manifest["exit_code"].as_integer(), Some(2));
}

#[test]
fn verify_passes_on_the_oval() {
    for (factor, q) in [("kind = \"euclidean\"", "2.0"), ("kind = \"hyperbolic\"\nradius = 2.5", "3.0")] {
        let config = format!("[factor]\n{factor}\n{OVAL_RING}\n[solver]\nq = {q}\ngrid = \"32x32\"\n");
        let run = Run::new(&config);
        let out = run.run("verify", &[]);
        assert_eq!(code(&out), 0, "{factor} q={q}: {}", stderr(&out));
        let path = run.out("out").join("verify.csv");
        let rows = csv_rows(&path);
        assert_eq!(rows.len(), 9);
        assert!(csv_column(&path, "verdict").iter().all(|v| v == "true"));
        assert!(csv_column(&path, "star_defect").iter().all(|v| v.parse::<f64>().unwrap() > 0.0));
    }
}

#[test]
fn bump_diagnostic_fails_verification() {
    let config = r#"
[factor]
kind = "euclidean"
[ring.outer]
constant = 1.0
[ring.inner]
constant = 0.1
[solver]
grid = "32x32"
[run]
diagnostic = "bump"
"#;
    let run = Run::new(config);
    let out = run.run("verify", &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let path = run.out("out").join("verify.csv");
    let defect: f64 = csv_column(&path, "monotonicity_defect")[0].parse().unwrap();
    assert!(defect > 1e-2, "{defect}");
    assert!(csv_column(&path, "verdict").iter().all(|v| v == "false"));
}

#[test]
fn oracle_tables_the_radial_potential() {
    let run = Run::new(&format!("{ANNULUS}\n[oracle]\nn = 3\nresolution = 4\n"));
    let out = run.run("oracle", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = run.out("out").join("oracle_table.csv");
    let r = csv_column(&path, "r");
    let u = csv_column(&path, "u");
    assert_eq!(r.len(), 4);
    let r1: f64 = r[1].parse().unwrap();
    let u1: f64 = u[1].parse().unwrap();
    assert!((r1 - 4.0 / 3.0).abs() < 1e-15);
    assert!((u1 - 0.5).abs() < 1e-9, "{u1}");
    let err: f64 = csv_column(&run.out("out").join("oracle.csv"), "max_error")[0].parse().unwrap();
    assert!(err < 1e-2, "{err}");
}

#[test]
fn planar_oracle_tables_agree_across_factors_at_q_two() {
    let a = Run::new(ANNULUS);
    let b = Run::new(&ANNULUS.replace("kind = \"euclidean\"", "kind = \"sphere\"\nradius = 1.0"));
    assert_eq!(code(&a.run("oracle", &[])), 0);
    assert_eq!(code(&b.run("oracle", &[])), 0);
    let ua = csv_column(&a.out("out").join("oracle_table.csv"), "u");
    let ub = csv_column(&b.out("out").join("oracle_table.csv"), "u");
    assert_eq!(ua.len(), 101);
    for (x, y) in ua.iter().zip(&ub) {
        let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn oracle_rejects_non_round_rings() {
    let run = Run::new(&format!("[factor]\nkind = \"euclidean\"\n{OVAL_RING}\n[solver]\ngrid = \"16x8\"\n"));
    let out = run.run("oracle", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("round"), "{}", stderr(&out));
}

#[test]
fn condition_check_reports_the_sign_of_the_margin() {
    let zero = Run::new(ANNULUS);
    assert_eq!(code(&zero.run("check-condition", &[])), 0);
    let margin: f64 = csv_column(&zero.out("out").join("condition.csv"), "margin")[0].parse().unwrap();
    assert_eq!(margin, 0.0);

    let linear = Run::new(&format!("{ANNULUS}\n[rhs]\nkind = \"power\"\ns_power = 1.0\n"));
    assert_eq!(code(&linear.run("check-condition", &[])), 0);

    let sphere = ANNULUS
        .replace("kind = \"euclidean\"", "kind = \"sphere\"\nradius = 1.0")
        .replace("constant = 1.0", "constant = 0.5");
    let sphere = Run::new(&format!("{sphere}\n[rhs]\nkind = \"power\"\ns_power = 1.0\n"));
    let out = sphere.run("check-condition", &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let margin: f64 = csv_column(&sphere.out("out").join("condition.csv"), "margin")[0].parse().unwrap();
    assert!(margin < 0.0, "{margin}");
}

const SWEEP: &str = r#"
[factor]
kind = "euclidean"
[ring.outer]
cos = [1.5, 0.0, 0.3]
[ring.inner]
cos = [0.5, 0.1]
[solver]
grid = "16x16"
[sweep]
q = [2.5, 3.0, 4.0]
factors = [{ kind = "euclidean" }, { kind = "sphere", radius = 1.0 }, { kind = "hyperbolic", radius = 2.5 }]
"#;

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let run = Run::new(SWEEP);
    let one = run.exec("sweep", "one", &[], &[("STARCAP_THREADS", "1")]);
    let four = run.exec("sweep", "four", &[], &[("STARCAP_THREADS", "4")]);
    let again = run.exec("sweep", "again", &[], &[("STARCAP_THREADS", "4")]);
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(code(&four), 0);
    assert_eq!(code(&again), 0);
    let a = run.read("one", "sweep.csv");
    assert_eq!(a, run.read("four", "sweep.csv"));
    assert_eq!(a, run.read("again", "sweep.csv"));
    assert_eq!(csv_rows(&run.out("one").join("sweep.csv")).len(), 9);
}

#[test]
fn sweep_rejects_empty_lists_and_bad_thread_counts() {
    let empty = Run::new(&SWEEP.replace("q = [2.5, 3.0, 4.0]", "q = []"));
    let out = empty.run("sweep", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
    let run = Run::new(SWEEP);
    let out = run.exec("sweep", "out", &[], &[("STARCAP_THREADS", "zero")]);
    assert_eq!(code(&out), 1);
    let missing = Run::new(ANNULUS);
    assert_eq!(code(&missing.run("sweep", &[])), 1);
}

#[test]
fn envelope_defect_does_not_grow_under_refinement() {
    let config = r#"
[factor]
kind = "euclidean"
[ring.outer]
cos = [1.5, 0.0, 0.3]
[ring.inner]
cos = [0.5, 0.1]
[sweep]
q = [2.0]
grids = ["16x16", "32x32", "64x64"]
"#;
    let run = Run::new(config);
    let out = run.run("sweep", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let defects: Vec<f64> = csv_column(&run.out("out").join("sweep.csv"), "envelope_defect")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(defects.len(), 3);
    assert!(defects.windows(2).all(|w| w[1] <= w[0]), "{defects:?}");
}

#[test]
fn unknown_flags_and_keys_exit_one() {
    let run = Run::new(ANNULUS);
    assert_eq!(code(&run.run("solve", &["--bogus"])), 1);
    let bad = Run::new(&format!("{ANNULUS}\nunexpected = 1\n"));
    assert_eq!(code(&bad.run("solve", &[])), 1);
    let help = Command::new(env!("CARGO_BIN_EXE_starcap")).arg("--help").output().unwrap();
    assert_eq!(code(&help), 0);
}
