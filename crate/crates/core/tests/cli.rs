use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use superheat::grid::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superheat"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).status().unwrap().code().unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn csv(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("table.csv")).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn classify_example() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("classify", &scenario("classify_power.json"), dir.path(), &[]), 0);
    let s = summary(dir.path());
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["result"]["verdict"]["regime"], "subcritical_exists");
    let t = csv(dir.path());
    assert_eq!(t[0][..3], ["nonlinearity", "N", "r"]);
    assert_eq!(t.len(), 2);
}

#[test]
fn norms_of_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("norms", &scenario("norms_constant.json"), dir.path(), &[]), 0);
    let t = csv(dir.path());
    assert_eq!(t[0], ["p", "rho", "norm"]);
    let norms: Vec<f64> = t[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    // h = 0.25: 49 nodes in the unit disc of cell area 1/16
    let vol = 49.0 / 16.0;
    assert!((norms[0] - 2.0 * vol).abs() < 1e-12);
    assert!((norms[1] - (4.0 * vol).sqrt()).abs() < 1e-12);
    assert_eq!(norms[2], 2.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run("classify", &scenario("classify_power.json"), out, &[]), 0);
    }
    for f in ["summary.json", "table.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn dumped_fields_reload_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"schema_version":1,"nonlinearity":"power(3)","grid":{"kind":"periodic","dim":2,"n":8,"side":4.0},
            "data":{"kind":"noise","amplitude":1.0,"base":0.25},"seed":7,"rho":1.0,"norms":["inf"],
            "output":{"dump_fields":true}}"#,
    );
    let out = dir.path().join("o");
    assert_eq!(run("norms", &cfg, &out, &[]), 0);
    let field = io::load(&out.join("data.grid")).unwrap();
    let copy = dir.path().join("copy.grid");
    io::save(&field, &copy, io::Payload::F64le).unwrap();
    assert_eq!(fs::read(out.join("data.grid")).unwrap(), fs::read(&copy).unwrap());
    let sup: f64 = csv(&out)[1][2].parse().unwrap();
    assert_eq!(sup.to_bits(), field.max().to_bits());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    assert_eq!(run("classify", &d.join("missing.json"), &d.join("o0"), &[]), 2);

    let unknown = write(
        d,
        "u.json",
        r#"{"schema_version":1,"nonlinearity":"power(2)","grid":{"kind":"periodic","dim":1,"n":8,"side":1.0},"data":{"kind":"constant","value":1.0},"colour":3}"#,
    );
    assert_eq!(run("norms", &unknown, &d.join("o1"), &[]), 2);

    let negative = write(
        d,
        "n.json",
        r#"{"schema_version":1,"nonlinearity":"power(2)","grid":{"kind":"periodic","dim":1,"n":16,"side":4.0},"data":{"kind":"constant","value":-1.0},"transform":{"lambdas":[2.0]}}"#,
    );
    assert_eq!(run("transform-check", &negative, &d.join("o2"), &[]), 3);
    assert_eq!(summary(&d.join("o2"))["error"]["kind"], "numeric");

    let weak = write(
        d,
        "w.json",
        r#"{"schema_version":1,"nonlinearity":"power(2)","grid":{"kind":"periodic","dim":2,"n":16,"side":8.0},"data":{"kind":"noise","amplitude":1.0,"base":0.5},"r":0.2}"#,
    );
    assert_eq!(run("classify", &weak, &d.join("o3"), &[]), 0);
    assert_eq!(run("classify", &weak, &d.join("o4"), &["--strict"]), 4);
    assert_eq!(summary(&d.join("o4"))["result"]["verdict"]["regime"], "indeterminate");

    assert_ne!(bin().arg("plot").arg("--config").arg(&weak).status().unwrap().code(), Some(0));
}

#[test]
fn sweep_writes_points_and_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sweep", &scenario("sweep_classify.json"), dir.path(), &["--jobs", "3"]), 0);
    let t = csv(dir.path());
    assert_eq!(t[0][..5], ["index", "r", "nonlinearity", "status", "exit_code"]);
    assert_eq!(t.len(), 7);
    assert_eq!(t[1][1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(t[2][2], "exp");
    assert_eq!(t[0].iter().filter(|c| *c == "r").count(), 1);
    let dirs = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 6);
    assert!(dir.path().join("r=1.5__nonlinearity=power_2_/summary.json").exists());
}

#[test]
fn sweep_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("sweep", &scenario("sweep_classify.json"), &a, &["--jobs", "1"]), 0);
    assert_eq!(run("sweep", &scenario("sweep_classify.json"), &b, &["--jobs", "4"]), 0);
    assert_eq!(fs::read(a.join("table.csv")).unwrap(), fs::read(b.join("table.csv")).unwrap());
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("simulate", &scenario("simulate_ode.json"), dir.path(), &[]), 0);
    let t = csv(dir.path());
    assert_eq!(t[0], ["t", "max_u", "min_u"]);
    let rows: Vec<(f64, f64)> = t[1..].iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert!(rows.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
    // u' = u², u(0) = 1 blows up at t = 1
    let t_end = rows.last().unwrap().0;
    assert!((t_end - 1.0).abs() < 1e-3, "t_end = {t_end}");
}

#[test]
fn tabulated_source_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let row = |cfg: &str, out: &Path| {
        let st = bin().current_dir(&root).arg("classify").arg("--config").arg(scenario(cfg)).arg("--out").arg(out).status().unwrap();
        assert_eq!(st.code(), Some(0));
        csv(out).pop().unwrap()
    };
    let (t, p) = (row("classify_table.json", &dir.path().join("t")), row("classify_power.json", &dir.path().join("p")));
    assert_eq!(t[0], "custom(table_square)");
    assert_eq!(t[7], p[7]);
    let a: f64 = t[4].parse().unwrap();
    assert!((a - 2.0).abs() < 1e-8);
    let integral = |r: &[String]| r[6].trim_start_matches("finite:").parse::<f64>().unwrap();
    assert!((integral(&t) - integral(&p)).abs() < 1e-10 * integral(&p));

    let missing = write(
        dir.path(),
        "m.json",
        r#"{"schema_version":1,"nonlinearity":"table(nope.csv)","grid":{"kind":"periodic","dim":1,"n":8,"side":4.0},"data":{"kind":"constant","value":1.0},"r":1.0}"#,
    );
    assert_eq!(run("classify", &missing, &dir.path().join("m"), &[]), 2);
}
