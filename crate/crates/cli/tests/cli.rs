use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run_in(dir: &Path, name: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, config).unwrap();
    let out_dir = dir.join(name);
    let output = Command::new(env!("CARGO_BIN_EXE_coordinet"))
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .output()
        .unwrap();
    (output, out_dir)
}

fn summary(out_dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap()
}

fn check_schema(s: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/summary.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let msgs: Vec<String> = match compiled.validate(s) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "summary does not match the schema: {msgs:?}\n{s:#}");
}

fn ok_run(dir: &Path, name: &str, config: &str) -> Value {
    let (out, out_dir) = run_in(dir, name, config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out_dir);
    check_schema(&s);
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(!csv.contains('\r') && csv.lines().count() >= 1);
    s
}

#[test]
fn info_on_identical_bits() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok_run(
        dir.path(),
        "info",
        "command = \"info\"\nsource = \"identical-uniform-2\"\n",
    );
    assert!((s["mutual_information"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(s["status"], "ok");
    let csv = fs::read_to_string(dir.path().join("info/results.csv")).unwrap();
    assert!(csv.starts_with("quantity,value\n"));
}

#[test]
fn wyner_on_triple_abc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"wyner\"\nsource = \"triple-abc\"\nmaster_seed = 1\n[parameters]\nrestarts = 8\n";
    let s = ok_run(dir.path(), "wyner", cfg);
    assert!((s["wyner_ci"].as_f64().unwrap() - 1.0).abs() < 1e-3, "{s}");
}

#[test]
fn fme_verify_with_seed_seven() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok_run(
        dir.path(),
        "fme",
        "command = \"fme-verify\"\nsource = \"independent\"\nmaster_seed = 7\n",
    );
    assert_eq!(s["agree_count"], 20);
    assert_eq!(s["couplings"], 20);
}

#[test]
fn every_command_writes_a_valid_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = ok_run(
        d,
        "inner",
        "command = \"region-inner\"\nsource = \"dsbs-0.1\"\n[parameters]\nrf1 = 0.6\nrb1 = inf\nrf2 = 0.6\nrb2 = inf\nrestarts = 1\n",
    );
    assert_eq!(s["verdict"], "inside");
    assert_eq!(s["rates"]["rb1"], "inf");
    let s = ok_run(
        d,
        "outer",
        "command = \"region-outer\"\nsource = \"identical-uniform-2\"\n[parameters]\nrf1 = 0.5\nrb1 = 0\nrf2 = 0.5\nrb2 = 0\n",
    );
    assert_eq!(s["verdict"], "outside-heuristic");
    let s = ok_run(
        d,
        "frontier",
        r#"command = "frontier"
source = "independent"
[parameters]
fixed = { rb1 = 0, rb2 = 0 }
grid = [{ axis = "rf1", lo = 0, hi = 1, points = 2 }, { axis = "rf2", lo = 0, hi = 1, points = 2 }]
inner_restarts = 1
"#,
    );
    assert_eq!(s["points"], 4);
    assert_eq!(s["soundness_violations"], 0);
    let csv = fs::read_to_string(d.join("frontier/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let s = ok_run(
        d,
        "osrb",
        r#"command = "osrb"
source = "dsbs-0.1"
[parameters]
components = [["Y1"], ["Y2"]]
rates = [0.2, 0.2]
n = [2, 4]
seeds = 5
"#,
    );
    assert_eq!(s["per_n"][1]["cells_ok"], 5);
    let s = ok_run(
        d,
        "sw",
        r#"command = "osrb"
source = "identical-uniform-2"
[parameters]
mode = "slepian-wolf"
components = [["Y1"]]
side = ["Y2"]
rates = [0.2]
n = [6]
seeds = 3
"#,
    );
    assert!(s["per_n"][0]["median"].as_f64().unwrap() >= 0.99);
    let s = ok_run(
        d,
        "protocol",
        r#"command = "protocol"
source = "identical-uniform-2"
[parameters]
n = 3
rates = { rf1 = 1.2, rb1 = 0, rf2 = 1.2, rb2 = 0 }
"#,
    );
    assert!((s["mass"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(s["coupling_caps"][2].as_u64().unwrap() >= 2);
    let s = ok_run(
        d,
        "sweep",
        r#"command = "sweep"
source = "identical-uniform-2"
[parameters]
n = [2, 3]
seeds = 4
rates = { rf1 = 1.2, rb1 = 0, rf2 = 1.2, rb2 = 0 }
"#,
    );
    assert_eq!(s["cells"], 8);
    let csv = fs::read_to_string(d.join("sweep/results.csv")).unwrap();
    assert!(csv.starts_with("n,seed,rb1,rb2,rf1,rf2,rt0,rt1,rt2,eff_rb1,"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn replaying_the_echoed_config_reproduces_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "protocol"
source = "identical-uniform-2"
master_seed = 4
[parameters]
n = 3
rates = { rf1 = 1.0, rb1 = 0.3, rf2 = 1.0, rb2 = 0.3 }
tilde = { rt0 = 0.2 }
"#;
    let (out, first) = run_in(dir.path(), "first", cfg, &["--threads", "2"]);
    assert!(out.status.success());
    let echo = first.join("config.toml");
    let before = fs::read(first.join("summary.json")).unwrap();
    fs::remove_file(first.join("summary.json")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_coordinet"))
        .arg(&echo)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(first.join("summary.json")).unwrap(), before);
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (out, o) = run_in(
        dir.path(),
        "seeded",
        "command = \"info\"\nsource = \"independent\"\nmaster_seed = 1\n",
        &["--seed", "5"],
    );
    assert!(out.status.success());
    assert_eq!(summary(&o)["master_seed"], 5);
    assert!(fs::read_to_string(o.join("config.toml"))
        .unwrap()
        .contains("master_seed = 5"));
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (out, o) = run_in(
        dir.path(),
        "bad",
        "command = \"info\"\nsource = \"dsbs-0.1\"\nfoo = 3\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`foo`"));
    assert!(!o.exists());
    let (out, _) = run_in(dir.path(), "syntax", "command = \n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn failing_cells_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "sweep"
source = "identical-uniform-2"
[parameters]
n = [2, 8]
seeds = 2
rates = { rf1 = 1.0, rb1 = 0, rf2 = 1.0, rb2 = 0 }
caps = { outputs = 1024 }
"#;
    let (out, o) = run_in(dir.path(), "partial", cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&o);
    check_schema(&s);
    assert_eq!(s["status"], "partial");
    assert_eq!(s["failed_cells"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_to_string(o.join("results.csv")).unwrap().lines().count(), 3);
}

#[test]
fn pmf_files_as_sources_and_couplings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("q.pmf"),
        coordinet::pmf::write_pmf(&coordinet::sources::dsbs(0.2).unwrap()),
    )
    .unwrap();
    let s = ok_run(d, "file", "command = \"info\"\nsource = \"q.pmf\"\n");
    let want = 1.0 - coordinet::info::binary_entropy(0.2);
    assert!((s["mutual_information"].as_f64().unwrap() - want).abs() < 1e-12);

    // W = Y1 = Y2, U and V constant, written as a joint pmf.
    let a = |n: &str, k| coordinet::Alphabet::new(n, k).unwrap();
    let joint = coordinet::JointPmf::from_fn(vec![a("U", 1), a("V", 1), a("W", 2), a("Y1", 2), a("Y2", 2)], |i| {
        if i[2] == i[3] && i[3] == i[4] {
            0.5
        } else {
            0.0
        }
    })
    .unwrap();
    fs::write(d.join("coupling.pmf"), coordinet::pmf::write_pmf(&joint)).unwrap();
    let s = ok_run(
        d,
        "copy",
        r#"command = "protocol"
source = "identical-uniform-2"
[parameters]
coupling = "coupling.pmf"
n = 2
rates = { rf1 = 0, rb1 = 0, rf2 = 0, rb2 = 0 }
"#,
    );
    assert!((s["tv_marginal"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}
