use covllg::binfmt::FieldFile;
use covllg::config::RunConfig;
use covllg::run::{EXIT_CONFIG, EXIT_FRAME, EXIT_NO_CONTRACTION};
use covllg_core::llg::SpinField;
use covllg_core::{ComplexField, GridSpec, VectorField3};
use rustfft::num_complex::Complex64;
use serde_json::Value;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const SMALL_RUN: &str = r#"
[grid]
dimension = 2
points = 16

[solver]
dt = 0.01
t_end = 0.3
record_every = 2

[scenario]
kind = "random-small"
amplitude_mode = "target"
target_grad_ln = 0.1
seed = 4
"#;

const WAVE_RUN: &str = r#"
[grid]
dimension = 2
points = 16

[solver]
lambda = 1.0
dt = 0.01
t_end = 0.5
record_every = 5

[scenario]
kind = "linear-wave"
amplitude_mode = "fixed"
amplitude = 0.001
wavevector = [1.0, 0.0, 0.0]
"#;

const CONSTANT_RUN: &str = r#"
[grid]
dimension = 2
points = 8

[solver]
dt = 0.01
t_end = 0.1
record_every = 1

[scenario]
kind = "bubble"
amplitude_mode = "fixed"
amplitude = 0.0
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covllg"))
}

struct Run {
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn summary(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out.join("summary.json")).unwrap()).unwrap()
    }

    fn csv(&self, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_path(self.out.join(name)).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        (header, rows)
    }
}

fn run(dir: &Path, name: &str, config: &str, args: &[&str]) -> Run {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(name);
    let output = bin()
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    Run { out, output }
}

fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/summary.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).unwrap()
}

fn assert_valid_summary(run: &Run) {
    let summary = run.summary();
    let schema = schema();
    let msgs: Vec<String> = match schema.validate(&summary) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "summary fails schema: {msgs:?}");
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn gen_config_prints_and_writes_the_reference() {
    let out = bin().arg("gen-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
    let dir = TempDir::new().unwrap();
    let status = bin().arg("gen-config").arg("--out").arg(dir.path()).status().unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(dir.path().join("reference.toml")).unwrap(), text);
}

#[test]
fn constant_data_has_zero_energy() {
    let dir = TempDir::new().unwrap();
    let r = run(dir.path(), "const", CONSTANT_RUN, &["run-llg"]);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let (header, rows) = r.csv("series.csv");
    assert_eq!(&header[..5], ["t", "E", "linf_grad", "ln_grad", "h1_dev"]);
    let e = column(&header, "E");
    let d = column(&header, "delta");
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert_eq!(row[e].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[d], "0.62");
    }
    assert_valid_summary(&r);
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let a = run(dir.path(), "a", SMALL_RUN, &["run-llg"]);
    let b = run(dir.path(), "b", SMALL_RUN, &["run-llg"]);
    assert_eq!(a.code(), 0);
    assert_eq!(b.code(), 0);
    for name in ["series.csv", "weighted.csv", "final.llgf"] {
        assert_eq!(fs::read(a.out.join(name)).unwrap(), fs::read(b.out.join(name)).unwrap(), "{name}");
    }
    let c = run(dir.path(), "c", SMALL_RUN, &["run-llg", "--seed", "5"]);
    assert_eq!(c.code(), 0);
    assert_ne!(fs::read(a.out.join("series.csv")).unwrap(), fs::read(c.out.join("series.csv")).unwrap());
    assert_eq!(c.summary()["config"]["scenario"]["seed"], 5);
    assert_valid_summary(&a);
}

#[test]
fn linear_wave_decay_rate_matches_the_linear_solution() {
    let dir = TempDir::new().unwrap();
    let r = run(dir.path(), "wave", WAVE_RUN, &["monitor"]);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let s = r.summary();
    // |m − m_∞|_∞ ≈ ε e^{−λ|k|² t}
    let rate = s["results"]["decay"]["exponential_rate"].as_f64().unwrap();
    assert!((rate - 1.0).abs() < 1e-3, "{rate}");
    assert!(s["results"]["theorem"]["h1_non_increasing"].as_bool().unwrap());
    assert!(s["results"]["bootstrap"]["holds"].as_bool().unwrap());
    assert_valid_summary(&r);
}

#[test]
fn checkpoints_round_trip_and_resume_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let config = format!("{SMALL_RUN}\n[output]\ncheckpoint_every = 5\n");
    let full = run(dir.path(), "full", &config, &["run-llg"]);
    assert_eq!(full.code(), 0);
    let ckpt = full.out.join("checkpoint_000010.llgf");
    let bytes = fs::read(&ckpt).unwrap();
    let file = FieldFile::load(&ckpt).unwrap();
    let m = file.to_spin([0.0, 0.0, 1.0]).unwrap();
    let copy = dir.path().join("copy.llgf");
    FieldFile::from_spin(&m).save(&copy).unwrap();
    assert_eq!(fs::read(&copy).unwrap(), bytes);

    let resumed = run(dir.path(), "resumed", &config, &["run-llg", "--resume", ckpt.to_str().unwrap()]);
    assert_eq!(resumed.code(), 0, "{}", String::from_utf8_lossy(&resumed.output.stderr));
    assert_eq!(
        fs::read(full.out.join("final.llgf")).unwrap(),
        fs::read(resumed.out.join("final.llgf")).unwrap()
    );
    let (_, rows) = resumed.csv("series.csv");
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
    assert!((resumed.summary()["results"]["t_final"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn frame_residuals_stay_below_tolerance() {
    let dir = TempDir::new().unwrap();
    let r = run(dir.path(), "frames", SMALL_RUN, &["run-frames"]);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let s = r.summary();
    assert!(s["results"]["within_tolerance"].as_bool().unwrap(), "{s}");
    let (header, rows) = r.csv("frames.csv");
    let t = column(&header, "torsion");
    assert!(rows.iter().all(|row| row[t].parse::<f64>().unwrap() < 1e-6));
    let u = FieldFile::load(&r.out.join("u_final.llgf")).unwrap().to_complex().unwrap();
    assert_eq!(u.len(), 2);
    assert_valid_summary(&r);

    let c = run(dir.path(), "const", CONSTANT_RUN, &["run-frames"]);
    assert_eq!(c.code(), 0);
    for key in ["max_torsion", "max_curvature", "max_u0_consistency", "max_coulomb_div"] {
        assert_eq!(c.summary()["results"][key].as_f64().unwrap(), 0.0, "{key}");
    }
}

#[test]
fn degenerate_field_exits_with_frame_code() {
    let dir = TempDir::new().unwrap();
    let g = GridSpec::new(2, 8, 2.0 * PI).unwrap();
    let mut f = VectorField3::constant(g, [0.0, 0.0, 1.0]);
    // the default reference direction itself
    f.data[9] = [1.0, 0.0, 0.0];
    let m = SpinField::new(f, [0.0, 0.0, 1.0]).unwrap();
    let path = dir.path().join("bad.llgf");
    FieldFile::from_spin(&m).save(&path).unwrap();
    let r = run(dir.path(), "bad", CONSTANT_RUN, &["run-frames", "--resume", path.to_str().unwrap()]);
    assert_eq!(r.code(), EXIT_FRAME);
    let s = r.summary();
    assert_eq!(s["status"], "error");
    assert_valid_summary(&r);
}

#[test]
fn picard_runs_report_contraction() {
    let dir = TempDir::new().unwrap();
    let picard = "[picard]\nt_end = 0.2\nmesh_spacing = 0.02\n";
    let zero = run(dir.path(), "zero", &format!("{CONSTANT_RUN}{picard}"), &["run-picard"]);
    assert_eq!(zero.code(), 0);
    let (_, rows) = zero.csv("picard_history.csv");
    assert_eq!(rows.len(), 1);

    let small = run(dir.path(), "small", &format!("{SMALL_RUN}{picard}"), &["run-picard"]);
    assert_eq!(small.code(), 0, "{}", String::from_utf8_lossy(&small.output.stderr));
    let (header, rows) = small.csv("picard_history.csv");
    assert_eq!(header, ["iter", "sup_diff", "ratio", "delta"]);
    let diffs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(diffs.len() >= 2 && diffs.windows(2).all(|w| w[1] < 0.1 * w[0]), "{diffs:?}");
    assert_valid_summary(&small);
}

#[test]
fn oversized_data_without_gate_does_not_contract() {
    let dir = TempDir::new().unwrap();
    let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
    let amp = 10.0;
    let u = vec![
        ComplexField::from_fn(g, |x| Complex64::new(amp * x[0].cos(), amp * x[1].sin())),
        ComplexField::from_fn(g, |x| Complex64::new(amp * (x[0] + x[1]).sin(), -amp * (2.0 * x[1]).cos())),
    ];
    let path = dir.path().join("u0.llgf");
    FieldFile::from_complex(&u).save(&path).unwrap();
    let base = "[grid]\ndimension = 2\npoints = 16\n[picard]\nt_end = 0.2\nmesh_spacing = 0.02\n";
    let gated = run(dir.path(), "gated", base, &["run-picard", "--resume", path.to_str().unwrap()]);
    assert_eq!(gated.code(), 1);
    let open = format!("{base}gate_enabled = false\n");
    let r = run(dir.path(), "open", &open, &["run-picard", "--resume", path.to_str().unwrap()]);
    assert_eq!(r.code(), EXIT_NO_CONTRACTION, "{}", String::from_utf8_lossy(&r.output.stderr));
    assert_valid_summary(&r);
}

#[test]
fn config_errors_exit_with_config_code_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let r = run(dir.path(), "typo", "[solver]\ndt = 0.01\nlamda = 1.0\n", &["run-llg"]);
    assert_eq!(r.code(), EXIT_CONFIG);
    let err = String::from_utf8_lossy(&r.output.stderr);
    assert!(err.contains("lamda") && err.contains("line 3"), "{err}");
    let r = run(dir.path(), "delta", "[monitor]\ndelta = 1.5\n", &["run-llg"]);
    assert_eq!(r.code(), EXIT_CONFIG);
    assert!(String::from_utf8_lossy(&r.output.stderr).contains("monitor.delta"));
    let missing = bin().args(["run-llg", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_CONFIG));
}
