use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::{Array1, Array2};
use splinelc::netcore::{init, save_weights};
use splinelc::{Activation, Layer, Network};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splinelc"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn splinelc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PIECEWISE: &str = r#"
seed = 5
[arch]
hidden = [12, 12]
[data]
source = "piecewise"
train_size = 256
test_size = 64
[train]
steps = 40
batch_size = 32
loss = "mse"
checkpoint_count = 6
[probe]
p = 2
r = 0.2
points = 20
[slice]
bounds = [-6.3, 6.3, -6.3, 6.3]
at = [40]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// CSV text with the wall-clock column blanked.
fn without_clock(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let mut out = vec![lines.next().unwrap().to_string()];
    let header = lines.next().unwrap();
    let col = header.split(',').position(|h| h == "wall_clock_s").unwrap();
    out.push(header.to_string());
    for l in lines {
        let mut f: Vec<&str> = l.split(',').collect();
        f[col] = "";
        out.push(f.join(","));
    }
    out.join("\n")
}

#[test]
fn train_zero_steps_writes_header_and_initial_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", PIECEWISE);
    let o = run(tmp.path(), &["train", cfg.to_str().unwrap(), "--steps", "0", "--out", "r0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = tmp.path().join("r0");
    let csv = std::fs::read_to_string(run_dir.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[0].starts_with("# splinelc ") && lines[0].contains("config_hash="));
    assert!(run_dir.join("weights_init.spln").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["sha256"]["weights_init.spln"].is_string());
    assert_eq!(manifest["tool"], splinelc::TOOL);
}

#[test]
fn rerun_is_byte_identical_apart_from_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", PIECEWISE);
    for out in ["a", "b"] {
        let o = run(tmp.path(), &["train", cfg.to_str().unwrap(), "--out", out, "--threads", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &str, f: &str| std::fs::read(tmp.path().join(d).join(f)).unwrap();
    let a = String::from_utf8(read("a", "trajectory.csv")).unwrap();
    let b = String::from_utf8(read("b", "trajectory.csv")).unwrap();
    assert_eq!(without_clock(&a), without_clock(&b));
    assert_eq!(read("a", "weights_final.spln"), read("b", "weights_final.spln"));
    assert_eq!(read("a", "slices/step_0000040.json"), read("b", "slices/step_0000040.json"));
    assert_eq!(read("a", "config.toml"), read("b", "config.toml"));
    assert!(a.lines().count() > 2);
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", PIECEWISE);
    let args = ["train", cfg.to_str().unwrap(), "--steps", "0", "--out", "r"];
    assert!(run(tmp.path(), &args).status.success());
    let again = run(tmp.path(), &args);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(run(tmp.path(), &forced).status.success());
}

#[test]
fn missing_mnist_is_an_input_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.toml",
        r#"
out = "run"
[arch]
hidden = [8]
[data]
source = "mnist"
dir = "no/such/dir"
"#,
    );
    let o = run(tmp.path(), &["train", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no/such/dir/train-images-idx3-ubyte"), "{}", stderr(&o));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn bad_config_field_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &PIECEWISE.replace("batch_size = 32", "batch_sise = 32"));
    let o = run(tmp.path(), &["train", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batch_sise"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "d.toml", &PIECEWISE.replace("batch_size = 32", "batch_size = 1000"));
    let o = run(tmp.path(), &["train", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batch_size"), "{}", stderr(&o));
}

fn zero_bias_linear(dir: &Path, width: usize, depth: usize, d: usize) -> PathBuf {
    let mut arch = vec![d];
    arch.extend(std::iter::repeat_n(width, depth));
    arch.push(3);
    let mut net = init(&arch, Activation::Identity, 9, 1.0).unwrap();
    for l in net.layers_mut() {
        l.bias.fill(0.0);
    }
    let p = dir.join("linear.spln");
    save_weights(&net, &p).unwrap();
    p
}

#[test]
fn lc_recovers_every_neuron_of_a_zero_bias_linear_net() {
    let tmp = tempfile::tempdir().unwrap();
    let w = zero_bias_linear(tmp.path(), 7, 4, 20);
    let o = run(
        tmp.path(),
        &["lc", "--weights", w.to_str().unwrap(), "--points", "zeros:5", "-P", "10", "-r", "0.3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# splinelc ") && lines[0].contains("config_hash="));
    assert_eq!(lines[1], "layer,class,mean,ci_lo,ci_hi");
    // One row per probed layer plus the total.
    assert_eq!(lines.len() - 2, 4 + 1);
    for (k, row) in lines[2..].iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        let expect = if k < 4 { 7.0 } else { 28.0 };
        let (mean, lo, hi): (f64, f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
        assert_eq!(mean, expect, "{row}");
        assert_eq!(lo, hi, "{row}");
    }
}

#[test]
fn lc_rejects_p_above_input_dim() {
    let tmp = tempfile::tempdir().unwrap();
    let w = zero_bias_linear(tmp.path(), 4, 2, 5);
    let o = run(tmp.path(), &["lc", "--weights", w.to_str().unwrap(), "--points", "zeros:3", "-P", "6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("probe.p"), "{}", stderr(&o));
}

#[test]
fn lc_writes_to_out_file_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let w = zero_bias_linear(tmp.path(), 4, 2, 5);
    let o = run(
        tmp.path(),
        &[
            "lc", "--weights", w.to_str().unwrap(), "--points", "train=zeros:3", "--points", "box:4:-1:1", "-P", "2",
            "--json", "--out", "lc.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("lc.json")).unwrap()).unwrap();
    assert_eq!(v["aggregates"].as_array().unwrap().len(), 2);
    assert_eq!(v["aggregates"][1]["class"], "random");
    assert!(v["config_hash"].is_string());
}

fn identity_net(dir: &Path) -> PathBuf {
    let layer = Layer::new(Array2::eye(2), Array1::zeros(2), Activation::Identity).unwrap();
    let net = Network::new(2, vec![layer]).unwrap();
    let p = dir.join("id.spln");
    save_weights(&net, &p).unwrap();
    p
}

#[test]
fn slice_of_identity_net_has_one_region() {
    let tmp = tempfile::tempdir().unwrap();
    let w = identity_net(tmp.path());
    let o = run(
        tmp.path(),
        &["slice", "--weights", w.to_str().unwrap(), "--bounds", "-1,1,-1,1", "--out", "out/id"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "regions: 1"), "{}", stdout(&o));
    let json = splinelc::slicegeom::load_json(tmp.path().join("out/id.json")).unwrap();
    assert_eq!(json.regions.len(), 1);
    assert_eq!(json.tool, splinelc::TOOL);
    assert!(json.config_hash.is_some());
    // x1 = x2 splits the square.
    assert_eq!(json.boundary.len(), 1);
    let svg = std::fs::read_to_string(tmp.path().join("out/id.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 1);
    assert!(svg.contains("config_hash="));
}

#[test]
fn slice_json_matches_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let net = init(&[2, 6, 6, 3], Activation::Relu, 4, 1.0).unwrap();
    let w = tmp.path().join("relu.spln");
    save_weights(&net, &w).unwrap();
    let o = run(
        tmp.path(),
        &["slice", "--weights", w.to_str().unwrap(), "--bounds", "-2,2,-2,2", "--out", "s.json", "--color", "slope-norm"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("s.json")).unwrap()).unwrap();
    for key in ["bounds", "basis", "origin", "regions", "boundary"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let regions = v["regions"].as_array().unwrap();
    assert!(regions.len() > 1);
    for r in regions {
        assert!(r["slope_fro"].is_f64());
        assert!(r.get("pattern").is_none());
        for p in r["polygon"].as_array().unwrap() {
            assert_eq!(p.as_array().unwrap().len(), 2);
        }
    }
    for seg in v["boundary"].as_array().unwrap() {
        assert_eq!(seg.as_array().unwrap().len(), 2);
    }
    let text = stdout(&o);
    assert!(text.contains("near-boundary density") && text.contains("far density"), "{text}");
}

#[test]
fn slice_of_gelu_net_is_unsupported() {
    let tmp = tempfile::tempdir().unwrap();
    let net = init(&[2, 4, 2], Activation::Gelu, 1, 1.0).unwrap();
    let w = tmp.path().join("gelu.spln");
    save_weights(&net, &w).unwrap();
    let o = run(tmp.path(), &["slice", "--weights", w.to_str().unwrap(), "--bounds", "-1,1,-1,1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn attack_writes_trajectory_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let net = init(&[10, 16, 5], Activation::Relu, 2, 1.0).unwrap();
    let w = tmp.path().join("m.spln");
    save_weights(&net, &w).unwrap();
    let o = run(
        tmp.path(),
        &[
            "attack", "--weights", w.to_str().unwrap(), "--data", "modular:5", "--eps", "0,0.1,0.3", "--alpha", "0.05",
            "--steps", "5", "--out", "curve.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("config_hash="));
    assert!(lines[1].starts_with("step,train_acc,test_acc,train_loss,adv_acc_eps_0,adv_acc_eps_0.1,adv_acc_eps_0.3"));
    let f: Vec<f64> = lines[2].split(',').skip(4).take(3).map(|x| x.parse().unwrap()).collect();
    assert!(f[0] >= f[1] && f[1] >= f[2], "{f:?}");
}

#[test]
fn validate_reports_each_check_and_catches_a_broken_predicate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["validate", "--out", "report.json"]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(": PASS")).count(), 6);

    let o = run(tmp.path(), &["validate", "--corrupt-predicate", "--out", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("bad.json")).unwrap()).unwrap();
    let zb = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "zero_bias_recovery").unwrap();
    assert_eq!(zb["passed"], false);
}
