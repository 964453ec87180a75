use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fecim::bnn::idx::{encode_images, encode_labels, IdxImages};
use fecim::bnn::synthetic::{prototype_task, PrototypeTask};
use fecim::bnn::weights::save_model;

fn fecim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fecim"))
        .args(args)
        .env_remove("FECIM_CONFIG")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn table(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn mac_sweep_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fecim(&["mac-sweep", "--out", "a"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = table(&tmp.path().join("a/mac_sweep.csv"));
    assert_eq!(rows.len(), 129);
    assert_eq!(num(&rows[64][1]), 0.225);
    assert!((num(&rows[64][3]) - 38.4e-15).abs() < 38.4e-15 * 1e-12);
    assert_eq!(rows[0][1..], ["0", "0", "0", "0"]);
    // Sampled capacitors move the non-ideal column off the ideal line.
    assert_ne!(rows[64][2], rows[64][1]);
    assert!((num(&rows[64][2]) - 0.225).abs() < 0.01);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "mac-sweep");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["array"]["rows"], 128);

    let again = fecim(&["mac-sweep", "--out", "b"], tmp.path());
    assert!(again.status.success());
    assert_eq!(
        fs::read(tmp.path().join("a/mac_sweep.csv")).unwrap(),
        fs::read(tmp.path().join("b/mac_sweep.csv")).unwrap()
    );
    let other = fecim(&["mac-sweep", "--out", "c", "--seed", "2"], tmp.path());
    assert!(other.status.success());
    assert_ne!(
        fs::read(tmp.path().join("a/mac_sweep.csv")).unwrap(),
        fs::read(tmp.path().join("c/mac_sweep.csv")).unwrap()
    );
}

#[test]
fn energy_compare_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(fecim(&["energy-compare", "--out", "e"], tmp.path())
        .status
        .success());
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("e/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["ratio_at_half"], 0.5);
    assert!((m["summary"]["average_ratio"].as_f64().unwrap() - 0.3307).abs() < 1e-4);
    let vdd = table(&tmp.path().join("e/energy_vdd.csv"));
    assert_eq!(num(&vdd[1][2]), 4.0 * num(&vdd[0][2]));

    let cfg = write_config(tmp.path(), "[array]\nrows = 1\n");
    let out = fecim(
        &[
            "energy-compare",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "one",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("one/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["average_ratio"], 0.0);
}

#[test]
fn variation_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sweep]\np_grid = [0.0, 0.5]\nsigma_c_grid = [0.0, 0.05]\non_off_ratios = [1e5]\n",
    );
    let c = cfg.to_str().unwrap();
    let out = fecim(
        &[
            "variation",
            "--config",
            c,
            "--trials",
            "10000",
            "--out",
            "v",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = table(&tmp.path().join("v/sigma_mac.csv"));
    let at = |s: &str, p: &str| rows.iter().find(|r| r[0] == s && r[1] == p).unwrap()[3].clone();
    assert_eq!(num(&at("0", "0.5")), 0.0);
    let s = num(&at("0.050000000000000003", "0.5"));
    assert!((0.0020..=0.0025).contains(&s), "{s}");
    let q = num(&table(&tmp.path().join("v/onoff_summary.csv"))[0][2]);
    assert!(q > 0.97, "{q}");

    let few = fecim(
        &["variation", "--config", c, "--trials", "100", "--out", "w"],
        tmp.path(),
    );
    assert_eq!(few.status.code(), Some(2));
}

#[test]
fn write_sim_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fecim(&["write-sim", "--out", "w"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let hist = table(&tmp.path().join("w/write_histogram.csv"));
    let mags: Vec<f64> = hist.iter().map(|r| num(&r[0])).collect();
    assert_eq!(mags, vec![0.0, 0.75, 1.5]);
    let total: u64 = hist.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 128 * 2 * 128 * 128 * 2);

    let ones = vec!["1".repeat(128); 128].join("\n");
    fs::write(tmp.path().join("ones.txt"), ones).unwrap();
    let cfg = write_config(tmp.path(), "[write_sim]\nweights = \"ones.txt\"\n");
    let out = fecim(
        &["write-sim", "--config", cfg.to_str().unwrap(), "--out", "o"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mags: Vec<f64> = table(&tmp.path().join("o/write_histogram.csv"))
        .iter()
        .map(|r| num(&r[0]))
        .collect();
    assert!(mags.iter().all(|m| [0.0, 0.75, 1.5].contains(m)));

    let bad = fecim(
        &["write-sim", "--out", "f", "--inject-fault", "5:0:9:0.3"],
        tmp.path(),
    );
    assert_eq!(bad.status.code(), Some(3));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(
        err.contains("row 9") && err.contains("phase 0") && err.contains("col"),
        "{err}"
    );
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[device]\nv_dd = 1.6\n");
    let out = fecim(
        &["mac-sweep", "--config", cfg.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("v_write"));
    assert!(!tmp.path().join("out").exists());

    let cfg = write_config(
        tmp.path(),
        "[bnn]\nmodel = \"missing.json\"\nimages = \"i\"\nlabels = \"l\"\n",
    );
    assert_eq!(
        fecim(&["bnn", "--config", cfg.to_str().unwrap()], tmp.path())
            .status
            .code(),
        Some(2)
    );

    let cfg = write_config(tmp.path(), "[write_sim]\nweights = \"w.txt\"\n");
    fs::write(tmp.path().join("w.txt"), "101\n010\n").unwrap();
    assert_eq!(
        fecim(
            &["write-sim", "--config", cfg.to_str().unwrap()],
            tmp.path()
        )
        .status
        .code(),
        Some(2)
    );

    assert_eq!(
        fecim(&["no-such-command"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn config_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[array]\nrows = 16\n[output]\ndir = \"from-env\"\n",
    );
    let out = Command::new(env!("CARGO_BIN_EXE_fecim"))
        .arg("mac-sweep")
        .env("FECIM_CONFIG", &cfg)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(table(&tmp.path().join("from-env/mac_sweep.csv")).len(), 17);
}

#[test]
fn bnn_from_weight_files() {
    let tmp = tempfile::tempdir().unwrap();
    let task = PrototypeTask {
        input_bits: 64,
        classes: 4,
        hidden: 20,
        hidden_alpha: 10.0,
        samples: 40,
        ..PrototypeTask::default()
    };
    let (model, data) = prototype_task(3, &task).unwrap();
    save_model(&model, tmp.path(), "net").unwrap();
    let images = IdxImages {
        count: data.len(),
        rows: 8,
        cols: 8,
        pixels: data
            .inputs
            .iter()
            .flatten()
            .map(|&b| if b { 255 } else { 0 })
            .collect(),
    };
    fs::write(tmp.path().join("img.idx"), encode_images(&images)).unwrap();
    let labels: Vec<u8> = data.labels.iter().map(|&l| l as u8).collect();
    fs::write(tmp.path().join("lbl.idx"), encode_labels(&labels)).unwrap();
    let cfg = write_config(
        tmp.path(),
        "[array]\nrows = 32\ncols = 16\n[bnn]\nmodel = \"net.json\"\nimages = \"img.idx\"\nlabels = \"lbl.idx\"\n\
         sigma_c_grid = [0.0, 0.2]\ntrials = 2\n",
    );
    let out = fecim(
        &["bnn", "--config", cfg.to_str().unwrap(), "--out", "b"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = table(&tmp.path().join("b/bnn_summary.csv"));
    assert_eq!(num(&summary[0][1]), 1.0);
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["source"], "weight-file");
    assert_eq!(m["summary"]["sigma_mode"], "variance");

    let mut truncated = fs::read(tmp.path().join("img.idx")).unwrap();
    truncated.truncate(100);
    fs::write(tmp.path().join("img.idx"), truncated).unwrap();
    let out = fecim(
        &["bnn", "--config", cfg.to_str().unwrap(), "--out", "c"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 100"));
}
