use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ibo_core::numeric::sha256_hex;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ibo")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Writes `config` into `dir` next to copies of the shipped world and loss files.
fn setup(dir: &Path, config: &str) -> PathBuf {
    for f in ["model_a.world.json", "zero_one.loss.json"] {
        fs::copy(configs().join(f), dir.join(f)).unwrap();
    }
    let p = dir.join("config.json");
    fs::write(&p, config).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn info_model_a_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"seed": 1, "world": "model_a.world.json", "encoder": "identity"}"#);
    let out = dir.path().join("out");
    let o = run("info", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv(&out.join("info.csv"));
    assert_eq!(h, ["I_t_xP_nats", "I_t_xF_nats", "I_t_xP_given_xF_nats", "I_t_xPxF_nats", "H_xP_nats"]);
    let expected = -[0.41f64, 0.09, 0.09, 0.41].iter().map(|p| p * p.ln()).sum::<f64>();
    assert!((num(&rows[0][4]) - expected).abs() < 1e-10);
    assert!((num(&rows[0][0]) - expected).abs() < 1e-10);
}

#[test]
fn info_constant_encoder_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 1, "world": "model_a.world.json", "encoder": "constant", "t_size": 3}"#,
    );
    let out = dir.path().join("out");
    assert!(run("info", &cfg, &out, &[]).status.success());
    let (_, rows) = csv(&out.join("info.csv"));
    for v in &rows[0][..4] {
        assert_eq!(num(v), 0.0);
    }
}

#[test]
fn bits_units_rescale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"seed": 1, "world": "model_a.world.json"}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("info", &cfg, &a, &[]).status.success());
    assert!(run("info", &cfg, &b, &["--units", "bits"]).status.success());
    let (_, na) = csv(&a.join("info.csv"));
    let (hb, nb) = csv(&b.join("info.csv"));
    assert!(hb[4].ends_with("_bits"));
    assert!((num(&nb[0][4]) - num(&na[0][4]) / std::f64::consts::LN_2).abs() < 1e-10);
}

#[test]
fn malformed_world_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"seed": 1, "world": "bad.world.json"}"#);
    let mut w: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model_a.world.json")).unwrap()).unwrap();
    w["obs_channel"]["values"] = serde_json::json!([0.9, 0.1, 0.1]);
    fs::write(dir.path().join("bad.world.json"), w.to_string()).unwrap();
    let o = run("info", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("obs_channel.values"), "{err}");

    w["obs_channel"]["values"] = serde_json::json!([0.9, 0.1, 0.1, 0.9]);
    w["extra"] = serde_json::json!(1);
    fs::write(dir.path().join("bad.world.json"), w.to_string()).unwrap();
    let o = run("info", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));
}

#[test]
fn missing_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"world": "model_a.world.json"}"#);
    let o = run("info", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn empty_sweep_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 1, "world": "model_a.world.json", "t_size": 2, "objective": {"kind": "IBP"}, "sweep": []}"#,
    );
    let o = run("sweep", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));
}

#[test]
fn budget_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"seed": 1, "world": "small.world.json"}"#);
    let mut w: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model_a.world.json")).unwrap()).unwrap();
    w["budget"] = serde_json::json!(4);
    fs::write(dir.path().join("small.world.json"), w.to_string()).unwrap();
    let o = run("info", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn non_convergence_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 1, "world": "model_a.world.json", "t_size": 2,
            "objective": {"kind": "IBP", "nu": 5.0},
            "optimizer": {"max_iters": 1, "restarts": 1}}"#,
    );
    let out = dir.path().join("out");
    let o = run("optimize", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let (_, rows) = csv(&out.join("optimize.csv"));
    assert_eq!(rows[0][4], "false");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn single_nu_optimize_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 1, "world": "model_a.world.json", "t_size": 2, "objective": {"kind": "IBP", "nu": 2.0}}"#,
    );
    let out = dir.path().join("out");
    assert!(run("optimize", &cfg, &out, &[]).status.success());
    let (h, rows) = csv(&out.join("optimize.csv"));
    assert_eq!(h.len(), 6);
    assert_eq!(rows.len(), 1);
    let svg = fs::read_to_string(out.join("information_plane.svg")).unwrap();
    assert!(svg.contains("nu=2") && svg.contains("[nats]"));
    assert!(ibo_core::io::parse_kernel(&fs::read_to_string(out.join("encoder.json")).unwrap()).is_ok());
}

#[test]
fn model_a_ibp_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &fs::read_to_string(configs().join("sweep.json")).unwrap());
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    for w in rows.windows(2) {
        assert!(num(&w[1][2]) >= num(&w[0][2]) - 1e-6);
    }
    let (_, oracle) = csv(&out.join("oracle.csv"));
    for r in &oracle {
        // minimization: the optimizer may beat the grid, not trail it
        assert!(num(&r[1]) <= num(&r[2]) + 1e-3, "{r:?}");
    }
}

#[test]
fn manifest_matches_config_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("bounds.json")).unwrap();
    let cfg = setup(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(run("bounds", &cfg, &out, &[]).status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_sha256"], sha256_hex(text.as_bytes()));
    assert_eq!(m["command"], "bounds");
    for o in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], sha256_hex(&bytes));
    }
}

#[test]
fn bounds_exact_pair_gap_is_future_information() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 4, "world": "model_a.world.json", "t_size": 3, "encoder": "random",
            "pair": "exact", "betas": [0.5, 1.0, 3.0]}"#,
    );
    let out = dir.path().join("out");
    assert!(run("bounds", &cfg, &out, &[]).status.success());
    assert!(run("info", &cfg, &out, &[]).status.success());
    let (_, info) = csv(&out.join("info.csv"));
    let (h, rows) = csv(&out.join("bounds.csv"));
    assert_eq!(h[3], "gap");
    for r in &rows {
        assert!((num(&r[3]) - num(&info[0][1])).abs() < 1e-10);
        assert!(num(&r[1]) >= num(&r[2]) - 1e-10);
    }
}

#[test]
fn tempered_beta_zero_is_prior_and_residual_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &fs::read_to_string(configs().join("tempered.json")).unwrap());
    let out = dir.path().join("out");
    assert!(run("tempered", &cfg, &out, &[]).status.success());
    let (_, rows) = csv(&out.join("tempered.csv"));
    for r in &rows {
        assert!(num(&r[7]).abs() < 1e-10, "residual {r:?}");
    }
    let (_, post) = csv(&out.join("posterior.csv"));
    let zero: Vec<_> = post.iter().filter(|r| r[0] == "0").collect();
    let first: Vec<&String> = zero.iter().filter(|r| r[1] == zero[0][1]).map(|r| &r[3]).collect();
    for r in &zero {
        let t: usize = r[2].parse().unwrap();
        assert_eq!(&r[3], first[t]);
        assert_eq!(num(&r[4]), 0.0);
    }
}

#[test]
fn genbound_holds_and_battery_clean() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("genbound.json"))
        .unwrap()
        .replace("\"battery_count\": 200", "\"battery_count\": 20");
    let cfg = setup(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(run("genbound", &cfg, &out, &[]).status.success());
    let (h, rows) = csv(&out.join("genbound.csv"));
    assert_eq!(h.last().unwrap(), "holds");
    assert!(rows.iter().all(|r| r[6] == "true"));
    let (_, battery) = csv(&out.join("battery.csv"));
    assert_eq!(battery.len(), 20);
    assert!(battery.iter().all(|r| r[7] == "true"));
}

#[test]
fn trained_stays_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &fs::read_to_string(configs().join("trained.json")).unwrap());
    let out = dir.path().join("out");
    assert!(run("trained", &cfg, &out, &[]).status.success());
    let (_, rows) = csv(&out.join("trained.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(num(&r[7]) <= 1e-12);
        assert!((num(&r[2]) + num(&r[3])).abs() < 1e-9);
    }
}

#[test]
fn appendix_reports_both_entropies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &fs::read_to_string(configs().join("appendix.json")).unwrap());
    let out = dir.path().join("out");
    assert!(run("appendix", &cfg, &out, &[]).status.success());
    let (_, si) = csv(&out.join("self_info.csv"));
    let (i, hx, hfx) = (num(&si[0][1]), num(&si[0][2]), num(&si[0][3]));
    assert!((i - hfx).abs() < 1e-12);
    assert!(hx > hfx + 0.5);
    let svg = fs::read_to_string(out.join("log_growth.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 8);
}

#[test]
fn appendix_default_is_log_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#"{"seed": 1}"#);
    let out = dir.path().join("out");
    assert!(run("appendix", &cfg, &out, &[]).status.success());
    let (_, rows) = csv(&out.join("divergence.csv"));
    for r in &rows {
        let k: f64 = num(&r[0]);
        assert!((num(&r[1]) - k.ln()).abs() < 1e-10);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        r#"{"seed": 1, "world": "model_a.world.json", "t_size": 2, "encoder": "random"}"#,
    );
    let read = |d: &str, extra: &[&str]| {
        let out = dir.path().join(d);
        assert!(run("info", &cfg, &out, extra).status.success());
        fs::read(out.join("info.csv")).unwrap()
    };
    let a = read("a", &[]);
    let b = read("b", &["--seed", "1"]);
    let c = read("c", &["--seed", "2"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}
