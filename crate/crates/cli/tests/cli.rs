use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn css(args: &[&str], golden: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_css"));
    c.args(args).env_remove("CSS_GOLDEN_DIR");
    if let Some(g) = golden {
        c.env("CSS_GOLDEN_DIR", g);
    }
    c.output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn suite() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("suite")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn potential(dir: &Path, body: &str) {
    fs::write(dir.join("pot.json"), body).unwrap();
}

const CYL: &str = r#"{"N": 5, "k": 3, "cyl": [{"J": [1, 2, 3], "alpha": 0.1875}]}"#;

#[test]
fn malformed_config_exits_2_with_position() {
    let d = scratch("malformed");
    let cfg = write_config(&d, "{\n  \"potential\": \"pot.json\",\n  \"seed\": \n}");
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4 column 1"), "{err}");
}

#[test]
fn unknown_key_exits_2() {
    let d = scratch("unknown");
    potential(&d, CYL);
    let cfg = write_config(&d, r#"{"potential": "pot.json", "spectrum": {"grdi": 10}}"#);
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grdi"));
}

#[test]
fn bad_potential_and_missing_seed_exit_2() {
    let d = scratch("badpot");
    potential(&d, r#"{"N": 5, "k": 3, "cyl": [{"J": [1, 2, 9], "alpha": 0.1}]}"#);
    let cfg = write_config(&d, r#"{"potential": "pot.json"}"#);
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    potential(&d, CYL);
    let o = css(&["project", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn computation_failure_exits_1() {
    // k = N has nothing to project
    let d = scratch("keqn");
    potential(&d, r#"{"N": 4, "k": 4, "cyl": [{"J": [1, 2, 3, 4], "alpha": 0.5}]}"#);
    let cfg = write_config(&d, r#"{"potential": "pot.json", "seed": 1}"#);
    let o = css(&["project", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k = N"));
}

#[test]
fn spectrum_matches_golden() {
    let d = scratch("golden");
    let cfg = suite().join("config.json");
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], Some(&suite().join("golden")));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.join("spectrum.json")).unwrap()).unwrap();
    let golden = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "golden").expect("golden check ran");
    assert_eq!(golden["pass"], true);
    assert_eq!(v["potential_hash"].as_str().unwrap().len(), 64);
    // 17 significant digits
    let text = fs::read_to_string(d.join("spectrum.json")).unwrap();
    assert!(text.contains("\"closed_form_mu1\": -6.8750000000000000e-1"), "{text}");
    assert!(fs::read_to_string(d.join("spectrum.csv")).unwrap().starts_with("level,mu,multiplicity,sigma_plus\n"));
}

#[test]
fn wrong_golden_fails() {
    let d = scratch("wrong_golden");
    let g = d.join("golden");
    fs::create_dir_all(&g).unwrap();
    fs::write(g.join("cyl_5_3.spectrum.json"), r#"{"mu1": -0.68}"#).unwrap();
    let cfg = suite().join("config.json");
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], Some(&g));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tolerance_scale_flag_validated() {
    let d = scratch("tol");
    let cfg = suite().join("config.json");
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--tolerance-scale", "-1"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = css(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--threads", "1", "--tolerance-scale", "2"], None);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(d.join("spectrum.json")).unwrap()).unwrap();
    let c = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "closed_form").unwrap();
    assert!((c["tolerance"].as_f64().unwrap() - 2e-6).abs() < 1e-18);
}

#[test]
fn bound_check_layout() {
    let d = scratch("bound");
    potential(&d, r#"{"N": 5, "k": 3, "cyl": [{"J": [1, 2, 3], "alpha": 0.1}]}"#);
    let cfg = write_config(&d, r#"{"potential": "pot.json", "seed": 3, "bound_check": {"sobolev_count": 10}}"#);
    let o = css(&["bound-check", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.join("bound_check.json")).unwrap()).unwrap();
    for key in ["sigma_hat", "d", "S_hat", "shells", "pass"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["shells"].as_array().unwrap().len(), 17);
    assert!(v["shells"][0].get("sup_ratio").is_some());
}
