//! End-to-end tests of the `meixner` binary: output shapes, exit codes,
//! determinism, and manifest replay.

use std::path::Path;
use std::process::{Command, Output};

fn meixner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meixner"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_CONFIG: &str = r#"
n = 48
rho = 0.5
trials = 30
seed = 9
m_max = 2

[[label]]
name = "u"
a1 = 0.0
a2 = 0.0
v11 = 0.0
v12 = 1.0
v22 = 1.0

[[word]]
labels = ["u", "u"]
"#;

#[test]
fn moments_semicircle_agrees_with_catalan() {
    let out = meixner(&[
        "moments", "--a1", "0", "--a2", "0", "--b1", "1", "--b2", "1", "--mmax", "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,comb,tridiag,fock,max_dev"));
    let catalan = [1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0, 14.0];
    for (m, expect) in catalan.iter().enumerate() {
        let line = lines.next().unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], m.to_string());
        for field in &fields[1..4] {
            let value: f64 = field.parse().unwrap();
            assert!(
                (value - expect).abs() < 1e-9,
                "m = {m}: {line}"
            );
        }
        let dev: f64 = fields[4].parse().unwrap();
        assert!(dev < 1e-9);
    }
}

#[test]
fn moments_dirac_route() {
    let out = meixner(&[
        "moments", "--a1", "1.5", "--a2", "7", "--b1", "0", "--b2", "3", "--mmax", "4",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("dirac"));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    let fock: f64 = fields[3].parse().unwrap();
    assert!((fock - 1.5f64.powi(4)).abs() < 1e-12);
}

#[test]
fn moments_beta2_zero_route_selected() {
    let out = meixner(&[
        "moments", "--a1", "0.5", "--a2", "-1", "--b1", "2", "--b2", "0", "--mmax", "6",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("beta2-zero"));
}

#[test]
fn moments_rejects_negative_beta() {
    let out = meixner(&["moments", "--b1", "-1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn density_semicircle_mass_and_value() {
    let out = meixner(&[
        "density", "--a2", "0", "--b2", "1", "--steps", "5", "--format", "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let mass = json["summary"]["mass"].as_f64().unwrap();
    assert!((mass - 1.0).abs() < 1e-6);
    // grid midpoint x = 0 carries the density 1/pi
    let rows = json["density"].as_array().unwrap();
    let mid = &rows[2];
    assert!((mid["x"].as_f64().unwrap()).abs() < 1e-12);
    assert!((mid["density"].as_f64().unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    // support endpoints are zero rows
    assert_eq!(rows[0]["density"].as_f64().unwrap(), 0.0);
    assert_eq!(rows[4]["density"].as_f64().unwrap(), 0.0);
}

#[test]
fn density_requires_standardized_or_override() {
    let out = meixner(&["density", "--a1", "0.5", "--a2", "0", "--b2", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = meixner(&[
        "density", "--a1", "0.5", "--a2", "0", "--b2", "1", "--nonstandard-ok", "--steps", "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn density_reports_mass_deficit_for_atomic_law() {
    let out = meixner(&[
        "density", "--a2", "0", "--b2", "0.25", "--steps", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["summary"]["atoms_suspected"], serde_json::json!(true));
    assert!(json["summary"]["mass_deficit"].as_f64().unwrap() > 1e-3);
    assert!(json["summary"]["moment_check"].is_null());
}

#[test]
fn fock_worked_words() {
    let out = meixner(&[
        "fock", "--word", "p1* p2* p2* p2 p2 p2* p2 p1",
        "--a1", "1", "--a2", "-1", "--b1", "2", "--b2", "3", "--format", "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((json["value"].as_f64().unwrap() - 54.0).abs() < 1e-10);

    let out = meixner(&[
        "fock", "--word", "p1* p2* g p2* p2 g p2 p1 g",
        "--a1", "1", "--a2", "-1", "--b1", "2", "--b2", "3", "--format", "json",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((json["value"].as_f64().unwrap() - 18.0).abs() < 1e-10);

    // empty word: vacuum norm
    let out = meixner(&["fock", "--word", "", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["value"].as_f64().unwrap(), 1.0);
}

#[test]
fn fock_parse_error_carries_position() {
    let out = meixner(&["fock", "--word", "p1 oops p2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("oops") && err.contains("position 1"), "{err}");
}

#[test]
fn nc_dump_matches_counts_and_format() {
    let out = meixner(&["nc", "--m", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().any(|l| *l == "{1}{2}{3} | d=1,1,1"));
    assert!(lines.iter().any(|l| *l == "{1,3}{2} | d=1,2"));

    let out = meixner(&["nc", "--m", "8", "--pairs-only"]);
    assert_eq!(stdout(&out).lines().count(), 14);

    let out = meixner(&["nc", "--m", "17"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cfree_kernel_report() {
    let out = meixner(&[
        "cfree", "--word", "s,u,s", "--degrees", "2,2,2", "--draws", "25",
        "--b1", "1", "--b2", "2", "--seed", "4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["pass"], serde_json::json!(true));
    assert!(json["max_abs"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn cfree_witness_values() {
    let out = meixner(&[
        "cfree", "--word", "s,u,s", "--degrees", "2,2,2", "--draws", "10",
        "--b1", "1", "--b2", "2", "--witness",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let w = &json["witness"];
    assert!((w["value_wrong_centering"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(w["value_matched_centering"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(w["expected"].as_f64().unwrap(), 1.0);
}

#[test]
fn rmt_runs_and_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let out_a = dir.path().join("run_a");
    let out = meixner(&[
        "rmt", "--config", config.to_str().unwrap(), "--out", out_a.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("label_or_word,m_or_word_id,n,estimate,stderr,oracle,abs_error"));
    // m = 0 rows are exact
    let m0: Vec<&str> = text.lines().filter(|l| l.contains(":tau1,0,")).collect();
    assert!(!m0.is_empty());
    for line in m0 {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[3], "1");
        assert_eq!(fields[6], "0");
    }

    // identical invocation is byte-identical
    let out2 = meixner(&["rmt", "--config", config.to_str().unwrap()]);
    assert_eq!(text, stdout(&out2));

    // replay from the manifest alone reproduces the results file
    let out_b = dir.path().join("run_b");
    let manifest = out_a.join("manifest.json");
    let out3 = meixner(&[
        "replay", "--manifest", manifest.to_str().unwrap(), "--out", out_b.to_str().unwrap(),
    ]);
    assert!(out3.status.success(), "{}", stderr(&out3));
    let a = std::fs::read(out_a.join("results.csv")).unwrap();
    let b = std::fs::read(out_b.join("results.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rmt_check_flags_band_failures() {
    // At n = 48 the second-moment deficit n1/n = 0.125 deterministically
    // exceeds the default band, so --check must exit 3.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let out = meixner(&["rmt", "--config", config.to_str().unwrap(), "--check"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn rmt_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 48\ntrials = 1\nseed = 1\nbogus_field = 3\n");
    let out = meixner(&["rmt", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    // toml errors carry a line/column position
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let config = write_config(
        dir.path(),
        "n = 48\ntrials = 1\nseed = 1\n[[label]]\nname = \"u\"\na1 = 0.0\na2 = 0.0\nv12 = 1.0\nv22 = 1.0\n[[word]]\nlabels = [\"nope\"]\n",
    );
    let out = meixner(&["rmt", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in [
        "single_matrix_moments.toml",
        "ensemble_words.toml",
        "finite_size_sweep.toml",
    ] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        let parsed: Result<toml::Value, _> = toml::from_str(&text);
        assert!(parsed.is_ok(), "{name}: {:?}", parsed.err());
    }
}

#[test]
fn moments_out_dir_writes_manifest_and_mirrors() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = meixner(&[
        "moments", "--mmax", "4", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["moments.csv", "moments.json", "summary.json", "manifest.json"] {
        assert!(out_dir.join(file).is_file(), "{file} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"]["subcommand"], "moments");

    // replay into a second directory and compare the primary table
    let out_dir2 = dir.path().join("replayed");
    let out = meixner(&[
        "replay",
        "--manifest",
        out_dir.join("manifest.json").to_str().unwrap(),
        "--out",
        out_dir2.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(out_dir.join("moments.csv")).unwrap(),
        std::fs::read(out_dir2.join("moments.csv")).unwrap()
    );
}
