use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn anew(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anew"))
        .args(args)
        .output()
        .expect("run anew")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(!text.contains('\r'));
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn witness_file(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_bell_reports_divergence() {
    let out = anew(&["eval", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    let w = floats(&report["w_values"]);
    for (a, b) in w.iter().zip([0.5, 0.25, 0.0, -1.0]) {
        assert!((a - b).abs() < 1e-12, "{w:?}");
    }
    assert_eq!(report["diverges"], true);
    assert_eq!(report["limit"]["case"], "diverges");
    assert_eq!(report["limit"]["first_below_floor"], 13);
    assert_eq!(report["detected_linear"], false);
    assert_eq!(report["detected_nonlinear"], true);
    assert_eq!(report["verdict"], "analytic-accessible");
    assert!((report["kappa"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["abs_k"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(report["config"]["state"]["family"], "bell");
    assert_eq!(report["config"]["unitary"], "swap");
}

#[test]
fn eval_noisy_smolin_is_not_detected() {
    let out = anew(&[
        "eval",
        "--witness",
        "smolin",
        "--state",
        r#"{"family":"smolin","p":0.9}"#,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert!((report["w_linear"].as_f64().unwrap() - 0.04375).abs() < 1e-12);
    assert_eq!(report["detected_linear"], false);
    assert_eq!(report["detected_nonlinear"], false);
}

#[test]
fn witness_file_from_data_directory() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/smolin.json");
    let out = anew(&[
        "eval",
        "--witness",
        path,
        "--state",
        r#"{"family":"smolin","p":0}"#,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!((json(&out)["w_linear"].as_f64().unwrap() + 0.125).abs() < 1e-12);
}

#[test]
fn restricted_mode_matches_full_mode() {
    let state = r#"{"family":"random_state","seed":5}"#;
    let full = json(&anew(&[
        "eval",
        "--state",
        state,
        "--unitary",
        "ZZ",
        "--n",
        "6",
    ]));
    let restricted = json(&anew(&[
        "eval",
        "--state",
        state,
        "--unitary",
        "ZZ",
        "--n",
        "6",
        "--mode",
        "restricted",
    ]));
    for (a, b) in floats(&full["w_values"])
        .iter()
        .zip(floats(&restricted["w_values"]))
    {
        assert!((a - b).abs() < 1e-12);
    }
    let out = anew(&["eval", "--unitary", "XI", "--mode", "restricted"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_witness_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad_label = witness_file(
        &dir,
        "bad.json",
        r#"{"dA":2,"dB":2,"terms":[{"coeff":1.0,"A":"Q","B":"I"}]}"#,
    );
    let out = anew(&["eval", "--witness", &bad_label]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("terms[0].A"), "{}", stderr(&out));

    let unknown = witness_file(
        &dir,
        "unknown.json",
        r#"{"dA":2,"dB":2,"terms":[],"extra":1}"#,
    );
    let out = anew(&["eval", "--witness", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("extra"), "{}", stderr(&out));

    let out = anew(&["eval", "--witness", "/nonexistent/w.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = anew(&["eval", "--state", "{not json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = anew(&["eval", "--state", r#"{"family":"smolin","p":0.5}"#]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "4-qubit state against a 2-qubit witness"
    );
}

#[test]
fn non_involution_needs_skip_analytic() {
    let phase = "[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[0,1]]]";
    let out = anew(&["eval", "--unitary", phase]);
    assert_eq!(out.status.code(), Some(3));
    let out = anew(&["eval", "--unitary", phase, "--skip-analytic"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(json(&out)["w_infinity"].is_null());
    let not_unitary = "[[[1,0],[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]";
    let out = anew(&["eval", "--unitary", not_unitary, "--skip-analytic"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fig1_scan_changes_sign_at_quarter_cosine() {
    let out = anew(&["scan", "--preset", "fig1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 101);
    let header = String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "param,w_linear,w_1,w_inf,diverged,detected_linear,detected_nonlinear"
    );
    let mut crossings = 0;
    for pair in rows.windows(2) {
        let (a, b): (f64, f64) = (pair[0][1].parse().unwrap(), pair[1][1].parse().unwrap());
        if a.signum() != b.signum() {
            crossings += 1;
            let (pa, pb): (f64, f64) = (pair[0][0].parse().unwrap(), pair[1][0].parse().unwrap());
            let root = (0.25f64).acos();
            assert!(
                (pa <= root && root <= pb)
                    || (pa <= 2.0 * std::f64::consts::PI - root
                        && 2.0 * std::f64::consts::PI - root <= pb)
            );
        }
    }
    assert_eq!(crossings, 2);
    // the sidecar-less stdout run prints the resolved config on stderr
    let cfg: Value = serde_json::from_str(&stderr(&out)).unwrap();
    assert_eq!(cfg["unitary"], "ZZ");
    assert_eq!(cfg["scan"]["steps"], 101);
}

#[test]
fn fig2_scan_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    let out = anew(&["scan", "--preset", "fig2", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 101);
    for r in &rows {
        let p: f64 = r[0].parse().unwrap();
        let w: f64 = r[1].parse().unwrap();
        assert!((w - (3.0 * p - 2.0) / 16.0).abs() < 1e-12);
        assert!(
            r[6] >= r[5],
            "detected_nonlinear < detected_linear at p = {p}"
        );
    }
    let sidecar = dir.path().join("fig2.csv.config.json");
    let cfg: Value = serde_json::from_str(&fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_eq!(cfg["preset"], "fig2");
    assert_eq!(cfg["witness"]["source"], "smolin");
    assert_eq!(cfg["n"], 10);
}

#[test]
fn two_point_scan_and_bad_scans() {
    let out = anew(&["scan", "--preset", "fig2", "--scan", "p:0:1:2"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[1][0], "1");
    assert_eq!(anew(&["scan", "--scan", "p:0:1:1"]).status.code(), Some(2));
    assert_eq!(
        anew(&["scan", "--scan", "theta:0:1:5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        anew(&["scan", "--scan", "phi:0:1:5", "--unitary", "XI"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn scan_json_is_deterministic() {
    let a = anew(&[
        "scan",
        "--preset",
        "fig1",
        "--format",
        "json",
        "--scan",
        "phi:0:pi:11",
    ]);
    let b = anew(&[
        "scan",
        "--preset",
        "fig1",
        "--format",
        "json",
        "--scan",
        "phi:0:pi:11",
    ]);
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["rows"].as_array().unwrap().len(), 11);
    assert_eq!(report["config"]["format"], "json");
}

#[test]
fn check_access_exit_codes() {
    let out = anew(&["check-access", "--witness", "w0", "--unitary", "swap_AA'"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["certificate"]["verdict"], "analytic-accessible");

    let out = anew(&[
        "check-access",
        "--witness",
        "w0",
        "--unitary",
        "swap",
        "--sufficient",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cert = &json(&out)["certificate"];
    assert_eq!(cert["verdict"], "sufficient-accessible");
    assert_eq!(cert["checks"]["algebra_closed"], true);

    let out = anew(&["check-access", "--unitary", "XI"]);
    assert_eq!(out.status.code(), Some(4));
    let cert = &json(&out)["certificate"];
    assert!(cert["residuals"]["U_in_V'"].as_f64().unwrap() > 0.1);

    assert_eq!(
        anew(&["check-access", "--format", "csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn complete_basis_decomposition_is_accessible() {
    let labels = ["I", "X", "Y", "Z"];
    let mut terms = Vec::new();
    for a in labels {
        for b in labels {
            let coeff = if a == b { 0.25 } else { 0.0 };
            terms.push(format!(r#"{{"coeff":{coeff},"A":"{a}","B":"{b}"}}"#));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = witness_file(
        &dir,
        "full.json",
        &format!(r#"{{"dA":2,"dB":2,"terms":[{}]}}"#, terms.join(",")),
    );
    for u in ["XI", "YZ", "swap"] {
        let out = anew(&[
            "check-access",
            "--witness",
            &path,
            "--unitary",
            u,
            "--sufficient",
        ]);
        assert_eq!(out.status.code(), Some(0), "{u}: {}", stderr(&out));
    }
}

#[test]
fn simulate_is_reproducible_and_dominant() {
    let args = [
        "simulate", "--shots", "1000", "--trials", "200", "--seed", "42", "--n", "4",
    ];
    let a = anew(&args);
    let b = anew(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["seed"], 42);
    assert_eq!(report["dominance_fraction"], 1.0);
    assert!(report["nonlinear_rate"].as_f64().unwrap() >= report["linear_rate"].as_f64().unwrap());
    assert_eq!(floats(&report["w_stderr"]).len(), 5);
}

#[test]
fn simulate_separable_false_positives() {
    let product = r#"{"family":"product","kets":[[[1,0],[0,0]],[[1,0],[0,0]]]}"#;
    let out = anew(&[
        "simulate", "--state", product, "--shots", "10000", "--trials", "100", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert!(report["linear_rate"].as_f64().unwrap() <= 0.05);
    assert!(report["nonlinear_rate"].as_f64().unwrap() <= 0.05);
}

#[test]
fn simulate_phi_pi_reports_significance() {
    let out = anew(&[
        "simulate", "--preset", "fig1", "--shots", "10000", "--trials", "20", "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert!(report["w_infinity"].as_f64().unwrap() < 0.0);
    assert!(report["significance"].as_f64().unwrap() > 3.0);
    let out = anew(&["simulate", "--unitary", "XI"]);
    assert_eq!(out.status.code(), Some(3));
}
