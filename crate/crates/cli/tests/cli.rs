use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;

use serde_json::Value;
use wlab_core::ingest::{analytic_to_arithmetic, FormFile};
use wlab_core::Complex64;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/forms")
}

fn form(label: &str) -> String {
    data_dir().join(format!("{label}.form")).display().to_string()
}

fn wlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlab")).args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.code().is_some(), "killed");
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn column(report: &Value, name: &str) -> Vec<Value> {
    let cols = report["columns"].as_array().unwrap();
    let i = cols.iter().position(|c| c == name).unwrap();
    report["rows"].as_array().unwrap().iter().map(|r| r[i].clone()).collect()
}

#[test]
fn h_table_agrees_with_the_closed_form() {
    let out = wlab(&["h-table", "--p", "3..7", "--c", "2", "--twists", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["rows"].as_array().unwrap().len(), 3);
    for (p, h) in column(&r, "p").iter().zip(column(&r, "h_exhaustive")) {
        let p = p.as_f64().unwrap();
        assert!((h.as_f64().unwrap() - p.sqrt()).abs() < 1e-8);
    }
    assert!(column(&r, "agree").iter().all(|a| a == true));
    assert!(column(&r, "twist_invariant").iter().all(|a| a == true));
}

#[test]
fn conductor_p_gets_a_note_row() {
    let r = json_of(&wlab(&["h-table", "--p", "5", "--c", "1"]));
    let notes = column(&r, "note");
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("out of closed-form scope")));
    assert_eq!(column(&r, "chi")[1], "both ramified");
}

#[test]
fn empty_range_is_an_empty_table() {
    let out = wlab(&["h-table", "--p", "8..7", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, vec!["p,c,chi,h_closed,h_exhaustive,agree,cell,v,twist_invariant,note"]);
}

#[test]
fn local_closed_form_matches_the_oracle() {
    let closed = json_of(&wlab(&["local", "--p", "5", "--all-chars"]));
    let oracle = json_of(&wlab(&["local", "--p", "5", "--all-chars", "--oracle"]));
    let (a, b) = (column(&closed, "abs_w"), column(&oracle, "abs_w"));
    assert_eq!(a.len(), b.len());
    assert_eq!(a.len(), 16 * 6 * 4 * 20);
    for (x, y) in a.iter().zip(&b) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-10);
    }
    assert!(column(&oracle, "provenance").iter().all(|p| p == "Oracle"));
    assert!((closed["summary"]["max_abs_w"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn certify_every_ingested_form() {
    let dir = data_dir().display().to_string();
    let out = wlab(&["certify", "--data-dir", &dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_of(&out);
    let labels = column(&r, "label");
    let pass = column(&r, "pass");
    let notes = column(&r, "note");
    assert_eq!(labels.len(), 10);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 10);
    for ((l, p), n) in labels.iter().zip(&pass).zip(&notes) {
        if l == "11.2.k0.a" {
            assert!(p.is_null());
            assert!(n.as_str().unwrap().contains("unavailable"));
        } else {
            assert_eq!(p, true, "{l}");
        }
    }
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for (ext, args) in [
        ("json", vec!["certify", "--data-dir", &data_dir().display().to_string(), "--forms", "25.2.k4.a,11.2.k0.a"]),
        ("csv", vec!["h-table", "--p", "3,5", "--c", "1..3", "--twists", "1", "--seed", "7"]),
    ] {
        let path = dir.path().join(format!("report.{ext}"));
        let path_s = path.display().to_string();
        let mut full: Vec<&str> = args.iter().map(|s| &**s).collect();
        full.extend(["--out", &path_s]);
        assert_eq!(wlab(&full).status.code(), Some(0));
        let first = std::fs::read(&path).unwrap();
        full.extend(["--jobs", "1"]);
        assert_eq!(wlab(&full).status.code(), Some(0));
        assert_eq!(std::fs::read(&path).unwrap(), first, "{ext}");
    }
}

#[test]
fn global_eval_at_z_chi() {
    let r = json_of(&wlab(&["global", "eval", "--form", &form("25.2.k4.a"), "--points", "zchi,1/2:1/10"]));
    let abs = column(&r, "abs");
    assert!(abs[0].as_f64().unwrap() >= 0.95 * 5f64.sqrt() * (-std::f64::consts::TAU).exp());
    assert_eq!(column(&r, "point")[1], "twisted(i)");
    assert!(r["summary"]["zchi_twisted_gap"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["inputs"][0]["name"], "25.2.k4.a.form");
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn global_scan_and_hecke_integral() {
    let r = json_of(&wlab(&["global", "scan", "--form", &form("25.2.k4.a")]));
    assert!(r["summary"]["max"].as_f64().unwrap() >= 25f64.powf(0.25) / (std::f64::consts::TAU * std::f64::consts::E));
    assert!(r["details"]["scan"]["mandatory"].as_array().unwrap().len() == 3);
    let r = json_of(&wlab(&["global", "hecke-integral", "--form", &form("25.2.k4.a")]));
    assert!(r["summary"]["series_difference"].as_f64().unwrap() < 1e-9);
    assert!(r["summary"]["reference_difference"].as_f64().unwrap() <= 2.0);
}

#[test]
fn wilton_failure_exits_3_after_writing_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("w.json");
    let out = wlab(&[
        "global",
        "wilton",
        "--form",
        &form("25.2.k4.a"),
        "--ratio",
        "50",
        "--ms",
        "",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert!(column(&r, "first_m").iter().all(Value::is_null));
    let ok = json_of(&wlab(&["global", "wilton", "--form", &form("25.2.k4.a")]));
    assert!(ok["summary"]["upper_exponent"].as_f64().unwrap() <= 0.6);
}

#[test]
fn blocked_form_exits_2() {
    let mut ff = FormFile::read(Path::new(&form("25.2.k4.a"))).unwrap();
    ff.coefficients[5] += Complex64::new(1e-4, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.form");
    ff.save(&path).unwrap();
    let out = wlab(&["global", "eval", "--form", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiplicativity"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(wlab(&["h-table", "--p", "9"]).status.code(), Some(1));
    assert_eq!(wlab(&["global", "eval", "--form", "/nonexistent.form"]).status.code(), Some(1));
    assert_eq!(wlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[h-table]\np = [5]\nc = \"2\"\ntwists = 1\n").unwrap();
    let cfg_s = cfg.display().to_string();
    let from_file = json_of(&wlab(&["--config", &cfg_s, "h-table"]));
    assert_eq!(column(&from_file, "p"), vec![Value::from(5)]);
    assert_eq!(from_file["config"]["command"]["h-table"]["twists"], 1);
    let flag_wins = json_of(&wlab(&["--config", &cfg_s, "h-table", "--p", "3"]));
    assert_eq!(column(&flag_wins, "p"), vec![Value::from(3)]);
    assert_ne!(from_file["config_hash"], flag_wins["config_hash"]);
    std::fs::write(&cfg, "[h-table]\nnonsense = 1\n").unwrap();
    assert_eq!(wlab(&["--config", &cfg_s, "h-table"]).status.code(), Some(1));
}

#[test]
fn mvalue_single_form_space() {
    let dir = data_dir().display().to_string();
    let r = json_of(&wlab(&["mvalue", "--level", "25", "--chi", "k4", "--points", "zchi", "--average", "--data-dir", &dir]));
    let m = column(&r, "m_chi")[0].as_f64().unwrap();
    let largest = column(&r, "largest_term")[0].as_f64().unwrap();
    assert!((m - largest).abs() <= 1e-15 * m);
    assert_eq!(r["summary"]["complete"], true);
    assert!((r["summary"]["average_times_4pi"].as_f64().unwrap() - 0.4).abs() < 1e-8);
    assert_eq!(wlab(&["mvalue", "--level", "25", "--data-dir", &dir]).status.code(), Some(1));
}

#[test]
fn arch_exponents() {
    let r = json_of(&wlab(&["arch", "--series", "principal"]));
    assert!((r["summary"]["max_exponent"].as_f64().unwrap() - 1.0 / 6.0).abs() <= 0.02);
    let r = json_of(&wlab(&["arch", "--series", "discrete", "--grid", "100,1000"]));
    assert!((r["summary"]["ratio_over_k_quarter"].as_f64().unwrap() / 0.6316 - 1.0).abs() < 0.01);
    assert_eq!(column(&r, "parameter").len(), 2);
}

/// Serves one canned body to every request.
fn serve(body: String) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).unwrap_or(0) > 0 && line != "\r\n" {
                line.clear();
            }
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    url
}

#[test]
fn fetch_saves_then_serves_from_cache() {
    let ff = FormFile::read(Path::new(&form("25.2.k4.a"))).unwrap();
    let an: Vec<[f64; 2]> = analytic_to_arithmetic(&ff.coefficients[..2100]).iter().map(|z| [z.re, z.im]).collect();
    let body = serde_json::json!({ "forms": [{
        "level": 25, "weight": 2, "char_p": 5, "char_c": 2, "char_generator": 2,
        "char_dlog_multiplier": 4, "embedding": 0, "an": an, "url": "mock://25.2.k4.a"
    }]})
    .to_string();
    let url = serve(body);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache").display().to_string();
    let save = dir.path().join("forms");
    let save_s = save.display().to_string();
    let args = ["fetch", "--level", "25", "--char-orbit", "k4", "--min-coeffs", "2000", "--cache-dir", &cache];
    let mut online: Vec<&str> = args.to_vec();
    online.extend(["--endpoint", &url, "--save-dir", &save_s]);
    let out = wlab(&online);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_of(&out);
    assert_eq!(r["summary"]["from_cache"], false);
    assert_eq!(column(&r, "coefficients"), vec![Value::from(2100)]);
    let saved = save.join("25.2.k4.a.form");
    let back = FormFile::read(&saved).unwrap();
    assert!((back.coefficients[5] - ff.coefficients[5]).norm() < 1e-14);

    let mut offline: Vec<&str> = args.to_vec();
    offline.push("--offline");
    let r = json_of(&wlab(&offline));
    assert_eq!(r["summary"]["from_cache"], true);
}

#[test]
fn fetch_reports_an_empty_space() {
    let url = serve("{\"forms\": []}".into());
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().display().to_string();
    let out = wlab(&["fetch", "--level", "9", "--char-orbit", "k2", "--endpoint", &url, "--cache-dir", &cache]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["summary"]["forms"], 0);
    assert!(r["summary"]["note"].as_str().unwrap().contains("empty space"));
}
