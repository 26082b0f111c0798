use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn covkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covkit"))
        .args(args)
        .output()
        .expect("run covkit")
}

fn report(args: &[&str]) -> Value {
    let out = covkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn doc_path(name: &str) -> String {
    data(name).to_str().unwrap().to_string()
}

/// Writes a modified copy of a data document into a scratch file.
fn variant(name: &str, tag: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap();
    edit(&mut doc);
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(format!("{tag}.json"));
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_rank_one_example() {
    let r = report(&["classify", &doc_path("example_ic.json")]);
    let f = &r["flags"];
    assert_eq!(f["rank1"], true);
    assert_eq!(f["pvm"], false);
    assert_eq!(f["informationally_complete"], true);
    assert_eq!(f["extreme_covariant"], true);
    assert_eq!(f["extreme_global"], true);
    assert_eq!(r["evidence"]["span_dimension"], 9);
    assert_eq!(r["effects"].as_array().unwrap().len(), 9);
    assert_eq!(r["command"], "classify");
    assert!(r["timings"]["total_ms"].is_number());
}

#[test]
fn seed_flag_overrides_document() {
    let r = report(&["classify", &doc_path("example_ic.json"), "--seed", "42"]);
    assert_eq!(r["seed"], 42);
}

#[test]
fn empty_seed_list_is_rejected() {
    let path = variant("example_ic.json", "empty_seeds", |d| d["seeds"] = Value::Array(vec![]));
    let out = covkit(&["classify", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no seeds"));
}

#[test]
fn ragged_operator_names_its_location() {
    let path = variant("example_ic.json", "ragged", |d| {
        d["seeds"][0] = serde_json::json!({ "orbit": 0, "operator": [[1, 0, 0], [0, 0]] });
    });
    let out = covkit(&["classify", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds[0].operator"));
}

#[test]
fn malformed_entry_reports_json_path() {
    let path = variant("example_ic.json", "bad_entry", |d| {
        d["seeds"][0] = serde_json::json!({ "orbit": 0, "operator": [[1, 0, 0], [0, "x", 0], [0, 0, 0]] });
    });
    let out = covkit(&["classify", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds[0].operator[1][1]"));
}

#[test]
fn unknown_field_is_rejected() {
    let path = variant("example_ic.json", "unknown", |d| d["colour"] = "red".into());
    assert_eq!(covkit(&["classify", &path]).status.code(), Some(1));
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let out = covkit(&["classify", &doc_path("example_ic.json"), "--tol-psd=0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_section_policy_is_rejected() {
    let out = covkit(&["classify", &doc_path("example_ic.json"), "--section-policy", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn section_policy_does_not_change_effects() {
    let a = report(&["classify", &doc_path("example_ic.json"), "--section-policy", "lex-min"]);
    let b = report(&["classify", &doc_path("example_ic.json"), "--section-policy", "example"]);
    let (ea, eb) = (a["effects"].as_array().unwrap(), b["effects"].as_array().unwrap());
    for (x, y) in ea.iter().zip(eb) {
        assert_eq!(x["point"], y["point"]);
        let flat = |v: &Value| -> Vec<f64> {
            let mut out = Vec::new();
            for row in v["matrix"].as_array().unwrap() {
                for z in row.as_array().unwrap() {
                    out.extend(z.as_array().unwrap().iter().map(|t| t.as_f64().unwrap()));
                }
            }
            out
        };
        for (p, q) in flat(x).iter().zip(flat(y)) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn solve_irreducible_cosets() {
    let r = report(&["solve", &doc_path("schur.json")]);
    assert_eq!(r["linear_dimension"], 1);
    assert_eq!(r["affine_dimension"], 0);
}

#[test]
fn solve_trivial_group() {
    let r = report(&["solve", &doc_path("trivial.json")]);
    assert_eq!(r["linear_dimension"], 8);
    assert_eq!(r["affine_dimension"], 4);
    assert_eq!(r["affine_basis"].as_array().unwrap().len(), 4);
}

#[test]
fn solve_with_seeds_reports_residual() {
    let r = report(&["solve", &doc_path("example_ic.json")]);
    assert_eq!(r["linear_dimension"], 14);
    assert!(r["seeded"]["residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(r["seeded"]["extreme_covariant"], true);
}

#[test]
fn dilate_rank_one_example() {
    let r = report(&["dilate", &doc_path("example_ic.json")]);
    assert_eq!(r["bundle"]["dimension"], 12);
    assert_eq!(r["bundle"]["checks"]["passed"], true);
    assert_eq!(r["sym_embedding"]["passed"], true);
    assert_eq!(r["passed"], true);
}

#[test]
fn dilate_projective_lifts_multiplier() {
    let r = report(&["dilate", &doc_path("weyl.json")]);
    assert_eq!(r["lifted"]["multiplier_order"], 2);
    assert_eq!(r["lifted"]["extension_order"], 8);
    assert_eq!(r["lifted"]["bundle"]["checks"]["passed"], true);
    assert_eq!(r["passed"], true);
}

#[test]
fn luders_instrument_pipeline() {
    let path = doc_path("luders.json");
    let v = report(&["instrument", "validate", &path]);
    assert_eq!(v["checks"]["passed"], true);
    let b = report(&["instrument", "build", &path]);
    assert_eq!(b["outcomes"].as_array().unwrap().len(), 9);
    assert!(b["checks"]["completeness_defect"].as_f64().unwrap() < 1e-9);
    let d = report(&["instrument", "dilate", &path]);
    assert_eq!(d["dilation"]["checks"]["passed"], true);
    let e = report(&["instrument", "extreme", &path]);
    assert_eq!(e["covariant"]["extreme"], true);
    assert!(e["global"]["extreme"].is_boolean());
}

#[test]
fn irreducible_class_is_covariantly_but_not_globally_extreme() {
    let e = report(&["instrument", "extreme", &doc_path("schur_instrument.json")]);
    assert_eq!(e["covariant"]["extreme"], true);
    assert_eq!(e["global"]["extreme"], false);
}

#[test]
fn nuclear_instrument_validates() {
    let path = doc_path("nuclear.json");
    let v = report(&["instrument", "validate", &path]);
    assert_eq!(v["checks"]["passed"], true);
    let e = report(&["instrument", "extreme", &path]);
    assert!(e["covariant"].is_null());
    let out = covkit(&["instrument", "dilate", &path]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn channel_commands() {
    let path = doc_path("channel.json");
    assert_eq!(report(&["channel", "validate", &path])["passed"], true);
    let e = report(&["channel", "extreme", &path]);
    assert!(e["covariant"]["extreme"].is_boolean());
    let with_space = variant("channel.json", "channel_space", |d| {
        d["space"] = serde_json::json!({ "kind": "natural" });
    });
    assert_eq!(covkit(&["channel", "validate", &with_space]).status.code(), Some(1));
}

#[test]
fn symfamily_json_and_csv() {
    let r = report(&["symfamily", "--dim", "3", "--grid", "0:1:5"]);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["pvm"], true);
    assert!(rows[1..].iter().all(|x| x["informationally_complete"] == true));
    assert!(r["continuity"]["max_jump"].is_number());

    let out = covkit(&["symfamily", "--dim", "2", "--grid", "0:1:3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("alpha,rank1,pvm"));
}

#[test]
fn symfamily_rejects_bad_dimension() {
    assert_eq!(covkit(&["symfamily", "--dim", "9", "--alpha", "0.5"]).status.code(), Some(1));
    assert_eq!(covkit(&["symfamily", "--dim", "3", "--grid", "0:1"]).status.code(), Some(1));
}

#[test]
fn csv_only_for_symfamily() {
    let out = covkit(&["classify", &doc_path("example_ic.json"), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_is_canonical_json() {
    let out = covkit(&["normalize", &doc_path("example_ic.json")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&String> = parsed.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(!text.trim_end().contains('\n'));
    assert!(!text.contains(": "));
}

#[test]
fn output_file_and_stdin() {
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).join("classify_out.json");
    let out = covkit(&["classify", &doc_path("example_ic.json"), "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(file["flags"]["rank1"], true);

    let mut child = Command::new(env!("CARGO_BIN_EXE_covkit"))
        .args(["classify", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(std::fs::read_to_string(data("example_ic.json")).unwrap().as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let piped: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(piped["flags"], file["flags"]);
}

#[test]
fn help_exits_zero() {
    assert_eq!(covkit(&["--help"]).status.code(), Some(0));
    assert_eq!(covkit(&["frobnicate"]).status.code(), Some(1));
}
