use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shotnoise")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf-8 output")
}

/// Parses CSV output into a header and rows of JSON-like values.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<Value>>) {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().expect("header").iter().map(str::to_string).collect();
    let rows = rd
        .records()
        .map(|r| {
            r.expect("record")
                .iter()
                .map(|f| match f {
                    "true" => Value::Bool(true),
                    "false" => Value::Bool(false),
                    "NaN" => Value::Null,
                    _ => f.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(f)),
                })
                .collect()
        })
        .collect();
    (header, rows)
}

fn same_payload(csv_text: &str, json_text: &str) {
    let (header, rows) = csv_rows(csv_text);
    let doc: Value = serde_json::from_str(json_text).expect("valid JSON");
    let obj = doc.as_object().expect("top-level object");
    assert_eq!(obj.len(), 3);
    let columns: Vec<String> = obj["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().to_string()).collect();
    assert_eq!(header, columns);
    assert!(obj["meta"].is_object());
    let jrows = obj["rows"].as_array().unwrap();
    assert_eq!(rows.len(), jrows.len());
    for (a, b) in rows.iter().zip(jrows) {
        let b = b.as_array().unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            match (x.as_f64(), y.as_f64()) {
                (Some(u), Some(v)) => assert_eq!(u.to_bits(), v.to_bits(), "{u} vs {v}"),
                _ => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn density_csv_and_json_carry_identical_numbers() {
    let base = ["density", "--r", "2", "--k", "0,2,4", "--y", "-2:4:0.5", "--oracle"];
    let csv_text = stdout(&base);
    let json_text = stdout(&[&base[..], &["--format", "json"]].concat());
    same_payload(&csv_text, &json_text);
    let (header, rows) = csv_rows(&csv_text);
    assert_eq!(rows.len(), 13);
    assert!(header.contains(&"rel_error_k4".to_string()) && header.contains(&"valid_k2".to_string()));
}

#[test]
fn density_errors_shrink_with_order() {
    let (header, rows) = csv_rows(&stdout(&["density", "--r", "2", "--k", "0,2,4", "--y", "-2:4:0.25", "--oracle"]));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (e0, e2, e4) = (col("rel_error_k0"), col("rel_error_k2"), col("rel_error_k4"));
    for row in rows {
        let e = |i: usize| row[i].as_f64().unwrap();
        assert!(e(e4) <= e(e2) && e(e2) <= e(e0), "{row:?}");
    }
}

#[test]
fn other_commands_have_format_parity() {
    for args in [
        vec!["tilt", "--r", "1.5", "--y", "-1,0,0.5,3"],
        vec!["sample", "radii", "--count", "4", "--draws", "5", "--seed", "2"],
        vec!["sample", "gibbs", "--s", "10", "--n", "16", "--sweeps", "20", "--burn-in", "50"],
        vec!["validate", "--only", "model,tilt"],
    ] {
        let csv_text = stdout(&args);
        let json_text = stdout(&[&args[..], &["--format", "json"]].concat());
        same_payload(&csv_text, &json_text);
    }
}

#[test]
fn raw_grid_matches_standardized_grid() {
    let (_, a) = csv_rows(&stdout(&["density", "--r", "2", "--sbar", "0.75,0.875"]));
    let (_, b) = csv_rows(&stdout(&["density", "--r", "2", "--y", "0,1"]));
    // Density of the raw variable is the standardized one divided by sigma(2) = 1/8.
    for (ra, rb) in a.iter().zip(&b) {
        let (fa, fb) = (ra[2].as_f64().unwrap(), rb[1].as_f64().unwrap());
        assert!((fa - 8.0 * fb).abs() <= 1e-12 * fa);
    }
}

#[test]
fn exit_codes_by_class() {
    assert_eq!(run(&["density", "--r", "2", "--y", "3:1:1"]).status.code(), Some(2));
    assert_eq!(run(&["density", "--r", "2", "--y", "1:2:0"]).status.code(), Some(2));
    assert_eq!(run(&["density", "--r", "2", "--y", "-7"]).status.code(), Some(2));
    assert_eq!(run(&["density", "--r", "2", "--y", "0", "--gamma", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["conditional", "--s", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--only", "nothing"]).status.code(), Some(2));
    assert_eq!(run(&["density", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["density", "--r", "2", "--y", "0", "--oracle", "--abs-tol", "1e-300", "--rel-tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("y = 0") && msg.contains("r = 2"), "{msg}");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn conditional_cdf_is_zero_below_support() {
    let (header, rows) = csv_rows(&stdout(&["conditional", "--s", "10", "--r", "0.3,0.5,0.56,0.7", "--baseline"]));
    assert_eq!(header[..2], ["r".to_string(), "cdf_scheme".to_string()]);
    for row in &rows[..3] {
        assert_eq!(row[1].as_f64(), Some(0.0));
    }
    assert!(rows[3][1].as_f64().unwrap() > 0.3);
}

#[test]
fn validate_scope_and_seed_independence() {
    let tilt = stdout(&["validate", "--only", "tilt", "--format", "json"]);
    let doc: Value = serde_json::from_str(&tilt).unwrap();
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r[0] == "tilt"));

    let a = stdout(&["validate", "--only", "model,tilt,edgeworth", "--seed", "1"]);
    let b = stdout(&["validate", "--only", "model,tilt,edgeworth", "--seed", "2"]);
    assert_eq!(a.lines().skip(1).collect::<Vec<_>>(), b.lines().skip(1).collect::<Vec<_>>());
}

#[test]
fn output_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("shotnoise-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("radii.csv");
    let args = ["sample", "radii", "--count", "3", "--draws", "4", "--seed", "9"];
    let printed = stdout(&args);
    stdout(&[&args[..], &["--output", path.to_str().unwrap()]].concat());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
    std::fs::remove_dir_all(&dir).ok();
}
