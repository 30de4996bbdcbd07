//! Golden runs of the `bushy` binary over the bundled instances.
//!
//! Standard output of each case is compared byte for byte with
//! `tests/golden/<name>.out`; failing cases compare standard error instead.
//! Set `UPDATE_GOLDENS=1` to rewrite the files.

mod common;

use std::process::Command;

use common::{bushy, golden_dir, instances, Case, Run, CASES};

/// The text a case is pinned to: standard output on success or a negative
/// answer, standard error on a usage failure.
fn pinned(c: &Case, r: &Run) -> String {
    if c.exit == 2 {
        r.stderr.clone()
    } else {
        r.stdout.clone()
    }
}

fn check_golden(c: &Case, got: &str) -> Result<(), String> {
    let path = golden_dir().join(format!("{}.out", c.name));
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::write(&path, got).unwrap();
        return Ok(());
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want != got {
        return Err(format!("{}: output differs from {}\n--- got ---\n{got}", c.name, path.display()));
    }
    Ok(())
}

#[test]
fn goldens_match_and_are_thread_independent() {
    let mut failures = Vec::new();
    for c in CASES {
        let a = bushy(c.args, "1");
        if a.code != c.exit {
            failures.push(format!("{}: exit {} (wanted {})\n{}", c.name, a.code, c.exit, a.stderr));
            continue;
        }
        let b = bushy(c.args, "4");
        if (a.code, &a.stdout, &a.stderr) != (b.code, &b.stdout, &b.stderr) {
            failures.push(format!("{}: output depends on the thread count", c.name));
        }
        if let Err(e) = check_golden(c, &pinned(c, &a)) {
            failures.push(e);
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn repeated_runs_are_identical() {
    for c in CASES.iter().filter(|c| !c.name.starts_with("fuzz-weak")) {
        let a = bushy(c.args, "2");
        let b = bushy(c.args, "2");
        assert_eq!((a.code, a.stdout, a.stderr), (b.code, b.stdout, b.stderr), "{}", c.name);
    }
}

#[test]
fn certificates_verify() {
    let dir = tempfile::tempdir().unwrap();
    for c in CASES.iter().filter(|c| c.exit != 2 && c.args[0] != "fuzz") {
        let cert = dir.path().join(format!("{}.json", c.name));
        let mut args: Vec<&str> = c.args.to_vec();
        let cert_s = cert.to_str().unwrap();
        args.extend(["--out", cert_s]);
        let r = bushy(&args, "1");
        assert_eq!(r.code, c.exit, "{}: {}", c.name, r.stderr);
        assert!(r.stdout.is_empty(), "{}: --out still wrote to stdout", c.name);
        let v = bushy(&["verify", cert_s, c.args[1]], "1");
        assert_eq!(v.code, 0, "{}: verify failed\n{}{}", c.name, v.stdout, v.stderr);
    }
}

#[test]
fn verify_rejects_a_foreign_instance_and_a_tampered_result() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let cert_s = cert.to_str().unwrap();
    let r = bushy(&["check-big", "depth1.json", "--universe", "U", "--set", "B", "--bounds", "g", "--out", cert_s], "1");
    assert_eq!(r.code, 0);
    let v = bushy(&["verify", cert_s, "tree4.json"], "1");
    assert_ne!(v.code, 0);

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    doc["positive"] = serde_json::Value::Bool(false);
    std::fs::write(&cert, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let v = bushy(&["verify", cert_s, "depth1.json"], "1");
    assert_ne!(v.code, 0, "{}", v.stdout);
}

#[test]
fn error_locations_are_line_and_column() {
    let r = bushy(&["check-big", "malformed.json", "--universe", "U", "--set", "B", "--bounds", "g"], "1");
    assert!(r.stderr.starts_with("parse error: malformed.json:4:19:"), "{}", r.stderr);
    let r = bushy(&["check-big", "bad-tuple.json", "--universe", "U", "--set", "B", "--bounds", "g"], "1");
    assert!(r.stderr.contains("bad-tuple.json:4:11:"), "{}", r.stderr);
}

#[test]
fn weak_concat_counterexamples_persist_as_instances() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().to_str().unwrap();
    let r = bushy(&["fuzz", "weakConcat", "--budget", "exhaustive-small", "--fixtures", fx], "0");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["summary"]["violations"], 0);
    let cexs = report["counterexamples"].as_array().unwrap();
    assert!(!cexs.is_empty());
    for c in cexs {
        assert_eq!(c["revalidated"], true, "{c}");
    }
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), cexs.len());
    for f in &files {
        let src = std::fs::read_to_string(f).unwrap();
        bushy_cli::doc::parse_document(&src).unwrap_or_else(|e| panic!("{}: {e:?}", f.display()));
        // Each persisted counterexample is itself a runnable instance.
        let r = bushy(&["check-big", f.to_str().unwrap(), "--universe", "U", "--set", "C", "--bounds", "g"], "1");
        assert!(r.code == 0 || r.code == 1, "{}: {}", f.display(), r.stderr);
    }
}

#[test]
fn trace_records_are_sequenced() {
    let dir = tempfile::tempdir().unwrap();
    let tr = dir.path().join("t.jsonl");
    let args = ["extend", "conditions.json", "--condition", "P", "--jump", "J0", "--level", "1", "--trace", tr.to_str().unwrap()];
    assert_eq!(bushy(&args, "1").code, 0);
    assert_eq!(bushy(&args, "1").code, 0);
    let text = std::fs::read_to_string(&tr).unwrap();
    let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let starts = recs.iter().filter(|r| r["event"] == "start").count();
    assert_eq!(starts, 2);
    assert_eq!(recs.last().unwrap()["event"], "end");
    for w in recs.windows(2) {
        if w[1]["event"] != "start" {
            assert_eq!(w[1]["seq"].as_u64().unwrap(), w[0]["seq"].as_u64().unwrap() + 1);
        }
    }
}

#[test]
fn cap_comes_from_the_environment() {
    let args = ["check-big", "depth1.json", "--universe", "U", "--set", "B", "--bounds", "g"];
    let out = Command::new(env!("CARGO_BIN_EXE_bushy")).args(args).current_dir(instances()).env("BUSHY_CAP", "7").output().unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["cap"], 7);
}
