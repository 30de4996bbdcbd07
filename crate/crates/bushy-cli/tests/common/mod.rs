//! Shared by the golden and acceptance targets: the pinned CLI cases and a
//! runner for the `bushy` binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
}

pub const CASES: &[Case] = &[
    Case { name: "check-big-depth1", args: &["check-big", "depth1.json", "--universe", "U", "--set", "B", "--bounds", "g"], exit: 0 },
    Case { name: "check-big-thin", args: &["check-big", "depth1.json", "--universe", "U", "--set", "thin", "--bounds", "g"], exit: 1 },
    Case {
        name: "check-big-brute",
        args: &["check-big", "depth1.json", "--universe", "U", "--set", "B", "--bounds", "g", "--brute"],
        exit: 0,
    },
    Case { name: "check-big-product", args: &["check-big", "product.json", "--universe", "U", "--set", "B", "--bounds", "g"], exit: 1 },
    Case { name: "closure", args: &["closure", "depth1.json", "--universe", "U", "--set", "B", "--bound", "g"], exit: 0 },
    Case {
        name: "split-tree4",
        args: &["split", "tree4.json", "--universe", "U", "--left", "B", "--right", "C", "--base", "([])", "--bounds", "g", "--bounds2", "g"],
        exit: 0,
    },
    Case {
        name: "split-product",
        args: &[
            "split", "product.json", "--universe", "U", "--left", "B", "--right", "L", "--base", "([],[])", "--bounds", "one", "--bounds2",
            "one",
        ],
        exit: 0,
    },
    Case { name: "concat", args: &["concat", "product.json", "--universe", "U", "--system", "S", "--set", "L", "--bounds", "g"], exit: 0 },
    Case {
        name: "project",
        args: &["project", "product.json", "--universe", "U", "--set", "B", "--base", "D", "--bounds", "const(2)"],
        exit: 0,
    },
    Case { name: "theta-k", args: &["theta", "functional1d.json", "--functional", "K", "--bad", "none", "--mu", "[]", "--bound", "g"], exit: 0 },
    Case { name: "theta-g", args: &["theta", "functional1d.json", "--functional", "G", "--bad", "none", "--mu", "[]", "--bound", "g"], exit: 0 },
    Case {
        name: "find-splittings",
        args: &["find-splittings", "functional1d.json", "--functional", "GW", "--bad", "none", "--tau", "([])", "--bound", "g", "--mode", "one-d"],
        exit: 0,
    },
    Case {
        name: "extract-splitting",
        args: &[
            "extract-splitting", "extract1d.json", "--functional", "G", "--a", "A", "--pair", "s=E0,E1", "--f", "F", "--bad", "bad", "--g", "g",
            "--h", "g", "--s", "s", "--s-star", "s_star",
        ],
        exit: 0,
    },
    Case { name: "validate-above", args: &["validate-condition", "conditions.json", "--condition", "P", "--jump", "J0"], exit: 0 },
    Case { name: "validate-explicit", args: &["validate-condition", "conditions.json", "--condition", "R", "--jump", "JR"], exit: 0 },
    Case { name: "extend", args: &["extend", "conditions.json", "--condition", "P", "--jump", "J0", "--level", "1"], exit: 0 },
    Case {
        name: "sigma1-big",
        args: &[
            "sigma1", "conditions.json", "--condition", "P", "--jump", "J0", "--set", "C1", "--tau", "([],[])", "--bound", "g", "--witness",
            "listed(-1)",
        ],
        exit: 0,
    },
    Case {
        name: "sigma1-diverge",
        args: &[
            "sigma1", "conditions.json", "--condition", "P", "--jump", "J0", "--set", "cone", "--tau", "([],[])", "--bound", "g", "--witness",
            "listed(-1)",
        ],
        exit: 1,
    },
    Case {
        name: "build-totality",
        args: &[
            "build-totality", "conditions.json", "--condition", "P", "--jump", "J0", "--set", "C1", "--set", "C2", "--set", "C3", "--bound", "g",
            "--witness", "listed(-1)",
        ],
        exit: 0,
    },
    Case {
        name: "build-splitting",
        args: &[
            "build-splitting", "conditions.json", "--condition", "P1", "--jump", "J0", "--functional", "G", "--bound", "g", "--witness",
            "listed(-1)", "--mode", "one-d", "--rounds", "2",
        ],
        exit: 0,
    },
    Case { name: "restrict", args: &["restrict", "conditions.json", "--condition", "R", "--jump", "JR"], exit: 0 },
    Case { name: "homogenize", args: &["homogenize", "conditions.json", "--condition", "R", "--jump", "JR"], exit: 0 },
    Case { name: "bdnc", args: &["bdnc", "conditions.json", "--universe", "B4", "--jump", "JB", "--bound", "const(2)"], exit: 0 },
    Case { name: "fuzz-big-subset", args: &["fuzz", "bigSubset", "--budget", "50"], exit: 0 },
    Case { name: "fuzz-weak-concat", args: &["fuzz", "weakConcat", "--budget", "exhaustive-small"], exit: 0 },
    Case { name: "malformed", args: &["check-big", "malformed.json", "--universe", "U", "--set", "B", "--bounds", "g"], exit: 2 },
    Case { name: "bad-tuple", args: &["check-big", "bad-tuple.json", "--universe", "U", "--set", "B", "--bounds", "g"], exit: 2 },
    Case { name: "unknown-set", args: &["check-big", "depth1.json", "--universe", "U", "--set", "nope", "--bounds", "g"], exit: 2 },
];

pub fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("instances")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn bushy(args: &[&str], threads: &str) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_bushy"))
        .args(args)
        .current_dir(instances())
        .env("BUSHY_THREADS", threads)
        .env_remove("BUSHY_CAP")
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

