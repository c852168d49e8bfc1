use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn corrseek(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrseek"))
        .current_dir(dir)
        .env_remove("CORRSEEK_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = corrseek(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn pairs(stdout: &str) -> Vec<(usize, usize, i64)> {
    stdout
        .lines()
        .map(|l| {
            let v: Vec<&str> = l.split_whitespace().collect();
            (
                v[0].parse().unwrap(),
                v[1].parse().unwrap(),
                v[2].parse().unwrap(),
            )
        })
        .collect()
}

fn planted(sidecar: &Value) -> Vec<(usize, usize, i64)> {
    sidecar["planted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            (
                p["j1"].as_u64().unwrap() as usize,
                p["j2"].as_u64().unwrap() as usize,
                p["ip"].as_i64().unwrap(),
            )
        })
        .collect()
}

const SEARCH: &[&str] = &[
    "--rho",
    "0.5",
    "--tau",
    "0.125",
    "--t",
    "4",
    "--p",
    "2",
    "--s",
    "16384",
    "--iterations",
    "3",
    "--threshold-constant",
    "0.5",
];

#[test]
fn generate_is_deterministic_and_sidecar_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let args = [
        "generate",
        "lightbulb",
        "--n",
        "256",
        "--d",
        "512",
        "--rho",
        "0.5",
        "--seed",
        "7",
    ];
    ok(d, &[&args[..], &["--out", "x"]].concat());
    ok(d, &[&args[..], &["--out", "y"]].concat());
    assert_eq!(
        fs::read(d.join("x.pmat")).unwrap(),
        fs::read(d.join("y.pmat")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("x.json")).unwrap(),
        fs::read(d.join("y.json")).unwrap()
    );
    let oracle = pairs(&ok(
        d,
        &["detect", "--a", "x.pmat", "--rho", "0.5", "--oracle"],
    ));
    assert_eq!(oracle, planted(&json(d.join("x.json"))));
}

#[test]
fn binary_matrices_read_back() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate",
            "lightbulb",
            "--n",
            "40",
            "--d",
            "100",
            "--rho",
            "0.6",
            "--seed",
            "2",
            "--out",
            "t",
        ],
    );
    ok(
        d,
        &[
            "generate",
            "lightbulb",
            "--n",
            "40",
            "--d",
            "100",
            "--rho",
            "0.6",
            "--seed",
            "2",
            "--out",
            "b",
            "--binary",
        ],
    );
    assert!(fs::read(d.join("b.pmat")).unwrap().starts_with(b"PMATB1"));
    let oracle = |f: &str| ok(d, &["detect", "--a", f, "--rho", "0.6", "--oracle"]);
    assert_eq!(oracle("t.pmat"), oracle("b.pmat"));
}

#[test]
fn detect_recovers_sidecar_pairs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let gen = [
        "generate", "promise", "--n", "128", "--d", "512", "--rho", "0.5", "--tau", "0.125",
    ];
    ok(
        d,
        &[&gen[..], &["--outliers", "2", "--seed", "4", "--out", "p"]].concat(),
    );
    let want = planted(&json(d.join("p.json")));
    let detect = [
        &[
            "detect", "--a", "p.a.pmat", "--b", "p.b.pmat", "--seed", "1", "--out", "r.json",
        ][..],
        SEARCH,
    ]
    .concat();
    let found = pairs(&ok(d, &detect));
    assert_eq!(found, want);
    let result = json(d.join("r.json"));
    assert_eq!(result["params"]["s"], 16384);
    assert_eq!(result["marks_per_iteration"].as_array().unwrap().len(), 3);
    assert_eq!(result["seed"], 1);
    let oracle = pairs(&ok(
        d,
        &[
            "detect", "--a", "p.a.pmat", "--b", "p.b.pmat", "--rho", "0.5", "--oracle",
        ],
    ));
    assert_eq!(oracle, want);

    let two_level = [&detect[..], &["--kappa", "0.5"]].concat();
    assert_eq!(pairs(&ok(d, &two_level)), want);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate",
            "promise",
            "--n",
            "96",
            "--d",
            "512",
            "--rho",
            "0.5",
            "--tau",
            "0.125",
            "--outliers",
            "2",
            "--seed",
            "9",
            "--out",
            "p",
        ],
    );
    let run = |workers: &str, out: &str| {
        let args = [
            &[
                "detect",
                "--a",
                "p.a.pmat",
                "--b",
                "p.b.pmat",
                "--workers",
                workers,
                "--out",
                out,
            ][..],
            SEARCH,
        ]
        .concat();
        ok(d, &args)
    };
    assert_eq!(run("1", "one.json"), run("4", "four.json"));
    assert_eq!(
        fs::read(d.join("one.json")).unwrap(),
        fs::read(d.join("four.json")).unwrap()
    );
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate", "ov", "--n", "8", "--dprime", "5", "--seed", "11", "--out", "flag",
        ],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_corrseek"))
        .current_dir(d)
        .env("CORRSEEK_SEED", "11")
        .args([
            "generate", "ov", "--n", "8", "--dprime", "5", "--out", "env",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(d.join("flag.ov")).unwrap(),
        fs::read(d.join("env.ov")).unwrap()
    );
    ok(
        d,
        &[
            "generate", "ov", "--n", "8", "--dprime", "5", "--out", "zero",
        ],
    );
    assert_ne!(
        fs::read(d.join("flag.ov")).unwrap(),
        fs::read(d.join("zero.ov")).unwrap()
    );
}

#[test]
fn no_list_is_quiet_without_outliers() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let detect = |prefix: &str, seed: &str| {
        let (a, b) = (format!("{prefix}.a.pmat"), format!("{prefix}.b.pmat"));
        ok(
            d,
            &[
                "detect",
                "--a",
                &a,
                "--b",
                &b,
                "--rho",
                "0.9",
                "--tau",
                "0.125",
                "--t",
                "1",
                "--p",
                "4",
                "--s",
                "72900",
                "--iterations",
                "1",
                "--no-list",
                "--seed",
                seed,
            ],
        )
        .trim()
        .to_string()
    };
    let mut quiet = 0;
    for seed in 0..20 {
        let s = seed.to_string();
        let prefix = format!("z{seed}");
        ok(
            d,
            &[
                "generate",
                "promise",
                "--n",
                "32",
                "--d",
                "512",
                "--rho",
                "0.9",
                "--tau",
                "0.125",
                "--outliers",
                "0",
                "--seed",
                &s,
                "--out",
                &prefix,
            ],
        );
        if detect(&prefix, &s) == "false" {
            quiet += 1;
        }
    }
    assert!(quiet >= 19, "{quiet}/20 quiet");
    ok(
        d,
        &[
            "generate",
            "promise",
            "--n",
            "32",
            "--d",
            "512",
            "--rho",
            "0.9",
            "--tau",
            "0.125",
            "--outliers",
            "1",
            "--seed",
            "3",
            "--out",
            "one",
        ],
    );
    assert_eq!(detect("one", "3"), "true");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(corrseek(d, &["detect", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        corrseek(
            d,
            &["detect", "--a", "missing.pmat", "--rho", "0.5", "--oracle"]
        )
        .status
        .code(),
        Some(1)
    );
    ok(
        d,
        &[
            "generate",
            "promise",
            "--n",
            "64",
            "--d",
            "256",
            "--rho",
            "0.5",
            "--tau",
            "0.2",
            "--outliers",
            "0",
            "--seed",
            "1",
            "--out",
            "z",
        ],
    );
    let capped = corrseek(
        d,
        &[
            "detect",
            "--a",
            "z.a.pmat",
            "--b",
            "z.b.pmat",
            "--rho",
            "0.5",
            "--tau",
            "0.2",
            "--t",
            "4",
            "--p",
            "2",
            "--s",
            "64",
            "--threshold-constant",
            "0",
            "--mark-cap",
            "3",
        ],
    );
    assert_eq!(capped.status.code(), Some(2));
    assert_eq!(
        corrseek(
            d,
            &["detect", "--a", "z.a.pmat", "--rho", "0.5", "--tau", "0.2", "--t", "4"]
        )
        .status
        .code(),
        Some(1)
    );
    let lightbulb = corrseek(
        d,
        &[
            "lightbulb",
            "--input",
            "z.a.pmat",
            "--rho",
            "0.95",
            "--t",
            "2",
            "--p",
            "2",
            "--s",
            "1024",
            "--iterations",
            "1",
            "--threshold-constant",
            "0.5",
        ],
    );
    assert_eq!(lightbulb.status.code(), Some(3));
    assert_eq!(corrseek(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn lightbulb_finds_a_duplicate() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate",
            "lightbulb",
            "--n",
            "64",
            "--d",
            "256",
            "--rho",
            "1",
            "--seed",
            "5",
            "--out",
            "dup",
        ],
    );
    let found = pairs(&ok(
        d,
        &[
            "lightbulb",
            "--input",
            "dup.pmat",
            "--t",
            "2",
            "--p",
            "2",
            "--s",
            "16384",
            "--iterations",
            "2",
            "--threshold-constant",
            "0.5",
            "--out",
            "r.json",
        ],
    ));
    assert_eq!(found, planted(&json(d.join("dup.json"))));
    let result = json(d.join("r.json"));
    assert_eq!(result["command"], "lightbulb");
    assert!(result["setup"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn parity_without_noise_is_exact() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate", "parity", "--n", "12", "--k", "2", "--eta", "0", "--d", "64", "--seed",
            "3", "--out", "par",
        ],
    );
    let want: Vec<u64> = json(d.join("par.json"))["support"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    let got = ok(
        d,
        &[
            "parity",
            "--input",
            "par.parity",
            "--k",
            "2",
            "--eta",
            "0",
            "--t",
            "1",
            "--p",
            "2",
            "--s",
            "4096",
            "--iterations",
            "2",
            "--threshold-constant",
            "0.5",
            "--out",
            "r.json",
        ],
    );
    let got: Vec<u64> = got.split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(got, want);
    assert_eq!(json(d.join("r.json"))["rounds"], 1);
}

#[test]
fn parity_retries_draw_from_a_file() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate", "parity", "--n", "10", "--k", "2", "--eta", "0.1", "--d", "8", "--seed",
            "6", "--out", "few",
        ],
    );
    ok(
        d,
        &[
            "generate", "parity", "--n", "10", "--k", "2", "--eta", "0.1", "--d", "600", "--seed",
            "6", "--out", "many",
        ],
    );
    let want = json(d.join("many.json"))["support"].clone();
    let got = ok(
        d,
        &[
            "parity",
            "--input",
            "few.parity",
            "--k",
            "2",
            "--eta",
            "0.1",
            "--t",
            "1",
            "--p",
            "2",
            "--s",
            "4096",
            "--iterations",
            "2",
            "--threshold-constant",
            "0.5",
            "--examples-per-round",
            "100",
            "--retry-cap",
            "6",
            "--more-examples-from",
            "many.parity",
            "--out",
            "r.json",
        ],
    );
    let got: Vec<u64> = got.split_whitespace().map(|v| v.parse().unwrap()).collect();
    let want: Vec<u64> = want
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(got, want);
    assert!(json(d.join("r.json"))["rounds"].as_u64().unwrap() >= 2);
}

#[test]
fn ov_with_a_zero_column() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(
        d.join("z.ov"),
        "OV1 3 3\n110\n101\n111\nOV1 3 2\n10\n10\n10\n",
    )
    .unwrap();
    let out = ok(d, &["ov", "--input", "z.ov", "--out", "r.json"]);
    assert_eq!(out, "true\n0 1\n");
    assert_eq!(json(d.join("r.json"))["witness"], serde_json::json!([0, 1]));
    fs::write(d.join("ones.ov"), "OV1 2 2\n11\n11\nOV1 2 2\n11\n11\n").unwrap();
    assert_eq!(ok(d, &["ov", "--input", "ones.ov"]), "false\n");
}

#[test]
fn generated_ov_agrees_with_sidecar() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for seed in ["1", "2", "3"] {
        ok(
            d,
            &[
                "generate", "ov", "--n", "16", "--dprime", "6", "--seed", seed, "--out", "o",
            ],
        );
        assert!(fs::read_to_string(d.join("o.ov"))
            .unwrap()
            .starts_with("OV1 6 16\n"));
        let sidecar = json(d.join("o.json"));
        let answer = ok(d, &["ov", "--input", "o.ov"]);
        let first = answer.lines().next().unwrap();
        assert_eq!(first, sidecar["orthogonal"].to_string());
    }
}

#[test]
fn curves_write_both_panels() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["curves", "--out-dir", "out", "--points", "50"]);
    for name in ["curves_best_known.csv", "curves_ideal.csv"] {
        let text = fs::read_to_string(d.join("out").join(name)).unwrap();
        let mut lines = text.lines();
        assert!(lines
            .next()
            .unwrap()
            .starts_with("log_tau_rho,cor1_detect,"));
        let cor1: Vec<f64> = lines
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(cor1.len(), 50);
        assert!(cor1.windows(2).all(|w| w[1] > w[0]));
    }
    let best = fs::read_to_string(d.join("out/curves_best_known.csv")).unwrap();
    let first: f64 = best
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((first - 2.0 * 2.3728639 / 3.0).abs() < 1e-6);
}

#[test]
fn concentration_reports_json() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &[
            "concentration",
            "--m",
            "10000",
            "--s",
            "400",
            "--xi",
            "0.3",
            "--eta",
            "0.5",
            "--trials",
            "50",
            "--seed",
            "2",
        ],
    );
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["trials"], 50);
    assert_eq!(report["upper_violations"], 0);
    let bad = corrseek(
        dir.path(),
        &[
            "concentration",
            "--m",
            "10000",
            "--s",
            "400",
            "--xi",
            "0.25",
            "--eta",
            "0.5",
        ],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nearest feasible"));
}
