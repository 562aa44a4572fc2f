use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cqra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqra"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a panel where `value(model, t, level)` gives each cell.
fn write_inputs(
    dir: &Path,
    models: &[&str],
    value: impl Fn(usize, usize, f64) -> f64,
    actual: impl Fn(usize) -> f64,
) -> (PathBuf, PathBuf) {
    let levels = [0.1, 0.5, 0.9];
    let mut f = String::from("model,timestamp,level,value\n");
    let mut a = String::from("timestamp,value\n");
    for t in 0..60 {
        for (n, m) in models.iter().enumerate() {
            for &q in &levels {
                f.push_str(&format!("{m},{},{q},{}\n", t * 3600, value(n, t, q)));
            }
        }
        a.push_str(&format!("{},{}\n", t * 3600, actual(t)));
    }
    let (fp, ap) = (dir.join("forecasts.csv"), dir.join("actuals.csv"));
    fs::write(&fp, f).unwrap();
    fs::write(&ap, a).unwrap();
    (fp, ap)
}

fn wavy(t: usize) -> f64 {
    100.0 + 30.0 * (t as f64 * 0.4).sin() + 7.0 * (t as f64 * 1.7).cos()
}

fn report_rows(path: &Path) -> Vec<(String, f64)> {
    let json: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    json["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["method"].as_str().unwrap().to_string(),
                r["pinball"].as_f64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn demo_is_reproducible_and_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = cqra(&["demo", "--seed", "0", "--out", p(&a)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(code(&cqra(&["demo", "--out", p(&b)])), 0);
    for name in ["report.csv", "report.json", "crossings.csv", "weights-cqra-t.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }

    let rows = report_rows(&a.join("report.json"));
    assert_eq!(rows.len(), 11);
    let golden = report_rows(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/demo-seed-0-report.json"
    )));
    assert_eq!(rows.len(), golden.len());
    for ((m, s), (gm, gs)) in rows.iter().zip(&golden) {
        assert_eq!(m, gm);
        assert!((s - gs).abs() <= 1e-9, "{m}: {s} vs golden {gs}");
    }
    let score = |tag: &str| rows.iter().find(|(m, _)| m == tag).unwrap().1;
    assert!(score("CQRA-T") <= 1.02 * score("BI"));

    // Re-scoring the demo's own weights on its own files reproduces the report.
    let weights: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("weights-"))
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    assert_eq!(weights.len(), 11);
    let e = dir.path().join("e");
    let mut args = vec![
        "evaluate",
        "--forecasts",
        p(&a.join("forecasts.csv")),
        "--actuals",
        p(&a.join("actuals.csv")),
        "--series",
        "synthetic",
        "--out",
        p(&e),
        "--weights",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    args.extend(weights);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&cqra(&args)), 0);
    assert_eq!(
        fs::read(e.join("report.csv")).unwrap(),
        fs::read(a.join("report.csv")).unwrap()
    );
}

#[test]
fn fit_writes_weights_and_relaxation_dominates() {
    let dir = tempfile::tempdir().unwrap();
    let (f, a) = write_inputs(
        dir.path(),
        &["x", "y", "z"],
        |n, t, q| wavy(t) + (n as f64 - 1.0) * 4.0 + 25.0 * (q - 0.5) + ((t * (n + 3)) % 7) as f64,
        wavy,
    );
    let out = dir.path().join("w");
    let run = cqra(&[
        "fit",
        "--forecasts",
        p(&f),
        "--actuals",
        p(&a),
        "--methods",
        "CQRA-T,QRA-T,SA",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let sa: Value = serde_json::from_str(&fs::read_to_string(out.join("weights-sa.json")).unwrap()).unwrap();
    for level in sa["coefficients"].as_array().unwrap() {
        assert_eq!(level, &serde_json::json!([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]));
    }
    assert!(out.join("weights-cqra-t.json").exists() && out.join("weights-qra-t.json").exists());

    let text = stdout(&run);
    let column = |method: &str| -> Vec<f64> {
        text.lines()
            .filter(|l| l.split_whitespace().next() == Some(method))
            .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
            .collect()
    };
    let (c, u) = (column("CQRA-T"), column("QRA-T"));
    assert_eq!(c.len(), 3);
    for (cq, uq) in c.iter().zip(&u) {
        assert!(uq <= &(cq * (1.0 + 1e-9)), "{uq} > {cq}");
    }
}

#[test]
fn unreadable_input_exits_with_usage_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let run = cqra(&[
        "fit",
        "--forecasts",
        "/nonexistent/f.csv",
        "--actuals",
        "/nonexistent/a.csv",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(!out.exists());

    let (f, a) = write_inputs(dir.path(), &["x"], |_, t, _| wavy(t), wavy);
    assert_eq!(
        code(&cqra(&[
            "fit",
            "--forecasts",
            p(&f),
            "--actuals",
            p(&a),
            "--methods",
            "CQRA-Q",
            "--out",
            p(&out)
        ])),
        2
    );
    assert_eq!(
        code(&cqra(&[
            "fit",
            "--forecasts",
            p(&f),
            "--actuals",
            p(&a),
            "--fit-fraction",
            "1.5",
            "--out",
            p(&out)
        ])),
        2
    );
    assert!(!out.exists());
}

#[test]
fn evaluate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let same = dir.path().join("same");
    fs::create_dir(&same).unwrap();
    let (f, a) = write_inputs(
        &same,
        &["x", "y"],
        |_, t, q| wavy(t) + 20.0 * (q - 0.5),
        |t| wavy(t) + 3.0,
    );
    let w = same.join("w");
    assert_eq!(
        code(&cqra(&[
            "fit",
            "--forecasts",
            p(&f),
            "--actuals",
            p(&a),
            "--methods",
            "SA",
            "--out",
            p(&w)
        ])),
        0
    );
    let r = same.join("r");
    let run = cqra(&[
        "evaluate",
        "--forecasts",
        p(&f),
        "--actuals",
        p(&a),
        "--weights",
        p(&w.join("weights-sa.json")),
        "--out",
        p(&r),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let rows = report_rows(&r.join("report.json"));
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["BI", "SA"]);
    assert_eq!(rows[0].1, rows[1].1);
    assert!(stdout(&run).starts_with("method,series,pinball,improvement_vs_bi\n"));

    let perfect = dir.path().join("perfect");
    fs::create_dir(&perfect).unwrap();
    let (f, a) = write_inputs(&perfect, &["x", "y"], |_, t, _| wavy(t), wavy);
    let w = perfect.join("w");
    assert_eq!(
        code(&cqra(&[
            "fit",
            "--forecasts",
            p(&f),
            "--actuals",
            p(&a),
            "--methods",
            "CQRA-T,WA,MED",
            "--out",
            p(&w)
        ])),
        0
    );
    let r = perfect.join("r");
    let weights: Vec<PathBuf> = ["cqra-t", "wa", "med"]
        .iter()
        .map(|m| w.join(format!("weights-{m}.json")))
        .collect();
    let mut args = vec![
        "evaluate",
        "--forecasts",
        p(&f),
        "--actuals",
        p(&a),
        "--out",
        p(&r),
        "--weights",
    ];
    args.extend(weights.iter().map(|w| p(w)));
    assert_eq!(code(&cqra(&args)), 0);
    assert!(report_rows(&r.join("report.json")).iter().all(|(_, s)| *s == 0.0));

    // Weights fitted for two models cannot be applied to a three-model panel.
    let other = dir.path().join("other");
    fs::create_dir(&other).unwrap();
    let (f3, a3) = write_inputs(&other, &["x", "y", "z"], |_, t, _| wavy(t), wavy);
    let r = other.join("r");
    let run = cqra(&[
        "evaluate",
        "--forecasts",
        p(&f3),
        "--actuals",
        p(&a3),
        "--weights",
        p(&weights[0]),
        "--out",
        p(&r),
    ]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("contract"));
    assert!(!r.exists());
}

#[test]
fn predict_writes_long_format_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    // Model y has inverted quantiles, so QRA-T can produce crossings.
    let (f, a) = write_inputs(
        dir.path(),
        &["x", "y"],
        |n, t, q| wavy(t) + if n == 0 { 20.0 } else { -20.0 } * (q - 0.5) + ((t * 7) % 5) as f64,
        wavy,
    );
    let w = dir.path().join("w");
    assert_eq!(
        code(&cqra(&[
            "fit",
            "--forecasts",
            p(&f),
            "--actuals",
            p(&a),
            "--methods",
            "SA,QRA-T",
            "--out",
            p(&w)
        ])),
        0
    );
    let weights = [w.join("weights-sa.json"), w.join("weights-qra-t.json")];
    for (flag, dirname) in [("--rearrange", "sorted"), ("--no-rearrange", "raw")] {
        let out = dir.path().join(dirname);
        let run = cqra(&[
            "predict",
            "--forecasts",
            p(&f),
            "--weights",
            p(&weights[0]),
            p(&weights[1]),
            flag,
            "--out",
            p(&out),
        ]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
        let text = fs::read_to_string(out.join("forecast-sa.csv")).unwrap();
        assert!(text.starts_with("timestamp,level,value\n0,0.1,"));
        assert_eq!(text.lines().count(), 1 + 60 * 3);
    }
    let sorted = fs::read_to_string(dir.path().join("sorted/forecast-sa.csv")).unwrap();
    let values: Vec<f64> = sorted
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(values.chunks(3).all(|row| row[0] <= row[1] && row[1] <= row[2]));
}

#[test]
fn oracle_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = cqra(&["oracle-check", "--trials", "100", "--seed", "7", "--out", p(dir.path())]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).starts_with("100 trials, 0 breaches"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    assert_eq!(code(&cqra(&["oracle-check", "--trials", "0"])), 2);

    let bad = cqra(&[
        "oracle-check",
        "--trials",
        "3",
        "--inject-fault",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&bad), 1);
    let replay: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("oracle-replay-0.json")).unwrap()).unwrap();
    let first = &replay[0];
    assert_eq!(first["passed"], Value::Bool(false));
    assert_eq!(first["problem"]["y"].as_array().unwrap().len(), 50);
}
