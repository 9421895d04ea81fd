mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use common::{mini_dir, qrelcmp, stdout_of};
use qrelcmp_core::trec::parse_qrels;

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn mini_args() -> (String, String) {
    (
        path_str(&mini_dir().join("runs")),
        path_str(&mini_dir().join("qrels.txt")),
    )
}

fn compare_in(out: &Path, cand: &str, extra: &[&str]) -> String {
    let (runs, gt) = mini_args();
    let mut args = vec![
        "compare",
        "--runs-dir",
        &runs,
        "--gt",
        &gt,
        "--cand",
        cand,
        "--permutations",
        "2000",
        "--seed",
        "3",
    ];
    let out_s = path_str(out);
    args.extend(["--out-dir", &out_s]);
    args.extend(extra);
    stdout_of(&qrelcmp(&args))
}

fn report_row(dir: &Path) -> BTreeMap<String, String> {
    let text = fs::read_to_string(dir.join("report.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    header
        .into_iter()
        .map(String::from)
        .zip(row.into_iter().map(String::from))
        .collect()
}

#[test]
fn identity_compare_prints_perfect_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = mini_args();
    let printed = compare_in(dir.path(), &gt, &[]);
    let row = report_row(dir.path());
    for (k, v) in [
        ("kappa", "1.0000"),
        ("tau", "1.0000"),
        ("delta_sens", "0.0000"),
        ("bac", "1.0000"),
    ] {
        assert_eq!(row[k], v, "{k}");
        assert!(printed.contains(v));
    }
    assert_eq!((row["fp"].as_str(), row["fn"].as_str()), ("0", "0"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["kappa"], 1.0);
}

#[test]
fn pair_classes_agree_with_report_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = mini_args();
    let gen = tempfile::tempdir().unwrap();
    stdout_of(&qrelcmp(&[
        "generate",
        "sample",
        "--gt",
        &gt,
        "--fraction",
        "0.3",
        "--seed",
        "4",
        "--out-dir",
        &path_str(gen.path()),
    ]));
    let cand = path_str(&gen.path().join("sample_0.3_0.qrels"));
    compare_in(dir.path(), &cand, &["--runs", "sysA,sysB,sysC,sysD,sysE"]);
    let row = report_row(dir.path());
    let pairs = fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in pairs.lines().skip(1) {
        *counts.entry(line.rsplit(',').next().unwrap().to_string()).or_default() += 1;
    }
    for (class, col) in [("TP", "tp"), ("TN", "tn"), ("FP", "fp"), ("FN", "fn")] {
        assert_eq!(counts.get(class).copied().unwrap_or(0).to_string(), row[col], "{class}");
    }
    assert_eq!(pairs.lines().count(), 11);
}

#[test]
fn compare_outputs_are_identical_across_runs_and_thread_counts() {
    let (_, gt) = mini_args();
    let gen = tempfile::tempdir().unwrap();
    stdout_of(&qrelcmp(&[
        "generate",
        "sample",
        "--gt",
        &gt,
        "--fraction",
        "0.5",
        "--out-dir",
        &path_str(gen.path()),
    ]));
    let cand = path_str(&gen.path().join("sample_0.5_0.qrels"));
    let mut outputs = Vec::new();
    for threads in ["1", "3", "1"] {
        let dir = tempfile::tempdir().unwrap();
        compare_in(dir.path(), &cand, &["--threads", threads]);
        outputs.push(["report.csv", "report.json", "pairs.csv"].map(|f| fs::read(dir.path().join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let (runs, gt) = mini_args();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        stdout_of(&qrelcmp(&[
            "sweep",
            "--runs-dir",
            &runs,
            "--gt",
            &gt,
            "--fractions",
            "0.2,0.6,1",
            "--repetitions",
            "3",
            "--permutations",
            "1000",
            "--seed",
            "11",
            "--threads",
            threads,
            "--out-dir",
            &path_str(dir.path()),
        ]));
        outputs.push(["sweep.csv", "sweep_summary.csv"].map(|f| fs::read(dir.path().join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let sweep = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 9);
    assert!(sweep.starts_with("fraction,repetition,kappa,"));
}

#[test]
fn missing_qrels_file_exits_with_code_2() {
    let (runs, _) = mini_args();
    let out = qrelcmp(&[
        "compare",
        "--runs-dir",
        &runs,
        "--gt",
        "/no/such/gt.txt",
        "--cand",
        "/no/such/cand.txt",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/gt.txt"));
}

#[test]
fn malformed_qrels_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1 0 d1 1\n1 0 d2\n").unwrap();
    let (runs, gt) = mini_args();
    let out = qrelcmp(&["compare", "--runs-dir", &runs, "--gt", &gt, "--cand", &path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt") && err.contains("line 2"), "{err}");
}

#[test]
fn full_fraction_sample_round_trips() {
    let (_, gt) = mini_args();
    let dir = tempfile::tempdir().unwrap();
    stdout_of(&qrelcmp(&[
        "generate",
        "sample",
        "--gt",
        &gt,
        "--fraction",
        "1.0",
        "--repetitions",
        "2",
        "--out-dir",
        &path_str(dir.path()),
    ]));
    let original = parse_qrels(&fs::read_to_string(&gt).unwrap()).unwrap().qrels;
    for rep in 0..2 {
        let text = fs::read_to_string(dir.path().join(format!("sample_1_{rep}.qrels"))).unwrap();
        assert_eq!(parse_qrels(&text).unwrap().qrels, original);
    }
}

#[test]
fn popularity_on_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir(&runs).unwrap();
    fs::write(dir.path().join("gt.txt"), "1 0 a 1\n1 0 b 0\n1 0 c 2\n1 0 d 0\n").unwrap();
    fs::write(
        runs.join("only.run"),
        "1 Q0 x 1 9 only\n1 Q0 d 2 8 only\n1 Q0 b 3 7 only\n",
    )
    .unwrap();
    stdout_of(&qrelcmp(&[
        "generate",
        "popularity",
        "--gt",
        &path_str(&dir.path().join("gt.txt")),
        "--runs-dir",
        &path_str(&runs),
        "--out-dir",
        &path_str(dir.path()),
    ]));
    let text = fs::read_to_string(dir.path().join("popularity_per-topic_0.qrels")).unwrap();
    assert_eq!(text, "1 0 a 0\n1 0 b 1\n1 0 c 0\n1 0 d 1\n");
}

#[test]
fn plots_have_the_expected_elements_and_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = mini_args();
    compare_in(dir.path(), &gt, &[]);
    let pairs = path_str(&dir.path().join("pairs.csv"));
    let mut svgs = Vec::new();
    for name in ["a.svg", "b.svg"] {
        let output = path_str(&dir.path().join(name));
        stdout_of(&qrelcmp(&["plot", "--input", &pairs, "--output", &output]));
        svgs.push(fs::read(&output).unwrap());
    }
    assert_eq!(svgs[0], svgs[1]);
    let svg = String::from_utf8(svgs.remove(0)).unwrap();
    assert_eq!(svg.matches("<circle").count(), 5);
    assert_eq!(svg.matches("class=\"diagonal\"").count(), 1);
    assert!(svg.contains("viewBox=\"0 0 800 600\""));

    let sweep = dir.path().join("sweep.csv");
    fs::write(
        &sweep,
        "fraction,repetition,p1,r1,p2,r2,bac,mcc\n0.5,0,0.9,0.4,0.3,0.8,0.6,0.2\n1,0,1,1,1,1,1,1\n",
    )
    .unwrap();
    let out = stdout_of(&qrelcmp(&[
        "plot",
        "--input",
        &path_str(&sweep),
        "--out-dir",
        &path_str(dir.path()),
    ]));
    let svg = fs::read_to_string(out.trim()).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
}

#[test]
fn plot_rejects_unknown_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    fs::write(&input, "system_a,system_b,p_gt\nA,B,0.1\n").unwrap();
    let out = qrelcmp(&["plot", "--input", &path_str(&input)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mean_a_gt") && err.contains("class"), "{err}");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (runs, gt) = mini_args();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "runs-dir = {runs}\npermutations = 0\nout-dir = {}\n",
            path_str(dir.path())
        ),
    )
    .unwrap();
    let out = qrelcmp(&[
        "--config",
        &path_str(&cfg),
        "evaluate",
        "--runs-dir",
        &runs,
        "--qrels",
        &gt,
        "--with-pvalues",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "permutations = 0 from the config must be rejected"
    );
    stdout_of(&qrelcmp(&[
        "--config",
        &path_str(&cfg),
        "evaluate",
        "--runs-dir",
        &runs,
        "--qrels",
        &gt,
        "--with-pvalues",
        "--permutations",
        "100",
    ]));
    let scores = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(scores.starts_with("system,1,10,2,"));
    assert_eq!(scores.lines().count(), 6);
    let pvalues = fs::read_to_string(dir.path().join("pvalues.csv")).unwrap();
    assert!(pvalues.starts_with("system_a,system_b,p_value,significant\n"));
    assert_eq!(pvalues.lines().count(), 11);
}

#[test]
fn full_precision_output() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = mini_args();
    compare_in(dir.path(), &gt, &["--precision", "full"]);
    let row = report_row(dir.path());
    assert_eq!(row["kappa"], "1");
    assert_eq!(row["bac"], "1");
}
