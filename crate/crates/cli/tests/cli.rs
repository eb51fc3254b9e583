use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn tagnoise(dir: &Path, args: &[&str]) -> Output {
    run_with_input(dir, args, None)
}

fn run_with_input(dir: &Path, args: &[&str], input: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tagnoise"))
        .args(args)
        .current_dir(dir)
        .env_remove("TAGNOISE_PLAYER")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    if let Some(text) = input {
        stdin.write_all(text.as_bytes()).unwrap();
    }
    drop(stdin);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data lines of a CSV output, provenance comments removed.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_corpus(dir: &Path) {
    let tags = ["rock", "pop", "jazz", "guitar"];
    let mut edges = String::new();
    let mut splits = String::new();
    for t in 0..120 {
        for (j, tag) in tags.iter().enumerate() {
            if (t * 7 + j * 3) % (j + 2) == 0 {
                edges.push_str(&format!("tr{t}\t{tag}\n"));
            }
        }
        splits.push_str(&format!("tr{t}\t{}\n", ["train", "valid", "test"][t % 3]));
    }
    std::fs::write(dir.join("edges.tsv"), edges).unwrap();
    std::fs::write(dir.join("splits.tsv"), splits).unwrap();
}

#[test]
fn usage_errors_exit_2_and_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tagnoise(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(tagnoise(dir.path(), &["estimate"]).status.code(), Some(2));
    let missing = tagnoise(dir.path(), &["audit", "top-pairs", "--labels", "nope.tlm"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error:"), "{}", stderr(&missing));
    assert_eq!(tagnoise(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn reference_audit_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = tagnoise(dir.path(), &["estimate", "--table2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# tool=tagnoise"));
    let r = rows(&text);
    assert_eq!(r[0][0], "tag");
    let est = r[0].iter().position(|c| c == "estimate").unwrap();
    let got: Vec<(&str, &str)> = r[1..].iter().map(|row| (row[0].as_str(), row[est].as_str())).collect();
    assert_eq!(
        got,
        [
            ("instrumental", "36048.72"),
            ("female vocalists", "71126.88"),
            ("male vocalists", "156447.72"),
            ("guitar", "170916.48"),
        ]
    );
}

#[test]
fn reference_audit_intervals_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["estimate", "--table2", "--ci", "--resamples", "300", "--seed", "4"];
    let a = tagnoise(dir.path(), &args);
    let b = tagnoise(dir.path(), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(rows(&stdout(&a)), rows(&stdout(&b)));
    assert!(stdout(&a).contains("# seed=4"));

    let unseeded = tagnoise(dir.path(), &["estimate", "--table2", "--ci", "--resamples", "50"]);
    assert!(stderr(&unseeded).contains("using --seed"), "{}", stderr(&unseeded));
}

#[test]
fn ingest_audit_and_inject_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d);
    let o = tagnoise(d, &["ingest", "--edges", "edges.tsv", "--splits", "splits.tsv", "--top-n", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("labels.tlm").exists() && d.join("labels.tlm.prov").exists());

    let o = tagnoise(d, &["audit", "cooccur", "--labels", "labels.tlm", "--format", "tsv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect();
    assert_eq!(lines.len(), 5);
    for (i, line) in lines[1..].iter().enumerate() {
        assert_eq!(line.split('\t').nth(i + 1), Some("1.000000"), "diagonal in {line}");
    }

    let o = tagnoise(d, &["audit", "top-pairs", "--labels", "labels.tlm", "--k", "3"]);
    assert_eq!(rows(&stdout(&o)).len(), 4);
    let o = tagnoise(d, &["audit", "top-pairs", "--labels", "labels.tlm", "--k", "7"]);
    assert_eq!(o.status.code(), Some(1));

    let inject = |out: &str| {
        let o = tagnoise(d, &["inject-noise", "--labels", "labels.tlm", "--drop", "0.3", "--seed", "11", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(d.join(out)).unwrap()
    };
    assert_eq!(inject("a.tlm"), inject("b.tlm"));

    std::fs::write(d.join("spec.txt"), "rock, 0.5, 0\n").unwrap();
    let o = tagnoise(d, &["inject-noise", "--labels", "labels.tlm", "--spec", "spec.txt", "--out", "c.tlm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("using --seed"));
}

#[test]
fn annotation_quits_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d);
    assert!(tagnoise(d, &["ingest", "--edges", "edges.tsv", "--top-n", "4"]).status.success());
    let o = tagnoise(
        d,
        &["audit", "sample", "--labels", "labels.tlm", "--balanced", "rock", "--per-class", "2", "--seed", "1", "--out", "sub.tsv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let annotate = ["annotate", "--labels", "labels.tlm", "--subset", "sub.tsv", "--annotator", "a1", "--out", "ann.tsv"];
    let first = run_with_input(d, &annotate, Some("1\n0\nq\n"));
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("2 pending"));

    let second = run_with_input(d, &annotate, Some("s\n1\n"));
    assert!(second.status.success(), "{}", stderr(&second));
    assert!(stderr(&second).contains("2 answers restored"));
    assert_eq!(stdout(&second).matches("does the tag apply").count(), 2);

    let saved = std::fs::read_to_string(d.join("ann.tsv")).unwrap();
    let verdicts: Vec<&str> = saved
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').nth(2).unwrap())
        .collect();
    assert_eq!(verdicts, ["1", "0", "skip", "1"]);

    let o = tagnoise(d, &["estimate", "--labels", "labels.tlm", "--annotations", "ann.tsv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("1 skipped"), "{}", stderr(&o));
}

#[test]
fn experiment_writes_a_reportable_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("tiny.cfg"),
        "seed = 3\nn_tags = 3\nn_train = 60\nn_valid = 20\nn_test = 30\nn_mels = 8\nframes = 8\n\
         priors = 0.4\nbandwidths = 1\nenergies = 2\ndrop_rates = 0,0.3,0.6\narch = tiny\nmax_epochs = 2\n",
    )
    .unwrap();
    let o = tagnoise(d, &["experiment", "--config", "tiny.cfg", "--seed", "8", "--out", "res"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result = std::fs::read_to_string(d.join("res/result.csv")).unwrap();
    assert!(result.contains("# seed=8"));
    assert!(result.contains("--seed 8"));

    let o = tagnoise(d, &["report", "res"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("tag0,0,"));

    std::fs::remove_file(d.join("res/nco.csv")).unwrap();
    let o = tagnoise(d, &["report", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing nco.csv"));

    let o = tagnoise(d, &["experiment", "--preset", "sweep8", "--print-config", "--seed", "5"]);
    assert!(stdout(&o).contains("seed = 5"));
}
