use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gesture-irr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, text).unwrap();
}

const MEAL: &str = "kind,start_ms,end_ms\nbite,1000,3000\nrest,3500,9000\ndrink,15000,21000\n";

#[test]
fn valid_corpus_passes_validation() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m1/rater_a.csv", MEAL);
    write(dir.path(), "m1/index.csv", "kind,time_ms,hand\nbite,2000,dominant\n");
    let o = run(&["validate", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn short_gesture_fails_validation_with_one_issue() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "m1/rater_a.csv",
        "kind,start_ms,end_ms\nbite,1000,1400\nrest,3000,9000\n",
    );
    let o = run(&["validate", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("m1/a:2: MinDuration"), "{out}");

    let o = run(&[
        "validate",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--format",
        "json-lines",
    ]);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["rule"], "MinDuration");
    assert_eq!(v["line"], 2);
}

#[test]
fn empty_directory_has_no_meals() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no meals found"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&run(&["validate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["stats", "--corpus", ".", "--tolerance-ms", "0"])), 2);
    assert_eq!(code(&run(&["stats", "--corpus", "/definitely/not/here"])), 2);
    assert_eq!(code(&run(&["simulate"])), 2);
}

#[test]
fn identical_raters_agree_completely() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(dir.path(), "m1/rater_a.csv", MEAL);
    write(dir.path(), "m1/rater_b.csv", MEAL);
    let o = run(&[
        "match",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("reliability,Overall agreement,all,3,100\n"), "{report}");
    assert!(report.contains("reliability,Agreement,all,3,100\n"), "{report}");
    let union = fs::read_to_string(out.path().join("m1/union.csv")).unwrap();
    assert_eq!(
        union,
        "kind,start_ms,end_ms,case,derived\nbite,1000,3000,agreement,0\nrest,3500,9000,agreement,0\n\
         other,9000,15000,,1\ndrink,15000,21000,agreement,0\n"
    );
    assert_eq!(
        fs::read_to_string(out.path().join("m1/groups.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    assert!(out.path().join("reliability.csv").exists());
}

#[test]
fn single_rater_meal_passes_through() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(dir.path(), "m1/rater_a.csv", MEAL);
    let o = run(&[
        "match",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--format",
        "json-lines",
    ]);
    assert_eq!(code(&o), 0);
    let gestures = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|v| v["row"] == "#Gestures" && v["column"] == "all")
        .unwrap();
    assert_eq!(gestures["value"], 0.0);
    assert!(stderr(&o).contains("single rater"));
    let union = fs::read_to_string(out.path().join("m1/union.csv")).unwrap();
    assert!(
        union.starts_with("kind,start_ms,end_ms,case,derived\nbite,1000,3000,,0\n"),
        "{union}"
    );
    assert!(!out.path().join("m1/groups.jsonl").exists());
}

#[test]
fn third_rater_is_probed_against_the_union() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(dir.path(), "m1/rater_a.csv", MEAL);
    write(dir.path(), "m1/rater_b.csv", MEAL);
    write(dir.path(), "m1/rater_c.csv", "kind,start_ms,end_ms\nbite,1000,3000\n");
    let o = run(&[
        "match",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let probe = fs::read_to_string(out.path().join("m1/probe_c.jsonl")).unwrap();
    let cases: Vec<String> = probe
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["case"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(cases, ["agreement", "mistake_missed", "mistake_missed"]);
    assert!(stdout(&o).contains("Additional raters matched against the union"));
}

#[test]
fn index_compare_counts_one_rater_meals() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m1/rater_a.csv", MEAL);
    write(
        dir.path(),
        "m1/index.csv",
        "kind,time_ms,hand\nbite,2000,dominant\ndrink,16000,dominant\ndrink,18000,dominant\nbite,50000,dominant\nbite,2500,nondominant\n",
    );
    let o = run(&[
        "index-compare",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("index,Agreement,one_rater,1,"), "{s}");
    assert!(s.contains("index,Ambiguity,one_rater,1,"), "{s}");
    assert!(s.contains("index,Missed,one_rater,1,"), "{s}");
    assert!(s.contains("index,#Gestures,one_rater,3,\n"), "{s}");
}

#[test]
fn sample_unit_converts_to_milliseconds() {
    let dir = tempfile::tempdir().unwrap();
    // 15 samples = 1000 ms, 45 samples = 3000 ms
    write(dir.path(), "m1/rater_a.csv", "kind,start_ms,end_ms\nbite,15,45\n");
    let o = run(&[
        "stats",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--unit",
        "samples15hz",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("durations,bite,mean_s,2,"), "{}", stdout(&o));
    // the same file read as milliseconds is too short
    let o = run(&["stats", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulate_is_deterministic_and_idempotent() {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let o = run(&[
            "simulate",
            "--meals",
            "5",
            "--seed",
            "11",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let first = tree(dirs[0].path());
    assert_eq!(first.len(), 20);
    assert_eq!(first, tree(dirs[1].path()));
    run(&[
        "simulate",
        "--meals",
        "5",
        "--seed",
        "11",
        "--out",
        dirs[0].path().to_str().unwrap(),
    ]);
    assert_eq!(first, tree(dirs[0].path()));
}

#[test]
fn bad_simulator_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "[noise]\np_miss = 3.0\n").unwrap();
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("p_miss"), "{}", stderr(&o));
}

/// Reads `kind,start_ms,end_ms` rows.
fn segments(path: &Path) -> Vec<(String, u64, u64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn simulated_corpus_matches_its_provenance() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = corpus.path().join("sim.toml");
    fs::write(
        &cfg,
        "meals = 8\n[noise]\njitter_std_ms = 300\np_supra = 0.2\np_split = 0.08\np_merge = 0.05\n\
         p_miss = 0.05\np_relabel = 0.05\np_straddle = 0.05\n",
    )
    .unwrap();
    let c = corpus.path().join("c");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "match",
        "--corpus",
        c.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut checked = 0;
    for meal in fs::read_dir(&c).unwrap() {
        let meal = meal.unwrap().path();
        let name = meal.file_name().unwrap().to_str().unwrap().to_string();
        let gt = segments(&meal.join("rater_gt.csv"));
        let groups: Vec<Value> = fs::read_to_string(out.path().join(&name).join("groups.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let provenance = fs::read_to_string(meal.join("provenance.csv")).unwrap();
        for row in provenance.lines().skip(1) {
            let f: Vec<&str> = row.split(',').collect();
            let (kind, start, end) = &gt[f[0].parse::<usize>().unwrap()];
            let group = groups
                .iter()
                .find(|g| {
                    g["members_a"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .any(|m| m["kind"] == kind.as_str() && m["start"] == *start && m["end"] == *end)
                })
                .unwrap();
            assert_eq!(group["case"], f[2], "{name} row {row}");
            checked += 1;
        }
    }
    assert!(checked > 500, "{checked}");
}
