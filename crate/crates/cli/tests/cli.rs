use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_riddle")
}

fn riddle(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = riddle(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, correct: usize) -> (PathBuf, PathBuf) {
    let ds = dir.join("ds.csv");
    let ann = dir.join("ann.csv");
    let n = n.to_string();
    let c = correct.to_string();
    let out = riddle(&["synthesize", "--n", &n, "--out", s(&ds), "--annotations", s(&ann), "--correct", &c]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (ds, ann)
}

#[test]
fn human_benchmark_from_synthetic_files() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, ann) = synth(dir.path(), 156, 119);
    let r = ok_json(&["human-benchmark", "--dataset", s(&ds), "--annotations", s(&ann)]);
    assert_eq!(r["em_pct"], 76.28);
    assert_eq!(r["em_count"], 119);
    assert!(r["fm_pct"].is_null());
}

#[test]
fn all_clues_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = synth(dir.path(), 10, 0);
    let r = ok_json(&["eval-all-clues", "--dataset", s(&ds)]);
    assert_eq!((r["em_pct"].as_f64(), r["fm_pct"].as_f64()), (Some(100.0), Some(100.0)));
    let csv = dir.path().join("out/report.csv");
    let out = riddle(&["eval-all-clues", "--dataset", s(&ds), "--format", "csv", "--out", s(&csv)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);
}

#[test]
fn mock_live_trails_all_clues_for_delayed_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = synth(dir.path(), 20, 0);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[qa]\nbackend = \"oracle\"\nreveal_after_clue = 3\nwrong = \"consistent\"\n").unwrap();
    let all = ok_json(&["eval-all-clues", "--config", s(&cfg), "--dataset", s(&ds)]);
    let live = ok_json(&["eval-mock-live", "--config", s(&cfg), "--dataset", s(&ds)]);
    assert!(live["em_pct"].as_f64() <= all["em_pct"].as_f64());
    let per_clue = ok_json(&["eval-mock-live", "--config", s(&cfg), "--dataset", s(&ds), "--granularity", "per_clue", "--threshold", "1"]);
    assert_eq!(per_clue["n_attempted"], 20);
}

#[test]
fn simulate_timing_modes() {
    let r = ok_json(&["simulate-timing", "--chunks", "10"]);
    assert!((r["max_lag_s"].as_f64().unwrap() - 3.04).abs() < 1e-9);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        r#"[pipeline]
stages = [
  { name = "stt", latency = { fixed = 1.0 } },
  { name = "qe", latency = { fixed = 1.0 } },
  { name = "qa", latency = { fixed = 3.0 } },
  { name = "tts", latency = { fixed = 1.0 } },
]
"#,
    )
    .unwrap();
    let seq = ok_json(&["simulate-timing", "--config", s(&cfg), "--chunks", "5"]);
    let lags: Vec<f64> = seq["per_chunk"].as_array().unwrap().iter().map(|c| c["lag_s"].as_f64().unwrap()).collect();
    assert_eq!(lags, [6.0, 7.0, 8.0, 9.0, 10.0]);
    let pip = ok_json(&["simulate-timing", "--config", s(&cfg), "--chunks", "5", "--mode", "pipelined"]);
    assert_eq!(pip["max_lag_s"], 6.0);
}

const TRANSCRIPT: &str = "start_s,end_s,text,riddle_id
0,4.5,Now the first riddle.,2019-001
5,9.5,I am a property of transverse waves.,2019-001
10,14.5,My phenomenon is used in sunglasses.,2019-001
15,19.5,The answer is polarization.,2019-001
";

const DATASET: &str = "Clue 1,Clue 2,Clue 3,Clue 4,Clue 5,Clue 6,Clue 7,Clue 8,Clue 9,Answer,Answer 1,Answer 2,Answer 3,Answer 4
I am a property of transverse waves.,My phenomenon is used in sunglasses.,,,,,,,,polarization,,,,
";

#[test]
fn run_live_replay_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.csv");
    let tr = dir.path().join("tr.csv");
    fs::write(&ds, DATASET).unwrap();
    fs::write(&tr, TRANSCRIPT).unwrap();
    let events = dir.path().join("events.jsonl");
    let r = ok_json(&["run-live", "--dataset", s(&ds), "--transcript", s(&tr), "--events", s(&events)]);
    assert_eq!((r["em_count"].as_u64(), r["total_points"].as_u64()), (Some(1), Some(5)));
    let log = fs::read_to_string(&events).unwrap();
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["ts_s", "chunk_seq", "stage", "kind", "payload"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert!(log.lines().any(|l| l.contains("\"stage\":\"tts\"")));

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[stt]\nrewrites = [[\"first riddle\", \"test riddle\"]]\n").unwrap();
    let r = ok_json(&["run-live", "--config", s(&cfg), "--dataset", s(&ds), "--transcript", s(&tr)]);
    assert_eq!(r["n_attempted"], 0);
    let r = ok_json(&["run-live", "--config", s(&cfg), "--dataset", s(&ds), "--transcript", s(&tr), "--lenient"]);
    assert_eq!(r["em_count"], 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = synth(dir.path(), 15, 0);
    let tr = dir.path().join("tr.csv");
    fs::write(&tr, TRANSCRIPT).unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[pipeline]\nmode = \"pipelined\"\n[stt]\nsubstitution_prob = 0.2\nseed = 4\n").unwrap();
    let run = |tag: &str| {
        let e = dir.path().join(format!("e{tag}.jsonl"));
        let o = dir.path().join(format!("o{tag}.json"));
        let ds1 = dir.path().join("one.csv");
        fs::write(&ds1, DATASET).unwrap();
        let out = riddle(&[
            "run-live", "--config", s(&cfg), "--dataset", s(&ds1), "--transcript", s(&tr), "--events", s(&e), "--out", s(&o),
        ]);
        assert!(out.status.success());
        let m = dir.path().join(format!("m{tag}.json"));
        assert!(riddle(&["eval-mock-live", "--dataset", s(&ds), "--out", s(&m)]).status.success());
        (fs::read(e).unwrap(), fs::read(o).unwrap(), fs::read(m).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn process_backend_over_stdio() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = synth(dir.path(), 6, 0);
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "[qa]\nbackend = \"process\"\nprogram = {:?}\nargs = [\"qa-serve\", \"--dataset\", {:?}]\n",
            bin(),
            s(&ds)
        ),
    )
    .unwrap();
    let r = ok_json(&["eval-all-clues", "--config", s(&cfg), "--dataset", s(&ds)]);
    assert_eq!(r["em_pct"], 100.0);
}

#[test]
fn exit_codes() {
    assert_eq!(riddle(&["--help"]).status.code(), Some(0));
    assert_eq!(riddle(&["eval-all-clues"]).status.code(), Some(1));
    assert_eq!(riddle(&["eval-all-clues", "--dataset", "/no/such.csv"]).status.code(), Some(1));
    assert_eq!(riddle(&["simulate-timing", "--format", "xml"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = synth(dir.path(), 3, 0);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[pipeline]\nqueue_capacity = 0\n").unwrap();
    let out = riddle(&["simulate-timing", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("queue_capacity"));

    let missing = dir.path().join("missing.toml");
    fs::write(&missing, "[qa]\nbackend = \"process\"\nprogram = \"/no/such/qa-server\"\n").unwrap();
    assert_eq!(riddle(&["eval-all-clues", "--config", s(&missing), "--dataset", s(&ds)]).status.code(), Some(2));

    // A backend that answers nothing but errors is a backend failure too.
    let dead = dir.path().join("dead.toml");
    fs::write(&dead, "[qa]\nbackend = \"process\"\nprogram = \"true\"\n").unwrap();
    assert_eq!(riddle(&["eval-all-clues", "--config", s(&dead), "--dataset", s(&ds)]).status.code(), Some(2));
}
