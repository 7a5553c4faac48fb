use std::path::Path;
use std::process::{Command, Output};

use rtm_eval::client::stub::{StubResponse, StubServer};
use rtm_eval::ingest::load_summaries;
use rtm_eval::Pipeline;
use serde_json::Value;

fn rtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtm-eval"))
        .args(args)
        .env_remove("RTM_LLM_ENDPOINT")
        .env_remove("RTM_LLM_KEY")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const OBS: &str = "\
patient_id,date,timestamp,modality,value
p1,2019-06-14,2019-06-14 09:00,systolic_bp,177
p1,2019-06-14,2019-06-14 09:30,systolic_bp,120
p1,2019-06-14,2019-06-14 08:00,heart_rate,72
p1,2019-06-14,2019-06-14 10:00,heart_rate,not-a-number
p2,2019-06-14,2019-06-14 08:00,heart_rate,95
p2,2019-06-14,2019-06-14 09:00,body_temperature,36.6
";

fn fixture(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("obs.csv");
    std::fs::write(&p, OBS).unwrap();
    p
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rtm(&["evaluate", "--facts", "f.jsonl", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--summaries"));
    assert_eq!(rtm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rtm(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rtm(&["extract-facts", "--in", s(&tmp.path().join("nope.csv")), "--out", s(&tmp.path().join("f.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("f.jsonl").exists());
}

#[test]
fn extract_facts_writes_facts_manifest_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let out_dir = tmp.path().join("out");
    let facts = out_dir.join("facts.jsonl");
    ok(&rtm(&["extract-facts", "--in", s(&obs), "--out", s(&facts)]));

    let lines: Vec<Value> =
        std::fs::read_to_string(&facts).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["patient_id"], "p1");
    assert_eq!(lines[0]["facts"][0]["value"], 177.0);
    assert_eq!(lines[1]["facts"][0]["vital"], "heart_rate");

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("facts.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "extract-facts");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let rejects = std::fs::read_to_string(out_dir.join("obs.csv.rejects")).unwrap();
    assert_eq!(rejects.lines().count(), 1);
    assert!(rejects.starts_with("5\t"), "{rejects}");
    // Nothing is written outside --out.
    let mut names: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["obs.csv", "out"]);
}

#[test]
fn same_config_gives_same_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let hash = |name: &str| {
        let f = tmp.path().join(name);
        ok(&rtm(&["featurize", "--in", s(&obs), "--out", s(&f)]));
        let m: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(format!("{name}.manifest.json"))).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("a.jsonl"), hash("b.jsonl"));
}

#[test]
fn evaluate_and_report_table() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let facts = tmp.path().join("facts.jsonl");
    ok(&rtm(&["extract-facts", "--in", s(&obs), "--out", s(&facts)]));
    let summaries = tmp.path().join("summaries.jsonl");
    std::fs::write(
        &summaries,
        concat!(
            r#"{"patient_id":"p1","date":"2019-06-14","pipeline":"stat_based","text":"Blood pressure remained within normal limits. Heart rate was normal."}"#,
            "\n",
            r#"{"patient_id":"p2","date":"2019-06-14","pipeline":"stat_based","text":"Heart Rate was Abnormally High (value: 95.0). Temperature was normal."}"#,
            "\n",
        ),
    )
    .unwrap();
    let eval = tmp.path().join("eval");
    ok(&rtm(&["evaluate", "--facts", s(&facts), "--summaries", s(&summaries), "--out", s(&eval)]));
    for f in ["evaluations.jsonl", "report.json", "report.txt", "manifest.json"] {
        assert!(eval.join(f).exists(), "{f}");
    }

    let out = rtm(&["report", "--in", s(&eval)]);
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    for col in ["Pipeline", "Abnormality", "Duration", "Coverage", "Hallucinations", "Misclassifications"] {
        assert!(table.contains(col), "{col} missing from\n{table}");
    }
    let row = table.lines().find(|l| l.starts_with("stat_based")).expect("pipeline row");
    assert!(row.contains("50.0"), "{row}");

    let json_out = tmp.path().join("r.json");
    ok(&rtm(&["report", "--in", s(&eval), "--format", "json", "--averaging", "macro", "--out", s(&json_out)]));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(r["averaging"], "macro");
    assert_eq!(r["pipelines"][0]["misclassifications"], 1);
}

#[test]
fn summary_without_facts_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let facts = tmp.path().join("facts.jsonl");
    ok(&rtm(&["extract-facts", "--in", s(&obs), "--out", s(&facts)]));
    let summaries = tmp.path().join("summaries.jsonl");
    std::fs::write(&summaries, r#"{"patient_id":"p9","date":"2019-06-14","pipeline":"zero_shot","text":"Fine."}"#).unwrap();
    let out = rtm(&["evaluate", "--facts", s(&facts), "--summaries", s(&summaries), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p9"));
}

#[test]
fn prompts_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let prompts = tmp.path().join("prompts");
    ok(&rtm(&["prompt", "--in", s(&obs), "--kind", "zero-shot", "--out", s(&prompts)]));
    let p1 = std::fs::read_to_string(prompts.join("p1_2019-06-14_zero_shot.txt")).unwrap();
    assert!(p1.contains("Your primary goal is factuality."));
    assert!(p1.contains("09:00 177"));

    let vision = tmp.path().join("vision");
    ok(&rtm(&["prompt", "--in", s(&obs), "--kind", "vision", "--out", s(&vision)]));
    assert!(vision.join("p2_2019-06-14_body_temperature_vision.txt").exists());
    assert!(!vision.join("p2_2019-06-14_systolic_bp_vision.txt").exists());

    let plots = tmp.path().join("plots");
    ok(&rtm(&["render", "--in", s(&obs), "--out", s(&plots)]));
    let svgs = std::fs::read_dir(&plots).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert_eq!(svgs, 4);
}

#[test]
fn generate_without_credentials_fails_fast() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let out = rtm(&["generate", "--in", s(&obs), "--pipeline", "zero-shot", "--model", "m", "--out", s(&tmp.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RTM_LLM_KEY"));
}

#[test]
fn generate_against_stub_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = fixture(tmp.path());
    let server = StubServer::start(vec![StubResponse::status(503), StubResponse::chat("Heart rate was normal. Score: 4")]);
    let live = tmp.path().join("live");
    let out = Command::new(env!("CARGO_BIN_EXE_rtm-eval"))
        .args(["generate", "--in", s(&obs), "--pipeline", "stat-based", "--model", "m", "--judge-model", "j"])
        .args(["--max-in-flight", "1", "--out", s(&live)])
        .env("RTM_LLM_ENDPOINT", &server.url)
        .env("RTM_LLM_KEY", "test-key")
        .output()
        .unwrap();
    ok(&out);
    let got = load_summaries(&live.join("summaries.jsonl")).unwrap();
    assert_eq!(got.summaries.len(), 2);
    assert!(got.summaries.iter().all(|s| s.pipeline == Pipeline::StatBased));
    let clarity = std::fs::read_to_string(live.join("clarity.jsonl")).unwrap();
    assert_eq!(clarity.lines().count(), 2);
    assert!(clarity.contains("\"score\":4"));
    let audit = std::fs::read_to_string(live.join("audit.jsonl")).unwrap();
    assert!(!audit.contains("test-key"));
    assert!(audit.contains("503"));

    let requests = server.requests().len();
    let replayed = tmp.path().join("replayed");
    ok(&rtm(&[
        "generate", "--in", s(&obs), "--pipeline", "stat-based", "--model", "m", "--judge-model", "j",
        "--replay", s(&live.join("audit.jsonl")), "--out", s(&replayed),
    ]));
    assert_eq!(server.requests().len(), requests, "replay must not touch the network");
    assert_eq!(
        std::fs::read(live.join("summaries.jsonl")).unwrap(),
        std::fs::read(replayed.join("summaries.jsonl")).unwrap()
    );

    // A prompt absent from the audit log is an input error.
    let other = rtm(&[
        "generate", "--in", s(&obs), "--pipeline", "zero-shot", "--model", "m",
        "--replay", s(&live.join("audit.jsonl")), "--out", s(&tmp.path().join("miss")),
    ]);
    assert_eq!(other.status.code(), Some(1));
}

#[test]
fn synth_writes_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    std::fs::write(&spec, r#"{"n_days": 6, "n_patients": 2, "corruption": {"omit": 0.5}}"#).unwrap();
    let out = tmp.path().join("synth");
    ok(&rtm(&["synth", "--spec", s(&spec), "--seed", "3", "--out", s(&out)]));
    for f in ["observations.csv", "facts.jsonl", "summaries.jsonl", "episodes.jsonl", "expected_report.json", "thresholds.cfg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"n_days": 0}"#).unwrap();
    assert_eq!(rtm(&["synth", "--spec", s(&bad), "--out", s(&tmp.path().join("x"))]).status.code(), Some(1));
    std::fs::write(&bad, r#"{"n_dayz": 3}"#).unwrap();
    assert_eq!(rtm(&["synth", "--spec", s(&bad), "--out", s(&tmp.path().join("x"))]).status.code(), Some(1));
}
