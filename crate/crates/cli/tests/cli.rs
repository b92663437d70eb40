use std::path::Path;
use std::process::{Command, Output};

use firmod_mockllm::{ChatMode, MockConfig, MockServer};
use firmod_testkit::project::{write_fixture_project, DEVICE, MODEL};
use serde_json::Value;

fn firmod(root: &Path, args: &[&str], mock: Option<&MockServer>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_firmod"));
    cmd.arg("--project").arg(root).args(args);
    if let Some(m) = mock {
        cmd.arg("--mock-endpoint").arg(m.url());
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_project(dir.path()).unwrap();
    dir
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn summaries_path(root: &Path, suffix: &str) -> std::path::PathBuf {
    root.join(format!("summaries/{MODEL}/{DEVICE}{suffix}.json"))
}

#[test]
fn missing_binary_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = firmod(dir.path(), &["decompose"], None);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("`binary`"), "{}", stderr(&o));
}

#[test]
fn bad_usage_exits_with_config_code() {
    let dir = project();
    assert_eq!(code(&firmod(dir.path(), &["decompose", "--weights", "1,2"], None)), 2);
    assert_eq!(code(&firmod(dir.path(), &["frobnicate"], None)), 2);
}

#[test]
fn decompose_writes_labeled_artifacts() {
    let dir = project();
    let o = firmod(dir.path(), &["decompose"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("15 functions"), "{}", stdout(&o));
    assert!(stdout(&o).contains("3 modules"), "{}", stdout(&o));
    let p = json(dir.path().join("partitions/partition.json"));
    assert_eq!(p["partition"]["clusters"].as_object().unwrap().len(), 3);
    for g in ["sg", "drg", "cg", "combined"] {
        assert!(dir.path().join(format!("graphs/{g}.json")).is_file());
    }
    assert!(dir.path().join("partitions/partition.json.meta.json").is_file());

    let o = firmod(dir.path(), &["decompose", "--weights", "1,0,0"], None);
    assert_eq!(code(&o), 0);
    let p = json(dir.path().join("partitions/partition.json"));
    assert_eq!(p["weights"], serde_json::json!({"alpha": 1.0, "beta": 0.0, "gamma": 0.0}));
    let meta = json(dir.path().join("partitions/partition.json.meta.json"));
    assert_eq!(meta["upstream"]["weights"], "1,0,0");
}

#[test]
fn decompose_is_byte_identical_on_rerun() {
    let dir = project();
    firmod(dir.path(), &["decompose"], None);
    let first = std::fs::read(dir.path().join("partitions/partition.json")).unwrap();
    firmod(dir.path(), &["decompose"], None);
    assert_eq!(std::fs::read(dir.path().join("partitions/partition.json")).unwrap(), first);
}

#[test]
fn later_stages_name_their_missing_inputs() {
    let dir = project();
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let o = firmod(dir.path(), &["summarize"], Some(&server));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("partition.json"), "{}", stderr(&o));
    firmod(dir.path(), &["decompose"], None);
    let o = firmod(dir.path(), &["categorize"], Some(&server));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("summaries"), "{}", stderr(&o));
    assert_eq!(server.hits(), 0);
}

#[test]
fn evaluate_without_ground_truth() {
    let dir = project();
    firmod(dir.path(), &["decompose"], None);
    let cfg = std::fs::read_to_string(dir.path().join("firmod.toml")).unwrap();
    let cfg = cfg.replace("modules = \"gt/modules.json\"\n", "");
    std::fs::write(dir.path().join("firmod.toml"), cfg).unwrap();
    let o = firmod(dir.path(), &["evaluate"], None);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("ground truth"));
}

#[test]
fn unreachable_endpoint_exits_4_and_keeps_partial_results() {
    let dir = project();
    firmod(dir.path(), &["decompose"], None);
    let o = firmod(dir.path(), &["summarize"], None);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let records = json(summaries_path(dir.path(), ""));
    assert_eq!(records.as_array().unwrap().len(), 11);
    assert!(records.as_array().unwrap().iter().all(|r| r["status"] == "failed"));
}

#[test]
fn interrupted_summarization_resumes_remaining_modules_only() {
    let dir = project();
    firmod(dir.path(), &["decompose"], None);
    let failing =
        MockServer::spawn(MockConfig { reject_containing: Some("MOTOR".into()), ..Default::default() }).unwrap();
    let o = firmod(dir.path(), &["summarize"], Some(&failing));
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let records = json(summaries_path(dir.path(), ""));
    let failed: Vec<&Value> = records.as_array().unwrap().iter().filter(|r| r["status"] == "failed").collect();
    assert_eq!(failed.len(), 2);
    let failed_module = failed[0]["module"].clone();
    let in_module = records.as_array().unwrap().iter().filter(|r| r["module"] == failed_module).count();

    let healthy = MockServer::spawn(MockConfig::default()).unwrap();
    let o = firmod(dir.path(), &["summarize"], Some(&healthy));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(in_module > failed.len());
    assert_eq!(healthy.hits(), failed.len(), "only the failed functions reach the network");
    assert!(stdout(&o).contains(&format!("{} from cache", in_module - failed.len())), "{}", stdout(&o));
    let records = json(summaries_path(dir.path(), ""));
    assert!(records.as_array().unwrap().iter().all(|r| r["status"] == "ok"));
}

#[test]
fn full_pipeline_is_idempotent_and_cached() {
    let dir = project();
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let steps: [&[&str]; 4] = [&["decompose"], &["summarize"], &["categorize"], &["evaluate"]];
    for s in steps {
        let o = firmod(dir.path(), s, Some(&server));
        assert_eq!(code(&o), 0, "{s:?}: {}", stderr(&o));
    }
    let artifacts = [
        "partitions/partition.json".to_string(),
        format!("summaries/{MODEL}/{DEVICE}.json"),
        format!("rankings/{MODEL}/{DEVICE}.json"),
        "reports/evaluation.json".to_string(),
        "reports/timing.json".to_string(),
    ];
    let before: Vec<Vec<u8>> = artifacts.iter().map(|a| std::fs::read(dir.path().join(a)).unwrap()).collect();
    let hits = server.hits();
    for s in steps {
        assert_eq!(code(&firmod(dir.path(), s, Some(&server))), 0);
    }
    assert_eq!(server.hits(), hits);
    for (a, b) in artifacts.iter().zip(&before) {
        assert_eq!(&std::fs::read(dir.path().join(a)).unwrap(), b, "{a} changed");
    }

    let eval = json(dir.path().join("reports/evaluation.json"));
    let m = &eval["modularization"];
    assert_eq!(m["module_count"], 3);
    assert_eq!(m["function_count"], 11);
    assert!(m["f1_w"].as_f64().unwrap() > 0.8);
    let per = eval["categories"][MODEL]["decompiled"]["per_category"].as_object().unwrap();
    assert_eq!(per.len(), 5);

    let o = firmod(dir.path(), &["report"], None);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("TinyArm"), "{text}");
    assert!(text.contains("mock-coder P"), "{text}");
    assert!(dir.path().join("reports/report.txt").is_file());
}

#[test]
fn rankings_recover_from_prose_answers() {
    let dir = project();
    let server = MockServer::spawn(MockConfig { chat: ChatMode::ProseBeforeRanking, ..Default::default() }).unwrap();
    for s in [&["decompose"][..], &["summarize"], &["categorize"]] {
        assert_eq!(code(&firmod(dir.path(), s, Some(&server))), 0);
    }
    let rankings = json(dir.path().join(format!("rankings/{MODEL}/{DEVICE}.json")));
    let ranked: Vec<&Value> = rankings.as_array().unwrap().iter().filter(|r| r["status"] == "ranked").collect();
    assert_eq!(ranked.len(), 3);
    assert!(ranked.iter().all(|r| r["retried"] == true));
}

#[test]
fn changed_partition_makes_downstream_stale() {
    let dir = project();
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    for s in [&["decompose"][..], &["summarize"], &["categorize"]] {
        assert_eq!(code(&firmod(dir.path(), s, Some(&server))), 0);
    }
    assert_eq!(code(&firmod(dir.path(), &["decompose", "--weights", "1,0,0"], None)), 0);
    let o = firmod(dir.path(), &["evaluate"], Some(&server));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("partition"), "{}", stderr(&o));
}

#[test]
fn upper_bound_and_similarity_from_normalized_source() {
    let dir = project();
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let o = firmod(dir.path(), &["normalize"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let putc = std::fs::read_to_string(dir.path().join("normalized/uart_putc.c")).unwrap();
    assert!(putc.contains("FUNC_0"), "{putc}");
    assert!(!putc.contains("uart_putc"));
    assert!(putc.contains("ID_0"));
    let map = json(dir.path().join("normalized/uart_putc.map.json"));
    assert_eq!(map["rename_map"]["uart_putc"], "FUNC_0");

    let steps: [&[&str]; 6] = [
        &["decompose"],
        &["summarize"],
        &["summarize", "--source", "normalized"],
        &["categorize"],
        &["categorize", "--source", "normalized"],
        &["evaluate"],
    ];
    for s in steps {
        let o = firmod(dir.path(), s, Some(&server));
        assert_eq!(code(&o), 0, "{s:?}: {}", stderr(&o));
    }
    let eval = json(dir.path().join("reports/evaluation.json"));
    assert!(eval["categories"][MODEL]["upper_bound"].is_object());
    let sim = &eval["similarity"][MODEL];
    assert!(sim["count"].as_u64().unwrap() > 0, "{eval}");
    let report = stdout(&firmod(dir.path(), &["report"], None));
    assert!(report.contains(" ("), "{report}");
    assert!(report.contains(" ± "), "{report}");
}

#[test]
fn concurrent_runs_are_refused() {
    let dir = project();
    std::fs::write(dir.path().join(".firmod.lock"), "1").unwrap();
    let o = firmod(dir.path(), &["decompose"], None);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("locked"));
}
