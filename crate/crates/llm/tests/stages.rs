use std::time::Duration;

use firmod_core::category::{default_definitions, Category};
use firmod_core::corpus::DecompiledFunction;
use firmod_core::Addr;
use firmod_llm::categorizer::{categorize_module, RankingOutcome};
use firmod_llm::similarity::summary_similarity;
use firmod_llm::summarizer::{summarize_module, FunctionSummary, SummarizeOptions, SummaryOutcome};
use firmod_llm::{Gateway, GatewayConfig};
use firmod_mockllm::{ChatMode, MockConfig, MockServer};

fn gateway(server: &MockServer, cache: Option<&std::path::Path>) -> Gateway {
    let mut cfg = GatewayConfig::new(server.url());
    cfg.retries = 1;
    cfg.initial_backoff = Duration::from_millis(1);
    cfg.cache_dir = cache.map(|p| p.to_path_buf());
    Gateway::new(cfg).unwrap()
}

fn functions() -> Vec<DecompiledFunction> {
    [
        (0x0800_0300, "void FUN_08000300(void)\n{\n  UART1_DR = DAT_20000010;\n}\n"),
        (0x0800_0100, "void FUN_08000100(int param_1)\n{\n  GPS_STATUS = param_1;\n}\n"),
        (0x0800_0200, "int FUN_08000200(void)\n{\n  return MOTOR_PWM + 1;\n}\n"),
    ]
    .into_iter()
    .map(|(a, t)| DecompiledFunction::new(Addr(a), t.to_string()))
    .collect()
}

fn ok(text: &str) -> FunctionSummary {
    FunctionSummary {
        entry: Addr(0),
        module: 0,
        model: "m".into(),
        truncated: false,
        latency_seconds: 0.0,
        from_cache: false,
        outcome: SummaryOutcome::Ok { summary_text: text.into() },
    }
}

#[tokio::test]
async fn one_summary_per_function_in_address_order() {
    let server =
        MockServer::spawn(MockConfig { chat: ChatMode::Fixed("does X".into()), ..Default::default() }).unwrap();
    let fs = functions();
    let refs: Vec<&DecompiledFunction> = fs.iter().collect();
    let out = summarize_module(4, &refs, &gateway(&server, None), &SummarizeOptions::new("m")).await;
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|s| s.text() == Some("does X") && s.module == 4));
    let entries: Vec<u64> = out.iter().map(|s| s.entry.get()).collect();
    assert_eq!(entries, vec![0x0800_0100, 0x0800_0200, 0x0800_0300]);
}

#[tokio::test]
async fn a_failed_request_leaves_a_placeholder() {
    let server = MockServer::spawn(MockConfig {
        chat: ChatMode::Fixed("does X".into()),
        reject_containing: Some("MOTOR_PWM".into()),
        ..Default::default()
    })
    .unwrap();
    let fs = functions();
    let refs: Vec<&DecompiledFunction> = fs.iter().collect();
    let out = summarize_module(0, &refs, &gateway(&server, None), &SummarizeOptions::new("m")).await;
    assert_eq!(out.len(), 3);
    assert_eq!(out.iter().filter(|s| s.text().is_some()).count(), 2);
    assert!(matches!(out[1].outcome, SummaryOutcome::Failed { .. }));
    assert_eq!(out[1].entry, Addr(0x0800_0200));
}

#[tokio::test]
async fn repeated_summaries_come_from_cache() {
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let fs = functions();
    let refs: Vec<&DecompiledFunction> = fs.iter().collect();
    let opts = SummarizeOptions::new("m");
    let first = summarize_module(0, &refs, &gateway(&server, Some(dir.path())), &opts).await;
    let hits = server.hits();
    let second = summarize_module(0, &refs, &gateway(&server, Some(dir.path())), &opts).await;
    assert_eq!(server.hits(), hits);
    let texts = |v: &[FunctionSummary]| v.iter().map(|s| s.text().unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(texts(&first), texts(&second));
    assert!(second.iter().all(|s| s.from_cache));
    assert!(texts(&first)[0].contains("gps"));
}

#[tokio::test]
async fn clean_ranking_is_parsed() {
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let summaries = [ok("Reads the gps position."), ok("Updates the waypoint heading.")];
    let r = categorize_module(2, &summaries, &default_definitions(), &gateway(&server, None), "m").await.unwrap();
    let ranking = r.ranking().unwrap();
    assert_eq!(ranking.ordered[0], Category::Navigation);
    assert_eq!(ranking.ordered.len(), 5);
    assert!(matches!(r.outcome, RankingOutcome::Ranked { retried: false, .. }));
    assert_eq!(server.hits(), 1);
}

#[tokio::test]
async fn prose_answer_gets_one_reformat_request() {
    let server = MockServer::spawn(MockConfig { chat: ChatMode::ProseBeforeRanking, ..Default::default() }).unwrap();
    let summaries = [ok("Drives the motor pwm outputs.")];
    let r = categorize_module(0, &summaries, &default_definitions(), &gateway(&server, None), "m").await.unwrap();
    assert!(matches!(r.outcome, RankingOutcome::Ranked { retried: true, .. }));
    assert_eq!(r.ranking().unwrap().ordered[0], Category::Controller);
    assert_eq!(server.hits(), 2);
    let last = server.bodies().pop().unwrap();
    let msgs = last["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 4);
    assert_eq!(msgs[3]["content"], firmod_llm::categorizer::REFORMAT_INSTRUCTION);
}

#[tokio::test]
async fn unparseable_after_retry_is_an_error() {
    let server =
        MockServer::spawn(MockConfig { chat: ChatMode::Fixed("no idea".into()), ..Default::default() }).unwrap();
    let err = categorize_module(7, &[ok("x")], &default_definitions(), &gateway(&server, None), "m").await.unwrap_err();
    assert!(matches!(err, firmod_llm::categorizer::CategorizeError::UnparseableRanking { module: 7, .. }));
}

#[tokio::test]
async fn module_without_summaries_is_skipped() {
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let failed = FunctionSummary { outcome: SummaryOutcome::Failed { error: "x".into() }, ..ok("") };
    let r = categorize_module(1, &[failed], &default_definitions(), &gateway(&server, None), "m").await.unwrap();
    assert_eq!(r.outcome, RankingOutcome::SkippedNoSummaries);
    assert_eq!(server.hits(), 0);
}

#[tokio::test]
async fn identical_summaries_have_unit_similarity() {
    let server = MockServer::spawn(MockConfig::default()).unwrap();
    let pairs = vec![
        ("reads the gps".to_string(), "reads the gps".to_string()),
        ("sends a packet".to_string(), "sends a packet".to_string()),
    ];
    let out = summary_similarity(&pairs, &gateway(&server, None), "emb").await.unwrap();
    assert_eq!(out.cosines.len(), 2);
    assert!((out.stats.mean - 1.0).abs() < 1e-9);
    assert!(out.stats.std.abs() < 1e-9);
}
