//! One summary request per decompiled function.

use firmod_core::corpus::DecompiledFunction;
use firmod_core::Addr;
use futures::future::join_all;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatMessage, ChatRequest, Gateway, DEFAULT_MAX_TOKENS};

pub const SYSTEM_PROMPT: &str = "You are an experienced reverse engineer. You are reading C pseudocode produced by a \
decompiler from stripped ARM firmware of an embedded flight controller. Symbol names were removed during compilation, \
so identifiers such as FUN_08001234 or DAT_20000010 carry no meaning.";

pub const INSTRUCTION: &str = "Summarize the purpose of the following decompiled function in two to four sentences of \
plain prose. Describe what it does, not how each line works. Do not include code.";

pub const TRUNCATION_MARKER: &str = "[function text truncated]";

pub const DEFAULT_CHAR_BUDGET: usize = 48_000;

#[derive(Debug, Clone)]
pub struct SummarizeOptions {
    pub model: String,
    /// Longest function text, in characters, sent verbatim.
    pub char_budget: usize,
    pub max_tokens: u32,
}

impl SummarizeOptions {
    pub fn new(model: impl Into<String>) -> Self {
        SummarizeOptions { model: model.into(), char_budget: DEFAULT_CHAR_BUDGET, max_tokens: DEFAULT_MAX_TOKENS }
    }
}

/// The request for `func` and whether its text had to be cut.
pub fn build_summarization_prompt(func: &DecompiledFunction, opts: &SummarizeOptions) -> (ChatRequest, bool) {
    let (body, truncated) = match func.text.char_indices().nth(opts.char_budget) {
        Some((cut, _)) => (&func.text[..cut], true),
        None => (func.text.as_str(), false),
    };
    let mut user = format!("{INSTRUCTION}\n\n```c\n{body}");
    if !body.ends_with('\n') {
        user.push('\n');
    }
    user.push_str("```");
    if truncated {
        user.push('\n');
        user.push_str(TRUNCATION_MARKER);
    }
    let mut req =
        ChatRequest::new(opts.model.clone(), vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]);
    req.max_tokens = opts.max_tokens;
    (req, truncated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SummaryOutcome {
    Ok { summary_text: String },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSummary {
    pub entry: Addr,
    pub module: usize,
    pub model: String,
    pub truncated: bool,
    pub latency_seconds: f64,
    #[serde(default)]
    pub from_cache: bool,
    #[serde(flatten)]
    pub outcome: SummaryOutcome,
}

impl FunctionSummary {
    pub fn text(&self) -> Option<&str> {
        match &self.outcome {
            SummaryOutcome::Ok { summary_text } => Some(summary_text),
            SummaryOutcome::Failed { .. } => None,
        }
    }
}

/// Summaries for every function, ordered by entry address. Requests that
/// fail after retries become `Failed` placeholders.
pub async fn summarize_module(
    module: usize,
    functions: &[&DecompiledFunction],
    gateway: &Gateway,
    opts: &SummarizeOptions,
) -> Vec<FunctionSummary> {
    let jobs = functions.iter().map(|f| async move {
        let (req, truncated) = build_summarization_prompt(f, opts);
        let (outcome, latency_seconds, from_cache) = match gateway.chat(&req).await {
            Ok(r) if r.text.trim().is_empty() => {
                (SummaryOutcome::Failed { error: "empty summary".into() }, r.latency_seconds, r.from_cache)
            }
            Ok(r) => (SummaryOutcome::Ok { summary_text: r.text.trim().to_string() }, r.latency_seconds, r.from_cache),
            Err(e) => (SummaryOutcome::Failed { error: e.to_string() }, 0.0, false),
        };
        FunctionSummary {
            entry: f.entry,
            module,
            model: opts.model.clone(),
            truncated,
            latency_seconds,
            from_cache,
            outcome,
        }
    });
    let mut out = join_all(jobs).await;
    out.sort_by_key(|s| s.entry);
    out
}
