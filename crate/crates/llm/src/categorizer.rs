//! Category prompt construction and ranking retrieval per module.

use firmod_core::category::{complete_definitions, parse_ranking, CategoryDefinition, CategoryError, CategoryRanking};
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::summarizer::FunctionSummary;

pub const SYSTEM_PROMPT: &str = "You are an expert in flight-controller firmware architecture. You assign firmware \
modules to functional categories using the definitions you are given.";

pub const DEFINITIONS_HEADER: &str = "Category definitions:";
pub const SUMMARIES_HEADER: &str = "Function summaries:";
pub const INSTRUCTION_HEADER: &str = "Instruction:";

pub const INSTRUCTION: &str = "The summaries above describe the functions of one firmware module. Rank all five \
categories from most to least likely for this module. Output the five category names, one per line, most likely first.";

pub const REFORMAT_INSTRUCTION: &str = "Answer with only the five category names, ranked, one per line.";

#[derive(Debug, thiserror::Error)]
pub enum CategorizeError {
    #[error(transparent)]
    Definitions(#[from] CategoryError),
    #[error("module has no usable summaries")]
    NoSummaries,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("module {module}: no category names in the answer, even after asking again")]
    UnparseableRanking { module: usize, raw_text: String },
}

/// Definitions, numbered summaries, then the instruction.
pub fn build_category_prompt(
    model: &str,
    defs: &[CategoryDefinition],
    summaries: &[&str],
) -> Result<ChatRequest, CategorizeError> {
    let defs = complete_definitions(defs)?;
    if summaries.is_empty() {
        return Err(CategorizeError::NoSummaries);
    }
    let mut user = String::from(DEFINITIONS_HEADER);
    user.push('\n');
    for d in defs {
        user.push_str(&format!("- {}: {}\n", d.category.title(), d.definition_text.trim()));
    }
    user.push('\n');
    user.push_str(SUMMARIES_HEADER);
    user.push('\n');
    for (i, s) in summaries.iter().enumerate() {
        user.push_str(&format!("{}. {}\n", i + 1, s.trim()));
    }
    user.push('\n');
    user.push_str(INSTRUCTION_HEADER);
    user.push('\n');
    user.push_str(INSTRUCTION);
    Ok(ChatRequest::new(model, vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RankingOutcome {
    Ranked {
        ranking: CategoryRanking,
        /// The first answer was unparseable and the reformat request was used.
        retried: bool,
        latency_seconds: f64,
        from_cache: bool,
    },
    SkippedNoSummaries,
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRanking {
    pub module: usize,
    pub model: String,
    #[serde(flatten)]
    pub outcome: RankingOutcome,
}

impl ModuleRanking {
    pub fn ranking(&self) -> Option<&CategoryRanking> {
        match &self.outcome {
            RankingOutcome::Ranked { ranking, .. } => Some(ranking),
            _ => None,
        }
    }
}

/// Ranks the categories for one module. Failed summaries are left out; a
/// module without any usable summary is skipped rather than queried. An
/// answer naming no category gets one follow-up asking for the bare list.
pub async fn categorize_module(
    module: usize,
    summaries: &[FunctionSummary],
    defs: &[CategoryDefinition],
    gateway: &Gateway,
    model: &str,
) -> Result<ModuleRanking, CategorizeError> {
    let texts: Vec<&str> = summaries.iter().filter_map(FunctionSummary::text).collect();
    if texts.is_empty() {
        complete_definitions(defs)?;
        return Ok(ModuleRanking { module, model: model.to_string(), outcome: RankingOutcome::SkippedNoSummaries });
    }
    let req = build_category_prompt(model, defs, &texts)?;
    let first = gateway.chat(&req).await?;
    let mut latency_seconds = first.latency_seconds;
    let mut from_cache = first.from_cache;
    let (ranking, retried) = match parse_ranking(module, &first.text) {
        Ok(r) => (r, false),
        Err(_) => {
            let mut retry = req.clone();
            retry.messages.push(ChatMessage::assistant(first.text.clone()));
            retry.messages.push(ChatMessage::user(REFORMAT_INSTRUCTION));
            let second = gateway.chat(&retry).await?;
            latency_seconds += second.latency_seconds;
            from_cache &= second.from_cache;
            let r = parse_ranking(module, &second.text)
                .map_err(|_| CategorizeError::UnparseableRanking { module, raw_text: second.text.clone() })?;
            (r, true)
        }
    };
    Ok(ModuleRanking {
        module,
        model: model.to_string(),
        outcome: RankingOutcome::Ranked { ranking, retried, latency_seconds, from_cache },
    })
}
