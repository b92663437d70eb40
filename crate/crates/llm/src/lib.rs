//! LLM access and the two stages built on it: per-function summaries and
//! per-module category rankings.

pub mod categorizer;
pub mod gateway;
pub mod similarity;
pub mod summarizer;
pub mod timing;

pub use gateway::{ChatMessage, ChatRequest, ChatResponse, EmbeddingVector, Gateway, GatewayConfig, GatewayError};
