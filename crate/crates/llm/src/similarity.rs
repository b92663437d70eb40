//! Embedding similarity between summaries of decompiled and normalized code.

use firmod_core::evaluation::{cosine, EvalError, SimilarityStats};
use futures::future::try_join_all;

use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityOutcome {
    pub cosines: Vec<f64>,
    pub stats: SimilarityStats,
}

/// Cosine similarity per `(decompiled, normalized)` pair and its mean and
/// standard deviation.
pub async fn summary_similarity(
    pairs: &[(String, String)],
    gateway: &Gateway,
    embed_model: &str,
) -> Result<SimilarityOutcome, SimilarityError> {
    let jobs = pairs.iter().map(|(a, b)| async move {
        let u = gateway.embed(embed_model, a).await?;
        let v = gateway.embed(embed_model, b).await?;
        Ok::<f64, SimilarityError>(cosine(&u.values, &v.values)?)
    });
    let cosines = try_join_all(jobs).await?;
    Ok(SimilarityOutcome { stats: SimilarityStats::from_values(&cosines), cosines })
}
