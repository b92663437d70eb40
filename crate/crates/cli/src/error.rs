//! Exit-code families. Anything not classified here exits with 1.

use firmod_core::binary::BinaryError;
use firmod_core::store::StoreError;
use firmod_llm::categorizer::CategorizeError;
use firmod_llm::similarity::SimilarityError;
use firmod_llm::GatewayError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MISSING: u8 = 3;
pub const EXIT_ENDPOINT: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing {what}: {detail}")]
    Missing { what: &'static str, detail: String },
    #[error("no ground truth configured (set ground_truth.modules and ground_truth.categories)")]
    MissingGroundTruth,
    #[error("{failed} of {total} {unit} failed against the endpoint; rerun to resume")]
    EndpointFailures { failed: usize, total: usize, unit: &'static str },
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Config(_) => EXIT_CONFIG,
                CliError::Missing { .. } | CliError::MissingGroundTruth => EXIT_MISSING,
                CliError::EndpointFailures { .. } => EXIT_ENDPOINT,
            };
        }
        if let Some(e) = cause.downcast_ref::<StoreError>() {
            return match e {
                StoreError::MissingArtifact(_) | StoreError::Stale { .. } => EXIT_MISSING,
                StoreError::Locked(_) => EXIT_CONFIG,
                _ => EXIT_INTERNAL,
            };
        }
        if cause.downcast_ref::<GatewayError>().is_some() {
            return EXIT_ENDPOINT;
        }
        if let Some(CategorizeError::Gateway(_)) = cause.downcast_ref::<CategorizeError>() {
            return EXIT_ENDPOINT;
        }
        if let Some(SimilarityError::Gateway(_)) = cause.downcast_ref::<SimilarityError>() {
            return EXIT_ENDPOINT;
        }
        if let Some(BinaryError::Io { .. }) = cause.downcast_ref::<BinaryError>() {
            return EXIT_CONFIG;
        }
    }
    EXIT_INTERNAL
}
