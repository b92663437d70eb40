//! Decomposition of stripped ARM firmware into modules, plus the
//! normalization and scoring machinery used to evaluate it.

pub mod addr;
pub mod arm;
pub mod binary;
pub mod category;
pub mod community;
pub mod corpus;
pub mod evaluation;
pub mod graph;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod store;

pub use addr::Addr;
