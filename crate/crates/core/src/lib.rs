//! Causal-first graph retrieval aligned with chain-of-thought reasoning.

pub mod causal;
pub mod config;
pub mod cot;
pub mod enhancer;
mod error;
pub mod eval;
pub mod graph;
pub mod linker;
pub mod llm;
pub mod prompt;
pub mod retrieval;
pub mod scalar;

pub use error::{Error, Result};

/// Double-precision graph, the default for command-line use.
pub type Graph = graph::KnowledgeGraph<f64>;
pub type Graph32 = graph::KnowledgeGraph<f32>;
/// Exact-arithmetic graph for scoring checks.
pub type ExactGraph = graph::KnowledgeGraph<scalar::Rational>;
pub type Table = causal::CausalityTable<f64>;
pub type ExactTable = causal::CausalityTable<scalar::Rational>;
pub type Enhancer = enhancer::EnhancerConfig<f64>;
pub type ExactEnhancer = enhancer::EnhancerConfig<scalar::Rational>;

pub use scalar::{Rational, Scalar};
