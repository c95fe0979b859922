//! Domain-knowledge agent for air-pollutant emission work: document
//! retrieval with grounded answers, inventory analytics through validated
//! function calls, emission-factor recommendation, and evaluation tooling.

pub mod agent;
pub mod corpus;
pub mod efrec;
pub mod evalkit;
pub mod inventory;
pub mod providers;
pub mod retrieval;
pub mod toolchain;
pub mod tools;

pub use agent::{Agent, AgentConfig, AgentError, ConversationTurn, GroundedAnswer, PromptPack, QueryCategory, Session};
pub use corpus::{Chunk, ChunkParams, DocumentRecord, Species};
pub use efrec::{EfQuery, EfRecommender, EmissionFactorRecord, Grade, GradeWeights, QualityGrades, Recommendation};
pub use evalkit::{EvalItem, EvalReport, ExpertScore, MetricScores, PairwiseReport};
pub use inventory::{AggregateTable, ChartData, ChartKind, FilterSpec, GroupKey, InventoryQuery, InventoryStore};
pub use providers::{build_provider, ModelProvider, ProviderConfig, ProviderMode, StubProvider};
pub use retrieval::{ScoredChunk, VectorIndex};
pub use toolchain::{FunctionCall, FunctionRegistry, FunctionResult, FunctionSpec, Violation};
