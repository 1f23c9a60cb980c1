//! Text scene graphs from dependency parses, graph asymmetry scoring,
//! Winoground-style metrics, caption ablations and prompt construction.
//!
//! Model outputs (score quads, embeddings, yes/no logits) come in as data.

pub mod ablate;
pub mod assignment;
pub mod asym;
pub mod augment;
pub mod conllu;
pub mod embed;
pub mod error;
pub mod metrics;
pub mod promptkit;
pub mod sgparse;

pub use ablate::{find_spans, transform, AblationKind, SemanticSpans, Span, SpanOptions, TransformOptions, Transformed};
pub use assignment::{solve_assignment, CostMatrix, Objective};
pub use asym::{build_cost_matrix, delta_sg, pairwise_asymmetry, AsymConfig, MatchNorm};
pub use augment::{augment_quad, clip_score, softmax_pair, AsymContext, AugmentConfig, DEFAULT_LAMBDA};
pub use conllu::{parse_conllu, parse_conllu_str, DepTree, Token};
pub use embed::{load_embeddings, load_embeddings_str, EmbeddingStore, OovPolicy};
pub use error::{Error, ModelError, Result};
pub use metrics::{aggregate, example_metrics, ExampleRecord, Indicators, MetricReport, ScoreQuad};
pub use promptkit::{run_multiturn, PromptTemplates, ScriptedModel, VisionLanguageModel};
pub use sgparse::{parse_scene_graph, EntityMention, Rule, SceneGraph, SceneGraphParser, Triple};
