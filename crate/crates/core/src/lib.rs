//! Engine for interactive literature foraging.
//!
//! A session keeps a typed graph of papers ([`graph::GraphDocument`]) laid out
//! in 3D by a deterministic force simulation ([`layout`]). The graph grows
//! through provider-backed recommendations ([`expand`]), is organized by
//! offline or LLM-backed content analysis ([`insight`]), and every interaction
//! is logged so a session can be replayed exactly ([`session`]).

pub mod engine;
pub mod error;
pub mod expand;
pub mod graph;
pub mod hash;
pub mod insight;
pub mod layout;
pub mod provider;
pub mod session;
pub mod transport;

pub use engine::{Command, CommandOutcome, Engine, InsightKind};
pub use error::{Error, Result};
pub use expand::{ExpansionMode, ExpansionRequest, ExpansionResult, RankStrategy};
pub use graph::{
    Annotation, Author, ChangeReport, ClusterAssignment, EdgeKind, GraphDocument, PaperId,
    PaperNode, Provenance, TypedEdge, Violation, SCHEMA_VERSION,
};
pub use insight::{Embedding, InsightEngine, InsightProviderConfig, InsightProviderKind};
pub use layout::{ForceConfig, LayoutState, Vec3};
pub use provider::{MetadataClient, MetadataProvider, PaperRecord, ProviderConfig, ProviderMode};
pub use session::{EventLog, Feature, InteractionEvent, Modality, Session, SessionDir};
