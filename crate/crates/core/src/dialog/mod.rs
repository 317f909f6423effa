//! Session orchestration: linking, planning, the recommend-or-ground
//! decision, knowledge search and response rendering.

mod engine;
mod planner;
mod render;
mod search;

pub use engine::{DialogState, Engine, EngineOptions, SessionTurn, StepOutcome, TraceRecord};
pub use planner::{
    EntityLinker, LexicalLinker, LongTermPlanner, OracleGrounding, OracleTarget, RandomGrounding, RandomTarget, ShortTermPlanner, VariantStp,
};

pub use render::{fact_sentences, realize_fact, render, surface_pattern, ActionKind, MAX_FACTS};
pub use search::{knowledge_search, KNOWLEDGE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Triple};

/// What the agent does on one turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    pub entity: EntityId,
    pub knowledge: Vec<Triple>,
    pub response_text: String,
}

/// Recommend exactly when the short-term choice equals the long-term target.
pub fn decide(stp_top: EntityId, ltp_target: EntityId) -> ActionKind {
    if stp_top == ltp_target {
        ActionKind::Recommend
    } else {
        ActionKind::Ground
    }
}
