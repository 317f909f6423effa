use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::planner::{EntityLinker, LongTermPlanner, ShortTermPlanner};
use super::{decide, knowledge_search, render, ActionKind, AgentAction};
use crate::data::{push_entity, Speaker, UserProfile};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::stp::StpQuery;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Skip items the user has already turned down when picking the target.
    pub mask_rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTurn {
    pub speaker: Speaker,
    pub text: String,
    /// Linked entities for user turns; the grounding for agent turns.
    pub entities: Vec<EntityId>,
}

/// One line of the session trace log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub turn: usize,
    pub user_text: String,
    pub linked: Vec<EntityId>,
    pub ltp_target: EntityId,
    pub stp_top: EntityId,
    pub action: ActionKind,
    pub knowledge: Vec<(EntityId, u32, EntityId)>,
    pub response: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub session_id: String,
    pub profile: UserProfile,
    pub turns: Vec<SessionTurn>,
    /// Conversation entities in mention order.
    pub convo_entities: Vec<EntityId>,
    pub prev_grounding: Option<EntityId>,
    /// Items recommended and not accepted.
    pub rejected: Vec<EntityId>,
    pub trace: Vec<TraceRecord>,
}

impl DialogState {
    pub fn new(session_id: impl Into<String>, profile: UserProfile) -> Self {
        DialogState {
            session_id: session_id.into(),
            profile,
            ..Default::default()
        }
    }

    pub fn write_trace(&self, w: &mut dyn Write) -> Result<()> {
        for r in &self.trace {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub action: AgentAction,
    pub linked: Vec<EntityId>,
    pub ltp_target: EntityId,
    pub stp_top: EntityId,
}

/// Read-only bundle of the graph, embeddings and the three planners.
#[derive(Clone)]
pub struct Engine {
    pub graph: Arc<KnowledgeGraph>,
    pub emb: Arc<EmbeddingTable>,
    pub linker: Arc<dyn EntityLinker>,
    pub ltp: Arc<dyn LongTermPlanner>,
    pub stp: Arc<dyn ShortTermPlanner>,
    pub options: EngineOptions,
}

impl Engine {
    pub fn new(
        graph: Arc<KnowledgeGraph>,
        emb: Arc<EmbeddingTable>,
        linker: Arc<dyn EntityLinker>,
        ltp: Arc<dyn LongTermPlanner>,
        stp: Arc<dyn ShortTermPlanner>,
    ) -> Result<Self> {
        emb.check_graph(&graph)?;
        if graph.items().is_empty() {
            return Err(Error::domain("the graph has no items to recommend"));
        }
        Ok(Engine {
            graph,
            emb,
            linker,
            ltp,
            stp,
            options: EngineOptions::default(),
        })
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    /// Long-term target for the current state.
    pub fn ltp_target(&self, state: &DialogState) -> Result<EntityId> {
        let ranking = self.ltp.rank_items(&self.graph, &self.emb, &state.profile, &state.convo_entities)?;
        let pick = if self.options.mask_rejected {
            ranking.iter().copied().find(|e| !state.rejected.contains(e)).or(ranking.first().copied())
        } else {
            ranking.first().copied()
        };
        pick.ok_or_else(|| Error::domain("long-term planner returned no items"))
    }

    /// Handles one user message and returns the agent's action.
    pub fn step(&self, state: &mut DialogState, user_text: &str) -> Result<StepOutcome> {
        let g = &*self.graph;
        state.profile.validate(g)?;
        if let Some(last) = state.trace.last() {
            if last.action == ActionKind::Recommend && !state.rejected.contains(&last.stp_top) {
                state.rejected.push(last.stp_top);
            }
        }
        let linked = self.linker.link(g, &self.emb, user_text)?;
        for &e in &linked {
            g.check_entity(e)?;
            push_entity(&mut state.convo_entities, e);
        }
        let ltp_target = self.ltp_target(state)?;
        let history: Vec<EntityId> = state.profile.interactions.iter().map(|&(e, _)| e).collect();
        let query = StpQuery {
            utterance: user_text,
            context: &state.convo_entities,
            history: &history,
            target: ltp_target,
        };
        let stp_top = *self
            .stp
            .rank_entities(g, &self.emb, &query)?
            .first()
            .ok_or_else(|| Error::domain("short-term planner returned no entities"))?;
        let kind = decide(stp_top, ltp_target);
        let knowledge = knowledge_search(g, state.prev_grounding, stp_top)?;
        let response_text = render(g, kind, stp_top, state.prev_grounding, &knowledge);

        state.turns.push(SessionTurn {
            speaker: Speaker::User,
            text: user_text.to_string(),
            entities: linked.clone(),
        });
        state.turns.push(SessionTurn {
            speaker: Speaker::Agent,
            text: response_text.clone(),
            entities: vec![stp_top],
        });
        state.trace.push(TraceRecord {
            turn: state.trace.len(),
            user_text: user_text.to_string(),
            linked: linked.clone(),
            ltp_target,
            stp_top,
            action: kind,
            knowledge: knowledge.iter().map(|t| (t.head, t.rel.0, t.tail)).collect(),
            response: response_text.clone(),
        });
        push_entity(&mut state.convo_entities, stp_top);
        state.prev_grounding = Some(stp_top);
        Ok(StepOutcome {
            action: AgentAction {
                kind,
                entity: stp_top,
                knowledge,
                response_text,
            },
            linked,
            ltp_target,
            stp_top,
        })
    }
}
