//! On-disk record types shared by the generator, the trainers and the
//! evaluation harness, plus JSON-lines helpers.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};

/// A user's timestamped interaction history.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    /// `(entity, timestamp)` pairs with non-decreasing timestamps.
    pub interactions: Vec<(EntityId, u64)>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>, interactions: Vec<(EntityId, u64)>) -> Self {
        UserProfile {
            user_id: user_id.into(),
            interactions,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn validate(&self, g: &KnowledgeGraph) -> Result<()> {
        for (i, &(e, t)) in self.interactions.iter().enumerate() {
            g.check_entity(e)?;
            if i > 0 && t < self.interactions[i - 1].1 {
                return Err(Error::domain(format!("profile of {} has decreasing timestamps at {i}", self.user_id)));
            }
        }
        Ok(())
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.interactions.last().map(|&(_, t)| t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub speaker: Speaker,
    pub text: String,
    /// Entities named in the text; for agent turns the grounding comes first.
    pub entities: Vec<EntityId>,
    pub grounding: Option<EntityId>,
    pub is_recommendation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    pub dialog_id: String,
    pub user_id: String,
    pub turns: Vec<DialogTurn>,
}

impl Dialog {
    /// The recommended item, read from the recommendation turn.
    pub fn target(&self) -> Result<EntityId> {
        self.turns
            .iter()
            .find(|t| t.is_recommendation)
            .and_then(|t| t.grounding)
            .ok_or_else(|| Error::Data {
                dialog: self.dialog_id.clone(),
                message: "no recommendation turn with a grounding".into(),
            })
    }

    /// Agent groundings in turn order.
    pub fn groundings(&self) -> Vec<EntityId> {
        self.turns.iter().filter_map(|t| t.grounding).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// One long-term planner training example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LtpExample {
    pub user_id: String,
    pub profile: Vec<(EntityId, u64)>,
    pub context_entities: Vec<EntityId>,
    pub target: EntityId,
}

/// One short-term planner training example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StpExample {
    pub utterance: String,
    pub context_entities: Vec<EntityId>,
    pub target: EntityId,
    pub gold_grounding: EntityId,
}

/// An utterance paired with one entity it mentions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPair {
    pub utterance: String,
    pub entity: EntityId,
}

/// Appends `e` to a mention-ordered entity list. A re-mentioned entity is
/// moved to the end instead of being duplicated.
pub fn push_entity(list: &mut Vec<EntityId>, e: EntityId) {
    list.retain(|&x| x != e);
    list.push(e);
}

/// Teacher-forced view of one agent turn of a recorded dialog.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentTurnContext {
    /// Index of the agent turn within `Dialog::turns`.
    pub turn: usize,
    /// Text of the latest user turn before it (empty if none).
    pub utterance: String,
    /// Conversation entities mentioned so far, in mention order.
    pub context: Vec<EntityId>,
    pub prev_grounding: Option<EntityId>,
    pub grounding: EntityId,
    pub is_recommendation: bool,
    /// The recorded agent text.
    pub reference: String,
}

impl Dialog {
    /// Replays the dialog and returns the gold context of every agent turn.
    ///
    /// User-turn entities are appended in mention order and every agent
    /// grounding is appended after its turn, mirroring a live session.
    pub fn agent_contexts(&self) -> Result<Vec<AgentTurnContext>> {
        let mut ctx = Vec::new();
        let mut utterance = String::new();
        let mut prev = None;
        let mut out = Vec::new();
        for (i, t) in self.turns.iter().enumerate() {
            match t.speaker {
                Speaker::User => {
                    for &e in &t.entities {
                        push_entity(&mut ctx, e);
                    }
                    utterance = t.text.clone();
                }
                Speaker::Agent => {
                    let grounding = t.grounding.ok_or_else(|| Error::Data {
                        dialog: self.dialog_id.clone(),
                        message: format!("agent turn {i} has no grounding"),
                    })?;
                    out.push(AgentTurnContext {
                        turn: i,
                        utterance: utterance.clone(),
                        context: ctx.clone(),
                        prev_grounding: prev,
                        grounding,
                        is_recommendation: t.is_recommendation,
                        reference: t.text.clone(),
                    });
                    push_entity(&mut ctx, grounding);
                    prev = Some(grounding);
                }
            }
        }
        Ok(out)
    }

    /// Long-term planner examples: every agent turn paired with the dialog's target.
    pub fn ltp_examples(&self, profile: &UserProfile) -> Result<Vec<LtpExample>> {
        let target = self.target()?;
        Ok(self
            .agent_contexts()?
            .into_iter()
            .map(|c| LtpExample {
                user_id: self.user_id.clone(),
                profile: profile.interactions.clone(),
                context_entities: c.context,
                target,
            })
            .collect())
    }

    /// Short-term planner examples: every agent turn with its gold grounding.
    pub fn stp_examples(&self) -> Result<Vec<StpExample>> {
        let target = self.target()?;
        Ok(self
            .agent_contexts()?
            .into_iter()
            .map(|c| StpExample {
                utterance: c.utterance,
                context_entities: c.context,
                target,
                gold_grounding: c.grounding,
            })
            .collect())
    }

    /// Entity-linking pairs from the user turns.
    pub fn link_pairs(&self) -> Vec<LinkPair> {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .flat_map(|t| {
                t.entities.iter().map(|&e| LinkPair {
                    utterance: t.text.clone(),
                    entity: e,
                })
            })
            .collect()
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one record per non-empty line, reporting the line number on failure.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
