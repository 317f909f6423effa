use serde::{Deserialize, Serialize};

use crate::data::UserProfile;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};

/// Where a sequence entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Profile,
    Conversation,
}

/// Timestamp given to entities mentioned in the current conversation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsMode {
    /// Zero, taken literally.
    LiteralZero,
    /// One second after the latest profile interaction.
    #[default]
    Now,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqEntry {
    pub entity: EntityId,
    pub ts: u64,
    pub provenance: Provenance,
}

/// A left-padded sequence of timestamped entities; `None` is padding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEntitySeq {
    pub entries: Vec<Option<SeqEntry>>,
}

impl TimedEntitySeq {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.entries.iter().map(Option::is_some).collect()
    }

    /// Timestamps with zero at padded positions.
    pub fn timestamps(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.map_or(0, |e| e.ts)).collect()
    }

    pub fn real(&self) -> impl Iterator<Item = &SeqEntry> {
        self.entries.iter().flatten()
    }

    pub fn num_real(&self) -> usize {
        self.real().count()
    }

    /// Real entities of the given provenance, in sequence order.
    pub fn entities_from(&self, provenance: Provenance) -> Vec<EntityId> {
        self.real().filter(|e| e.provenance == provenance).map(|e| e.entity).collect()
    }
}

/// Profile interactions followed by conversation mentions, truncated to the
/// newest `n` entries (oldest profile entries go first) and left-padded.
pub fn build_sequence(g: &KnowledgeGraph, profile: &UserProfile, convo: &[EntityId], n: usize, ts_mode: TsMode) -> Result<TimedEntitySeq> {
    if n == 0 {
        return Err(Error::domain("sequence length must be at least 1"));
    }
    for &(e, _) in &profile.interactions {
        g.check_entity(e)?;
    }
    for &e in convo {
        g.check_entity(e)?;
    }
    let convo_ts = match ts_mode {
        TsMode::LiteralZero => 0,
        TsMode::Now => profile.last_timestamp().map_or(0, |t| t + 1),
    };
    let convo_keep = convo.len().min(n);
    let profile_keep = profile.interactions.len().min(n - convo_keep);
    let mut entries: Vec<Option<SeqEntry>> = vec![None; n - convo_keep - profile_keep];
    entries.extend(profile.interactions[profile.interactions.len() - profile_keep..].iter().map(|&(entity, ts)| {
        Some(SeqEntry {
            entity,
            ts,
            provenance: Provenance::Profile,
        })
    }));
    entries.extend(convo[convo.len() - convo_keep..].iter().map(|&entity| {
        Some(SeqEntry {
            entity,
            ts: convo_ts,
            provenance: Provenance::Conversation,
        })
    }));
    Ok(TimedEntitySeq { entries })
}
