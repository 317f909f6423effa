use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::data::UserProfile;
use crate::datagen::{cluster_profile, preferred_entities, SimulatedUser};
use crate::dialog::{ActionKind, DialogState, Engine};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractiveConfig {
    pub n_users: usize,
    pub max_turns: usize,
    pub chattiness: f64,
    pub request_prob: f64,
    /// Target selection, as in corpus generation.
    pub clusters: usize,
    pub tau_rec: f64,
    pub seed: u64,
}

impl Default for InteractiveConfig {
    fn default() -> Self {
        let g = crate::datagen::GenConfig::desk();
        InteractiveConfig {
            n_users: 200,
            max_turns: 10,
            chattiness: g.chattiness,
            request_prob: g.request_prob,
            clusters: g.clusters,
            tau_rec: g.tau_rec,
            seed: 0,
        }
    }
}

/// A simulated user's profile, hidden target and preferred entities.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub profile: UserProfile,
    pub target: EntityId,
    pub preferred: Vec<EntityId>,
}

/// One episode per user slot, cycling through `profiles`.
pub fn episodes(g: &KnowledgeGraph, emb: &EmbeddingTable, profiles: &[UserProfile], cfg: &InteractiveConfig) -> Result<Vec<Episode>> {
    if profiles.is_empty() && cfg.n_users > 0 {
        return Err(Error::domain("interactive evaluation needs at least one profile"));
    }
    (0..cfg.n_users)
        .map(|i| {
            let profile = profiles[i % profiles.len()].clone();
            let t_now = profile.last_timestamp().unwrap_or(0) + 1;
            let clusters = cluster_profile(&profile, emb, cfg.clusters, cfg.tau_rec, t_now)?;
            let preferred = preferred_entities(g, &clusters[0])?;
            Ok(Episode {
                target: clusters[0].medoid,
                profile,
                preferred,
            })
        })
        .collect()
}

/// Result of one simulated conversation.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Agent turns taken.
    pub turns: usize,
    pub recommendations: usize,
    pub state: DialogState,
}

pub fn run_episode(engine: &Engine, ep: &Episode, cfg: &InteractiveConfig, index: usize) -> Result<EpisodeOutcome> {
    let g = &*engine.graph;
    let seed = cfg.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut user = SimulatedUser::new(g, ep.target, ep.preferred.clone(), cfg.chattiness, cfg.request_prob, seed)?;
    let mut state = DialogState::new(format!("sim{index:05}"), ep.profile.clone());
    let mut reply = user.opening(g);
    let mut recommendations = 0;
    for turn in 0..cfg.max_turns {
        let out = engine.step(&mut state, &reply.text)?;
        if out.action.kind == ActionKind::Recommend {
            recommendations += 1;
        }
        reply = user.respond(g, &out.action)?;
        if reply.accepted {
            return Ok(EpisodeOutcome {
                success: true,
                turns: turn + 1,
                recommendations,
                state,
            });
        }
    }
    Ok(EpisodeOutcome {
        success: false,
        turns: cfg.max_turns,
        recommendations,
        state,
    })
}

/// Success rate, mean turns to success and recommendation precision over
/// simulated users.
pub fn eval_interactive(engine: &Engine, episodes: &[Episode], cfg: &InteractiveConfig) -> Result<EvalReport> {
    let mut successes = 0usize;
    let mut success_turns = 0usize;
    let mut recs = 0usize;
    let mut total_turns = 0usize;
    for (i, ep) in episodes.iter().enumerate() {
        let o = run_episode(engine, ep, cfg, i)?;
        if o.success {
            successes += 1;
            success_turns += o.turns;
        }
        recs += o.recommendations;
        total_turns += o.turns;
    }
    let n = episodes.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let metrics = BTreeMap::from([
        ("success_rate".to_string(), ratio(successes, n)),
        ("mean_turns_to_success".to_string(), ratio(success_turns, successes)),
        ("rec_precision".to_string(), ratio(successes, recs)),
        ("mean_turns".to_string(), ratio(total_turns, n)),
    ]);
    EvalReport::new("interactive", metrics, n)
}
