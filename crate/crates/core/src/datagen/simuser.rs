use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::templates::*;
use crate::dialog::{ActionKind, AgentAction};
use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph};

/// A scripted user with a hidden target who steers the conversation towards it.
#[derive(Clone, Debug)]
pub struct SimulatedUser {
    pub target: EntityId,
    /// Items and attributes the user likes; always contains `target`.
    pub preferred: Vec<EntityId>,
    /// Probability of mentioning a random preferred entity instead of steering.
    pub chattiness: f64,
    /// Probability of asking for a suggestion once next to the target.
    pub request_prob: f64,
    dist: Vec<Option<usize>>,
    rng: ChaCha8Rng,
}

/// A simulated user turn.
#[derive(Clone, Debug, PartialEq)]
pub struct UserReply {
    pub text: String,
    /// Entities named in `text`, in order.
    pub mentioned: Vec<EntityId>,
    pub accepted: bool,
}

impl SimulatedUser {
    pub fn new(g: &KnowledgeGraph, target: EntityId, mut preferred: Vec<EntityId>, chattiness: f64, request_prob: f64, seed: u64) -> Result<Self> {
        if !preferred.contains(&target) {
            preferred.push(target);
        }
        preferred.sort_unstable();
        Ok(SimulatedUser {
            target,
            preferred,
            chattiness,
            request_prob,
            dist: g.bfs_distances(target)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn distance(&self, e: EntityId) -> Option<usize> {
        self.dist.get(e.index()).copied().flatten()
    }

    /// The first user turn: a preferred entity a few hops from the target.
    pub fn opening(&mut self, g: &KnowledgeGraph) -> UserReply {
        let far: Vec<EntityId> = self.preferred.iter().copied().filter(|&e| self.distance(e).is_some_and(|d| d >= 2)).collect();
        let near: Vec<EntityId> = self.preferred.iter().copied().filter(|&e| e != self.target).collect();
        match far.choose(&mut self.rng).or_else(|| near.choose(&mut self.rng)).copied() {
            Some(o) => UserReply {
                text: fill(USER_OPEN, &mut self.rng, g.name(o), ""),
                mentioned: vec![o],
                accepted: false,
            },
            None => UserReply {
                text: fill(USER_OPEN_BLANK, &mut self.rng, "", ""),
                mentioned: Vec::new(),
                accepted: false,
            },
        }
    }

    fn mention(&mut self, g: &KnowledgeGraph, e: EntityId, mut prefix: Vec<String>, mut mentioned: Vec<EntityId>) -> UserReply {
        prefix.push(fill(USER_ECHO, &mut self.rng, g.name(e), ""));
        mentioned.push(e);
        if self.distance(e).is_some_and(|d| d <= 1) && self.rng.random_bool(self.request_prob) {
            prefix.push(fill(USER_REQUEST, &mut self.rng, "", ""));
        }
        UserReply {
            text: prefix.join(" "),
            mentioned,
            accepted: false,
        }
    }

    /// Reacts to an agent action.
    ///
    /// Recommending the target is accepted. Any other recommendation is
    /// rejected with a pointer to a neighbour of the target. A grounding is
    /// answered by mentioning the next entity on a shortest path to the
    /// target, or, with probability `chattiness`, a random preferred entity.
    pub fn respond(&mut self, g: &KnowledgeGraph, action: &AgentAction) -> Result<UserReply> {
        let e = action.entity;
        match action.kind {
            ActionKind::Recommend if e == self.target => Ok(UserReply {
                text: fill(USER_ACCEPT, &mut self.rng, g.name(e), ""),
                mentioned: vec![e],
                accepted: true,
            }),
            ActionKind::Recommend => {
                let reject = fill(USER_REJECT, &mut self.rng, g.name(e), "");
                let around: Vec<EntityId> = g.neighbors(self.target)?.into_iter().map(|(x, _)| x).collect();
                let hint = around.choose(&mut self.rng).copied().unwrap_or(self.target);
                Ok(self.mention(g, hint, vec![reject], vec![e]))
            }
            ActionKind::Ground => {
                if e == self.target {
                    return Ok(self.mention(g, e, Vec::new(), Vec::new()));
                }
                let step = g.next_hop_with(&self.dist, e)?;
                let next = match step {
                    Some(n) if !self.rng.random_bool(self.chattiness) => n,
                    _ => {
                        let others: Vec<EntityId> = self.preferred.iter().copied().filter(|&x| x != e).collect();
                        others.choose(&mut self.rng).copied().unwrap_or(self.target)
                    }
                };
                Ok(self.mention(g, next, Vec::new(), Vec::new()))
            }
        }
    }
}

/// Free-function form of [`SimulatedUser::respond`]; returns the text and whether the action was accepted.
pub fn simulate_user(su: &mut SimulatedUser, g: &KnowledgeGraph, action: &AgentAction) -> Result<(String, bool)> {
    su.respond(g, action).map(|r| (r.text, r.accepted))
}
