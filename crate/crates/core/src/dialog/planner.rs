use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::UserProfile;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::ltp::{ltp_predict, LtpModel};
use crate::stp::{link_entities, stp_predict, LinkerModel, StpModel, StpQuery, StpVariant};

/// Maps user text to knowledge-graph entities.
pub trait EntityLinker: Send + Sync {
    fn link(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, text: &str) -> Result<Vec<EntityId>>;
}

/// Ranks Items as the eventual recommendation.
pub trait LongTermPlanner: Send + Sync {
    fn rank_items(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, profile: &UserProfile, convo: &[EntityId]) -> Result<Vec<EntityId>>;
}

/// Ranks every entity as the next grounding.
pub trait ShortTermPlanner: Send + Sync {
    fn rank_entities(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, query: &StpQuery<'_>) -> Result<Vec<EntityId>>;
}

impl EntityLinker for LinkerModel {
    fn link(&self, _g: &KnowledgeGraph, emb: &EmbeddingTable, text: &str) -> Result<Vec<EntityId>> {
        Ok(link_entities(self, emb, text, self.top_k))
    }
}

/// Exact name matching only.
pub struct LexicalLinker(LinkerModel);

impl LexicalLinker {
    pub fn new(g: &KnowledgeGraph, d: usize) -> Self {
        let enc = crate::stp::UtteranceEncoder::new(vec![crate::stp::UNK.to_string()], d, &mut ChaCha8Rng::seed_from_u64(0));
        LexicalLinker(LinkerModel::new(g, enc, f64::INFINITY, 0))
    }
}

impl EntityLinker for LexicalLinker {
    fn link(&self, _g: &KnowledgeGraph, _emb: &EmbeddingTable, text: &str) -> Result<Vec<EntityId>> {
        Ok(self.0.lexical_matches(text))
    }
}

impl LongTermPlanner for LtpModel {
    /// A conversation with no entities yet and an empty profile has no
    /// evidence; every item then scores zero and ties keep id order.
    fn rank_items(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, profile: &UserProfile, convo: &[EntityId]) -> Result<Vec<EntityId>> {
        if profile.is_empty() && convo.is_empty() {
            return Ok(g.items().to_vec());
        }
        let seq = self.sequence(g, profile, convo)?;
        Ok(ltp_predict(self, g, emb, &seq)?.1)
    }
}

impl ShortTermPlanner for StpModel {
    fn rank_entities(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, query: &StpQuery<'_>) -> Result<Vec<EntityId>> {
        Ok(stp_predict(self, g, emb, query)?.1)
    }
}

/// A short-term planner restricted to one ablation variant.
pub struct VariantStp {
    pub model: StpModel,
}

impl VariantStp {
    pub fn new(mut model: StpModel, variant: StpVariant) -> Self {
        model.config.variant = variant;
        VariantStp { model }
    }
}

impl ShortTermPlanner for VariantStp {
    fn rank_entities(&self, g: &KnowledgeGraph, emb: &EmbeddingTable, query: &StpQuery<'_>) -> Result<Vec<EntityId>> {
        self.model.rank_entities(g, emb, query)
    }
}

fn hashed_rng(seed: u64, parts: impl Hash) -> ChaCha8Rng {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    parts.hash(&mut h);
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Uniformly random grounding; the permutation is a pure function of the
/// seed and the query.
pub struct RandomGrounding {
    pub seed: u64,
}

impl ShortTermPlanner for RandomGrounding {
    fn rank_entities(&self, g: &KnowledgeGraph, _emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<Vec<EntityId>> {
        let mut all: Vec<EntityId> = g.entities().iter().map(|e| e.id).collect();
        all.shuffle(&mut hashed_rng(self.seed, (q.utterance, q.context, q.target)));
        Ok(all)
    }
}

/// Uniformly random item ranking, a pure function of the seed and inputs.
pub struct RandomTarget {
    pub seed: u64,
}

impl LongTermPlanner for RandomTarget {
    fn rank_items(&self, g: &KnowledgeGraph, _emb: &EmbeddingTable, profile: &UserProfile, convo: &[EntityId]) -> Result<Vec<EntityId>> {
        let mut items = g.items().to_vec();
        items.shuffle(&mut hashed_rng(self.seed, (&profile.user_id, convo)));
        Ok(items)
    }
}

/// Knows every user's true target.
pub struct OracleTarget {
    pub targets: HashMap<String, EntityId>,
}

impl LongTermPlanner for OracleTarget {
    fn rank_items(&self, g: &KnowledgeGraph, _emb: &EmbeddingTable, profile: &UserProfile, _convo: &[EntityId]) -> Result<Vec<EntityId>> {
        let t = *self
            .targets
            .get(&profile.user_id)
            .ok_or_else(|| Error::domain(format!("no target known for user {}", profile.user_id)))?;
        let mut out = vec![t];
        out.extend(g.items().iter().copied().filter(|&e| e != t));
        Ok(out)
    }
}

/// Walks a shortest path from the latest mentioned entity to the target.
pub struct OracleGrounding;

impl ShortTermPlanner for OracleGrounding {
    fn rank_entities(&self, g: &KnowledgeGraph, _emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<Vec<EntityId>> {
        let first = match q.context.last() {
            Some(&e) if e != q.target => g.next_hop(e, q.target)?.unwrap_or(q.target),
            _ => q.target,
        };
        let mut out = vec![first];
        out.extend(g.entities().iter().map(|e| e.id).filter(|&e| e != first));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::random_graph;

    fn emb(n: usize) -> EmbeddingTable {
        EmbeddingTable::new(crate::nn::Tensor2::zeros(n, 4), crate::nn::Tensor2::zeros(4, 4), crate::kge::NormKind::L2).unwrap()
    }

    #[test]
    fn random_planners_are_deterministic_permutations() {
        let g = random_graph(30, 3, 60, 1);
        let e = emb(30);
        let p = RandomGrounding { seed: 3 };
        let q = StpQuery {
            utterance: "hello",
            context: &[EntityId(2)],
            history: &[],
            target: EntityId(1),
        };
        let a = p.rank_entities(&g, &e, &q).unwrap();
        assert_eq!(a, p.rank_entities(&g, &e, &q).unwrap());
        let mut s = a.clone();
        s.sort_unstable();
        assert_eq!(s, (0..30).map(EntityId).collect::<Vec<_>>());
        let prof = UserProfile::new("u", vec![]);
        let r = RandomTarget { seed: 1 }.rank_items(&g, &e, &prof, &[]).unwrap();
        assert_eq!(r.len(), g.items().len());
    }

    #[test]
    fn oracle_grounding_steps_towards_target() {
        let g = random_graph(30, 3, 60, 2);
        let e = emb(30);
        let target = EntityId(7);
        let dist = g.bfs_distances(target).unwrap();
        for s in 0..30u32 {
            let ctx = [EntityId(s)];
            let q = StpQuery {
                utterance: "",
                context: &ctx,
                history: &[],
                target,
            };
            let top = OracleGrounding.rank_entities(&g, &e, &q).unwrap()[0];
            match dist[s as usize] {
                Some(d) if d > 0 => assert_eq!(dist[top.index()], Some(d - 1)),
                _ => assert_eq!(top, target),
            }
        }
    }
}
