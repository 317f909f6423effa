//! Score ranking with a deterministic tie-break, and negative sampling.

use rand::Rng;

use crate::kg::EntityId;

/// Ids ordered by descending score; equal scores by ascending id.
pub fn rank_desc(ids: &[EntityId], scores: &[f64]) -> Vec<EntityId> {
    let mut order: Vec<(EntityId, f64)> = ids.iter().copied().zip(scores.iter().copied()).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(e, _)| e).collect()
}

/// Highest-scoring id, the lowest id among ties.
pub fn argmax(ids: &[EntityId], scores: &[f64]) -> Option<EntityId> {
    let mut best: Option<(EntityId, f64)> = None;
    for (&e, &s) in ids.iter().zip(scores) {
        best = match best {
            Some((be, bs)) if bs > s || (bs == s && be < e) => Some((be, bs)),
            _ => Some((e, s)),
        };
    }
    best.map(|(e, _)| e)
}

/// Up to `n` distinct positions in `0..pool` other than `positive`, drawn
/// uniformly. When the pool has at most `n` other members all are returned
/// in ascending order.
pub fn sample_negatives(pool: usize, positive: usize, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    if pool <= n + 1 {
        return (0..pool).filter(|&i| i != positive).collect();
    }
    rand::seq::index::sample(rng, pool, n + 1)
        .into_iter()
        .filter(|&i| i != positive)
        .take(n)
        .collect()
}
