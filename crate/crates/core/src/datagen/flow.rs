use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};

/// A shortest undirected path towards `target` from a random start whose
/// hop distance lies in `len_range`. The last element is `target`.
pub fn build_flow(g: &KnowledgeGraph, target: EntityId, len_range: (usize, usize), rng: &mut impl Rng) -> Result<Vec<EntityId>> {
    let (lo, hi) = len_range;
    if lo < 2 || lo > hi {
        return Err(Error::Config(format!("flow length range ({lo}, {hi}) must satisfy 2 ≤ min ≤ max")));
    }
    let dist = g.bfs_distances(target)?;
    let starts: Vec<EntityId> = (0..g.num_entities() as u32)
        .map(EntityId)
        .filter(|e| dist[e.index()].is_some_and(|d| (lo..=hi).contains(&d)))
        .collect();
    let Some(&start) = starts.choose(rng) else {
        return Err(Error::Generation(format!(
            "no entity lies {lo}..={hi} hops from target {}",
            g.name(target)
        )));
    };
    let mut flow = vec![start];
    let mut cur = start;
    while cur != target {
        cur = g.next_hop_with(&dist, cur)?.expect("reachable entity has a next hop");
        flow.push(cur);
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::random_graph;
    use crate::kg::{EntityKind, GraphBuilder};
    use rand::SeedableRng;

    #[test]
    fn chain_flow() {
        let mut b = GraphBuilder::new();
        let ids: Vec<_> = ["A", "B", "C", "D"].iter().map(|n| b.add_entity(*n, EntityKind::Item).unwrap()).collect();
        let r = b.add_relation("r").unwrap();
        for w in ids.windows(2) {
            b.add_triple(w[0], r, w[1]).unwrap();
        }
        let g = b.build();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert_eq!(build_flow(&g, ids[3], (3, 3), &mut rng).unwrap(), ids);
        assert!(matches!(build_flow(&g, ids[3], (0, 0), &mut rng), Err(Error::Config(_))));
        assert!(matches!(build_flow(&g, ids[3], (4, 6), &mut rng), Err(Error::Generation(_))));
    }

    #[test]
    fn random_flows_are_simple_adjacent_paths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for seed in 0..50 {
            let g = random_graph(30, 2, 45, seed);
            let target = EntityId(rng.random_range(0..30));
            let Ok(flow) = build_flow(&g, target, (2, 4), &mut rng) else { continue };
            assert_eq!(*flow.last().unwrap(), target);
            assert!((3..=5).contains(&flow.len()));
            for w in flow.windows(2) {
                assert!(g.adjacent(w[0], w[1]));
            }
            let mut uniq = flow.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), flow.len());
        }
    }
}
