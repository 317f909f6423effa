use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GenConfig;
use super::names::NameFactory;
use crate::error::{Error, Result};
use crate::kg::{EntityId, EntityKind, GraphBuilder, KnowledgeGraph, RelationId};

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Generates a connected knowledge graph following `cfg`'s schema.
///
/// Entities of each kind are spread round-robin over `cfg.communities`
/// latent communities; a sampled tail shares its head's community with
/// probability `cfg.homophily`. Components left disconnected are bridged
/// afterwards with extra schema-consistent triples.
pub fn gen_kg(cfg: &GenConfig) -> Result<KnowledgeGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut names = NameFactory::new();
    let mut b = GraphBuilder::new();
    let mut by_kind: HashMap<&str, Vec<EntityId>> = HashMap::new();
    let mut community = Vec::new();
    for k in &cfg.kinds {
        let kind = if k.item { EntityKind::Item } else { EntityKind::Attribute };
        for i in 0..k.count {
            let id = b.add_entity(names.name(&k.name, i, &mut rng), kind)?;
            by_kind.entry(&k.name).or_default().push(id);
            community.push(i % cfg.communities);
        }
    }
    let mut rel_ids: HashMap<&str, RelationId> = HashMap::new();
    for r in &cfg.relations {
        rel_ids.insert(&r.name, b.add_relation(r.name.clone())?);
    }

    for spec in cfg.relations.iter().filter(|r| r.inverse_of.is_none()) {
        let rid = rel_ids[spec.name.as_str()];
        let heads = by_kind[spec.head.as_str()].clone();
        let tails = &by_kind[spec.tail.as_str()];
        let whole = spec.degree.floor() as usize;
        let frac = spec.degree - spec.degree.floor();
        for h in heads {
            let n = whole + usize::from(rng.random_bool(frac));
            let same: Vec<EntityId> = tails
                .iter()
                .copied()
                .filter(|t| community[t.index()] == community[h.index()] && *t != h)
                .collect();
            for _ in 0..n {
                for _ in 0..10 {
                    let pool = if !same.is_empty() && rng.random_bool(cfg.homophily) { &same } else { tails };
                    let t = *pool.choose(&mut rng).expect("non-empty kind");
                    if t != h && b.add_triple(h, rid, t)? {
                        break;
                    }
                }
            }
        }
    }
    add_inverses(cfg, &mut b, &rel_ids, 0)?;

    // Bridge components until the graph is connected.
    loop {
        let n = b.num_entities();
        let mut uf = UnionFind((0..n).collect());
        for t in b.triples() {
            uf.union(t.head.index(), t.tail.index());
        }
        let main = uf.find(0);
        let Some(stray) = (0..n).find(|&i| uf.find(i) != main) else {
            break;
        };
        let root = uf.find(stray);
        let kind_of = |e: usize| -> &str { kind_name(cfg, e) };
        let in_comp: Vec<usize> = (0..n).filter(|&i| uf.find(i) == root).collect();
        let in_main: Vec<usize> = (0..n).filter(|&i| uf.find(i) == main).collect();
        let before = b.triples().len();
        for spec in cfg.relations.iter().filter(|r| r.inverse_of.is_none()) {
            let pick = |side: &[usize], kind: &str, rng: &mut ChaCha8Rng| {
                let c: Vec<usize> = side.iter().copied().filter(|&e| kind_of(e) == kind).collect();
                c.choose(rng).copied()
            };
            let rid = rel_ids[spec.name.as_str()];
            let forward = (pick(&in_comp, &spec.head, &mut rng), pick(&in_main, &spec.tail, &mut rng));
            let pair = match forward {
                (Some(h), Some(t)) => Some((h, t)),
                _ => match (pick(&in_main, &spec.head, &mut rng), pick(&in_comp, &spec.tail, &mut rng)) {
                    (Some(h), Some(t)) => Some((h, t)),
                    _ => None,
                },
            };
            if let Some((h, t)) = pair {
                b.add_triple(EntityId(h as u32), rid, EntityId(t as u32))?;
                break;
            }
        }
        if b.triples().len() == before {
            return Err(Error::Config(format!(
                "no relation can connect `{}` entities to the rest of the graph",
                kind_of(stray)
            )));
        }
        add_inverses(cfg, &mut b, &rel_ids, before)?;
    }
    Ok(b.build())
}

fn kind_name(cfg: &GenConfig, e: usize) -> &str {
    let mut acc = 0;
    for k in &cfg.kinds {
        acc += k.count;
        if e < acc {
            return &k.name;
        }
    }
    unreachable!("entity index beyond configured kinds")
}

/// Mirrors every triple from position `from` onward into its inverse relations.
fn add_inverses(cfg: &GenConfig, b: &mut GraphBuilder, rel_ids: &HashMap<&str, RelationId>, from: usize) -> Result<()> {
    let new: Vec<_> = b.triples()[from..].to_vec();
    for spec in cfg.relations.iter() {
        let Some(base) = &spec.inverse_of else { continue };
        let (base_id, inv_id) = (rel_ids[base.as_str()], rel_ids[spec.name.as_str()]);
        for t in new.iter().filter(|t| t.rel == base_id) {
            b.add_triple(t.tail, inv_id, t.head)?;
        }
    }
    Ok(())
}
