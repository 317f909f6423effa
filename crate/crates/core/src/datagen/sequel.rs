//! A rule-based long-term planning corpus: every user's next item is the
//! sequel of the last item in their history.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{GenConfig, KindSpec, RelationSpec};
use super::corpus::stream_rng;
use super::graph::gen_kg;
use crate::data::LtpExample;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Relation, RelationId, Triple};

pub const SEQUEL_RELATION: &str = "The sequel of";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequelConfig {
    pub n_movies: usize,
    pub n_types: usize,
    pub n_users: usize,
    pub profile_len: (usize, usize),
    pub time_range: (u64, u64),
    /// Fraction of users held out for testing.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for SequelConfig {
    fn default() -> Self {
        SequelConfig {
            n_movies: 100,
            n_types: 10,
            n_users: 1500,
            profile_len: (3, 10),
            time_range: (1_000_000, 2_000_000),
            holdout: 0.2,
            seed: 0,
        }
    }
}

pub struct SequelCorpus {
    pub graph: KnowledgeGraph,
    pub sequel: RelationId,
    pub train: Vec<LtpExample>,
    pub test: Vec<LtpExample>,
}

/// Builds the graph (movies with genres, grouped into series of two to five
/// films linked by the sequel relation) and the train/test examples. Each
/// user's latest item has a sequel, which is the target.
pub fn gen_sequel_corpus(cfg: &SequelConfig) -> Result<SequelCorpus> {
    if cfg.n_movies < 2 || cfg.profile_len.0 == 0 || cfg.profile_len.0 > cfg.profile_len.1 || !(0.0..1.0).contains(&cfg.holdout) {
        return Err(Error::Config("sequel corpus needs ≥ 2 movies, a valid profile range and holdout in [0, 1)".into()));
    }
    let base = gen_kg(&GenConfig {
        kinds: vec![
            KindSpec { name: "movie".into(), count: cfg.n_movies, item: true },
            KindSpec { name: "type".into(), count: cfg.n_types.max(1), item: false },
        ],
        relations: vec![RelationSpec {
            name: "The type of".into(),
            head: "movie".into(),
            tail: "type".into(),
            degree: 1.0,
            inverse_of: None,
        }],
        communities: 1,
        seed: cfg.seed,
        ..GenConfig::desk()
    })?;
    let mut rng = stream_rng(cfg.seed, 9, 0);
    let mut order: Vec<EntityId> = base.items().to_vec();
    order.shuffle(&mut rng);
    let sequel = RelationId(base.num_relations() as u32);
    let mut relations = base.relations().to_vec();
    relations.push(Relation { id: sequel, name: SEQUEL_RELATION.into() });
    let mut triples = base.triples().to_vec();
    let mut next: Vec<Option<EntityId>> = vec![None; base.num_entities()];
    let mut rest = &order[..];
    while rest.len() >= 2 {
        let len = rng.random_range(2..=4).min(rest.len());
        let len = if rest.len() - len == 1 { len + 1 } else { len };
        let (series, tail) = rest.split_at(len);
        for w in series.windows(2) {
            triples.push(Triple::new(w[0], sequel, w[1]));
            next[w[0].index()] = Some(w[1]);
        }
        rest = tail;
    }
    let with_sequel: Vec<EntityId> = order.iter().copied().filter(|e| next[e.index()].is_some()).collect();
    let graph = KnowledgeGraph::new(base.entities().to_vec(), relations, triples)?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for u in 0..cfg.n_users {
        let mut rng = stream_rng(cfg.seed, 10, u as u64);
        let len = rng.random_range(cfg.profile_len.0..=cfg.profile_len.1);
        let mut ts: Vec<u64> = Vec::new();
        while ts.len() < len {
            ts.push(rng.random_range(cfg.time_range.0..=cfg.time_range.1));
            ts.sort_unstable();
            ts.dedup();
        }
        let mut profile: Vec<(EntityId, u64)> = ts.into_iter().map(|t| (*graph.items().choose(&mut rng).expect("items"), t)).collect();
        let last = *with_sequel.choose(&mut rng).expect("at least one series");
        profile.last_mut().expect("non-empty").0 = last;
        let ex = LtpExample {
            user_id: format!("s{u:05}"),
            profile,
            context_entities: Vec::new(),
            target: next[last.index()].expect("has a sequel"),
        };
        if rng.random_bool(cfg.holdout) {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    Ok(SequelCorpus { graph, sequel, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_is_the_unique_sequel_of_the_last_item() {
        let c = gen_sequel_corpus(&SequelConfig { n_users: 50, ..SequelConfig::default() }).unwrap();
        for ex in c.train.iter().chain(&c.test) {
            let last = ex.profile.last().unwrap().0;
            let tails: Vec<EntityId> = c
                .graph
                .outgoing(last)
                .iter()
                .map(|&p| c.graph.triples()[p])
                .filter(|t| t.rel == c.sequel)
                .map(|t| t.tail)
                .collect();
            assert_eq!(tails, vec![ex.target]);
            assert!(c.graph.is_item(ex.target));
        }
        assert!(!c.test.is_empty() && !c.train.is_empty());
    }
}
