use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An entity kind and how many entities of it to create.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSpec {
    pub name: String,
    pub count: usize,
    /// Items are recommendable; everything else is an attribute.
    #[serde(default)]
    pub item: bool,
}

/// A relation between two kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub head: String,
    pub tail: String,
    /// Expected number of tails per head entity.
    #[serde(default)]
    pub degree: f64,
    /// When set, this relation is the exact reverse of the named one and
    /// `degree` is ignored.
    #[serde(default)]
    pub inverse_of: Option<String>,
}

/// Every knob of the synthetic pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub kinds: Vec<KindSpec>,
    pub relations: Vec<RelationSpec>,
    /// Number of latent taste communities entities are assigned to.
    pub communities: usize,
    /// Probability that a sampled tail shares the head's community.
    pub homophily: f64,
    pub n_users: usize,
    pub profile_len: (usize, usize),
    pub time_range: (u64, u64),
    pub n_dialogs: usize,
    /// Allowed hop distance between a flow's first grounding and its target.
    pub flow_len: (usize, usize),
    /// `k` of the k-medoids clustering used to pick targets.
    pub clusters: usize,
    /// Recency scale of cluster significance, in timestamp units.
    pub tau_rec: f64,
    /// Train/valid/test proportions.
    pub split: (f64, f64, f64),
    /// Probability that a user turn also mentions an off-path entity.
    pub chattiness: f64,
    /// Probability that the user asks for a suggestion once the conversation
    /// reaches an entity adjacent to their target.
    pub request_prob: f64,
    /// Probability of asking for a suggestion on any other turn.
    pub spurious_request_prob: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::desk()
    }
}

fn kind(name: &str, count: usize, item: bool) -> KindSpec {
    KindSpec {
        name: name.into(),
        count,
        item,
    }
}

fn rel(name: &str, head: &str, tail: &str, degree: f64) -> RelationSpec {
    RelationSpec {
        name: name.into(),
        head: head.into(),
        tail: tail.into(),
        degree,
        inverse_of: None,
    }
}

fn inverse(name: &str, of: &RelationSpec) -> RelationSpec {
    RelationSpec {
        name: name.into(),
        head: of.tail.clone(),
        tail: of.head.clone(),
        degree: 0.0,
        inverse_of: Some(of.name.clone()),
    }
}

impl GenConfig {
    /// Desk-scale default: 200 entities, 5 relations, about 600 triples.
    pub fn desk() -> Self {
        let actors = rel("The main actors of", "movie", "star", 1.5);
        let star = inverse("Star", &actors);
        GenConfig {
            kinds: vec![
                kind("movie", 100, true),
                kind("star", 60, false),
                kind("type", 12, false),
                kind("keyword", 28, false),
            ],
            relations: vec![
                actors,
                star,
                rel("The director of", "movie", "star", 1.0),
                rel("The type of", "movie", "type", 1.0),
                rel("The key words of", "movie", "keyword", 1.0),
            ],
            communities: 6,
            homophily: 0.85,
            n_users: 1000,
            profile_len: (8, 20),
            time_range: (1_000_000, 2_000_000),
            n_dialogs: 1000,
            flow_len: (3, 7),
            clusters: 3,
            tau_rec: 50_000.0,
            split: (0.8, 0.1, 0.1),
            chattiness: 0.2,
            request_prob: 0.9,
            spurious_request_prob: 0.05,
            seed: 0,
        }
    }

    /// The full entity/relation schema of the movie knowledge graph, with
    /// counts divided by `scale`.
    pub fn table1(scale: usize) -> Self {
        let s = |n: usize| (n / scale.max(1)).max(2);
        let d = |n: usize, heads: usize| n as f64 / heads as f64;
        let movies = 5733;
        let stars = 2920;
        let actors = rel("The main actors of", "movie", "star", d(14364, movies));
        let star = inverse("Star", &actors);
        GenConfig {
            kinds: vec![
                kind("movie", s(movies), true),
                kind("star", s(stars), false),
                kind("type", 31, false),
                kind("location", s(175), false),
                kind("profession", 21, false),
                kind("date", s(8887), false),
                kind("number", s(1223), false),
                kind("keyword", s(2063), false),
                kind("constellation", 12, false),
                kind("award", s(15816), false),
            ],
            relations: vec![
                rel("The Constellation of", "star", "constellation", d(2691, stars)),
                rel("The director of", "movie", "star", d(2766, movies)),
                rel("The type of", "movie", "type", d(14566, movies)),
                rel("The release date of", "movie", "date", d(7862, movies)),
                rel("The relative of", "star", "star", d(470, stars)),
                rel("The country of", "movie", "location", d(842, movies)),
                rel("The award records of", "star", "award", d(35245, stars)),
                rel("The birth date of", "star", "date", d(2607, stars)),
                rel("The popularity of", "movie", "number", d(5733, movies)),
                rel("The profession of", "star", "profession", d(8606, stars)),
                rel("The key words of", "movie", "keyword", d(18369, movies)),
                rel("The birthplace of", "star", "location", d(2852, stars)),
                rel("The representative works of", "star", "movie", d(7668, stars)),
                rel("The score of", "movie", "number", d(5719, movies)),
                rel("The screenwriter of", "movie", "star", d(2997, movies)),
                rel("Collaborate with", "star", "star", d(1094, stars)),
                actors,
                star,
            ],
            ..GenConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.kinds.is_empty() {
            return err("no entity kinds configured".into());
        }
        for k in &self.kinds {
            if k.count == 0 {
                return err(format!("kind `{}` has zero entities", k.name));
            }
        }
        if !self.kinds.iter().any(|k| k.item) {
            return err("at least one kind must be an item kind".into());
        }
        for r in &self.relations {
            for end in [&r.head, &r.tail] {
                if !self.kinds.iter().any(|k| &k.name == end) {
                    return err(format!("relation `{}` refers to unknown kind `{end}`", r.name));
                }
            }
            match &r.inverse_of {
                Some(base) => {
                    let Some(b) = self.relations.iter().find(|x| &x.name == base) else {
                        return err(format!("relation `{}` inverts unknown relation `{base}`", r.name));
                    };
                    if b.head != r.tail || b.tail != r.head || b.inverse_of.is_some() {
                        return err(format!("relation `{}` is not a valid inverse of `{base}`", r.name));
                    }
                }
                None if !(r.degree > 0.0) => return err(format!("relation `{}` needs a positive degree", r.name)),
                None => {}
            }
        }
        let total: usize = self.kinds.iter().map(|k| k.count).sum();
        if total > 1 && self.relations.is_empty() {
            return err("a graph with several entities needs at least one relation".into());
        }
        if self.communities == 0 || !(0.0..=1.0).contains(&self.homophily) {
            return err("communities must be positive and homophily in [0, 1]".into());
        }
        if self.profile_len.0 == 0 || self.profile_len.0 > self.profile_len.1 {
            return err("profile_len must be a non-empty range of positive lengths".into());
        }
        if self.time_range.0 >= self.time_range.1 {
            return err("time_range must be increasing".into());
        }
        if self.flow_len.0 < 2 || self.flow_len.0 > self.flow_len.1 {
            return err("flow_len must satisfy 2 ≤ min ≤ max".into());
        }
        if self.clusters == 0 || !(self.tau_rec > 0.0) {
            return err("clusters and tau_rec must be positive".into());
        }
        let (a, b, c) = self.split;
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return err("split proportions must be non-negative and sum to 1".into());
        }
        for p in [self.chattiness, self.request_prob, self.spurious_request_prob] {
            if !(0.0..=1.0).contains(&p) {
                return err("probabilities must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}
