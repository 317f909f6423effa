use std::collections::HashMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GenConfig;
use super::flow::build_flow;
use super::target::{cluster_profile, Cluster};
use super::templates::*;
use crate::data::{read_json, read_jsonl, write_json, write_jsonl, Dialog, DialogTurn, LinkPair, LtpExample, Speaker, Splits, StpExample, UserProfile};
use crate::dialog::{fact_sentences, knowledge_search};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;

pub const PROFILES_FILE: &str = "profiles.jsonl";
pub const DIALOGS_FILE: &str = "dialogs.jsonl";
pub const SPLITS_FILE: &str = "splits.json";

/// RNG streams keep users, dialogs and the split independent of each other.
pub(crate) fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 40) | index);
    rng
}

const USER_STREAM: u64 = 1;
const DIALOG_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;

/// Timestamped histories drifting between two or three taste regions.
///
/// Each user gets anchor items; a region is every item within two hops of its
/// anchor. The history is cut into consecutive phases, one per region, so
/// the most recent phase reflects the current taste.
pub fn gen_profiles(g: &KnowledgeGraph, cfg: &GenConfig) -> Result<Vec<UserProfile>> {
    cfg.validate()?;
    let items = g.items();
    if items.is_empty() {
        return Err(Error::Generation("graph has no items".into()));
    }
    let mut out = Vec::with_capacity(cfg.n_users);
    for u in 0..cfg.n_users {
        let mut rng = stream_rng(cfg.seed, USER_STREAM, u as u64);
        let len = rng.random_range(cfg.profile_len.0..=cfg.profile_len.1);
        let n_regions = rng.random_range(2..=3).min(len).min(items.len());
        let anchors: Vec<EntityId> = items.choose_multiple(&mut rng, n_regions).copied().collect();
        let regions = anchors
            .iter()
            .map(|&a| {
                let d = g.bfs_distances(a)?;
                Ok(items.iter().copied().filter(|e| d[e.index()].is_some_and(|x| x <= 2)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut chosen: Vec<EntityId> = Vec::with_capacity(len);
        for i in 0..len {
            let region = &regions[i * n_regions / len];
            let mut pick = *region.choose(&mut rng).expect("region contains its anchor");
            for _ in 0..10 {
                pick = if rng.random_bool(0.9) {
                    *region.choose(&mut rng).expect("non-empty")
                } else {
                    *items.choose(&mut rng).expect("non-empty")
                };
                if !chosen.contains(&pick) {
                    break;
                }
            }
            chosen.push(pick);
        }
        let (t0, t1) = cfg.time_range;
        let mut ts: Vec<u64> = Vec::with_capacity(len);
        while ts.len() < len {
            ts.push(rng.random_range(t0..=t1));
            ts.sort_unstable();
            ts.dedup();
        }
        out.push(UserProfile::new(format!("u{u:05}"), chosen.into_iter().zip(ts).collect()));
    }
    Ok(out)
}

/// A generated corpus: user profiles, annotated dialogs and the split.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub profiles: Vec<UserProfile>,
    pub dialogs: Vec<Dialog>,
    pub splits: Splits,
}

/// Items of the cluster plus their knowledge-graph neighbours, ascending id.
pub fn preferred_entities(g: &KnowledgeGraph, cluster: &Cluster) -> Result<Vec<EntityId>> {
    let mut out = cluster.members.clone();
    for &m in &cluster.members {
        out.extend(g.neighbors(m)?.into_iter().map(|(e, _)| e));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn dedup_ordered(es: &[EntityId]) -> Vec<EntityId> {
    let mut out: Vec<EntityId> = Vec::new();
    for &e in es {
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

fn agent_turn(text: String, grounding: EntityId, knowledge: &[crate::kg::Triple], rec: bool) -> DialogTurn {
    let mut ents = vec![grounding];
    for t in knowledge.iter().take(crate::dialog::MAX_FACTS) {
        ents.push(t.head);
        ents.push(t.tail);
    }
    DialogTurn {
        speaker: Speaker::Agent,
        text,
        entities: dedup_ordered(&ents),
        grounding: Some(grounding),
        is_recommendation: rec,
    }
}

fn user_turn(text: String, entities: Vec<EntityId>) -> DialogTurn {
    DialogTurn {
        speaker: Speaker::User,
        text,
        entities,
        grounding: None,
        is_recommendation: false,
    }
}

/// One dialog walking `flow` towards its last entity.
pub(crate) fn realize_dialog(
    g: &KnowledgeGraph,
    cfg: &GenConfig,
    dialog_id: String,
    user_id: String,
    flow: &[EntityId],
    preferred: &[EntityId],
    rng: &mut ChaCha8Rng,
) -> Result<Dialog> {
    let target = *flow.last().expect("non-empty flow");
    let dist = g.bfs_distances(target)?;
    let d = |e: EntityId| dist[e.index()];
    let mut turns = Vec::new();

    let f0 = flow[0];
    let away: Vec<EntityId> = g
        .neighbors(f0)?
        .into_iter()
        .map(|(e, _)| e)
        .filter(|e| !flow.contains(e))
        .collect();
    let toward_f0: Vec<EntityId> = away
        .iter()
        .copied()
        .filter(|&o| d(o) == d(f0).map(|x| x + 1) && g.next_hop_with(&dist, o).ok().flatten() == Some(f0))
        .collect();
    let opening = toward_f0.choose(rng).or_else(|| away.choose(rng)).copied();
    let mut text = match opening {
        Some(o) => fill(USER_OPEN, rng, g.name(o), ""),
        None => fill(USER_OPEN_BLANK, rng, "", ""),
    };
    if rng.random_bool(cfg.spurious_request_prob) {
        text = format!("{text} {}", fill(USER_REQUEST, rng, "", ""));
    }
    turns.push(user_turn(text, opening.into_iter().collect()));

    let mut prev: Option<EntityId> = None;
    for (k, &f) in flow.iter().enumerate() {
        if k > 0 {
            let echo = flow[k - 1];
            let mut parts = Vec::new();
            let mut ents = Vec::new();
            if rng.random_bool(cfg.chattiness) {
                let off: Vec<EntityId> = preferred.iter().copied().filter(|e| !flow.contains(e)).collect();
                if let Some(&c) = off.choose(rng) {
                    parts.push(fill(USER_CHATTER, rng, g.name(c), ""));
                    ents.push(c);
                }
            }
            parts.push(fill(USER_ECHO, rng, g.name(echo), ""));
            ents.push(echo);
            let near = d(echo) == Some(1);
            if (near && rng.random_bool(cfg.request_prob)) || (!near && rng.random_bool(cfg.spurious_request_prob)) {
                parts.push(fill(USER_REQUEST, rng, "", ""));
            }
            turns.push(user_turn(parts.join(" "), ents));
        }
        let knowledge = knowledge_search(g, prev, f)?;
        let rec = k + 1 == flow.len();
        let head = if rec {
            fill(AGENT_RECOMMEND, rng, g.name(f), "")
        } else {
            fill(AGENT_GROUND, rng, g.name(f), prev.map_or("movies", |p| g.name(p)))
        };
        let mut parts = vec![head];
        parts.extend(fact_sentences(g, &knowledge));
        turns.push(agent_turn(parts.join(" "), f, &knowledge, rec));
        prev = Some(f);
    }
    turns.push(user_turn(fill(USER_ACCEPT, rng, g.name(target), ""), vec![target]));
    Ok(Dialog {
        dialog_id,
        user_id,
        turns,
    })
}

/// Generates profiles, one dialog per user slot, and a train/valid/test split.
pub fn gen_corpus(g: &KnowledgeGraph, emb: &EmbeddingTable, cfg: &GenConfig) -> Result<Corpus> {
    emb.check_graph(g)?;
    let profiles = gen_profiles(g, cfg)?;
    if profiles.is_empty() && cfg.n_dialogs > 0 {
        return Err(Error::Config("dialogs need at least one user".into()));
    }
    let mut dialogs = Vec::with_capacity(cfg.n_dialogs);
    for i in 0..cfg.n_dialogs {
        let mut rng = stream_rng(cfg.seed, DIALOG_STREAM, i as u64);
        let profile = &profiles[i % profiles.len()];
        let t_now = profile.last_timestamp().unwrap_or(0) + 1;
        let clusters = cluster_profile(profile, emb, cfg.clusters, cfg.tau_rec, t_now)?;
        let target = clusters[0].medoid;
        let preferred = preferred_entities(g, &clusters[0])?;
        let flow = build_flow(g, target, cfg.flow_len, &mut rng)?;
        dialogs.push(realize_dialog(g, cfg, format!("d{i:05}"), profile.user_id.clone(), &flow, &preferred, &mut rng)?);
    }
    let splits = split_ids(&dialogs, cfg)?;
    Ok(Corpus {
        profiles,
        dialogs,
        splits,
    })
}

fn split_ids(dialogs: &[Dialog], cfg: &GenConfig) -> Result<Splits> {
    let mut ids: Vec<String> = dialogs.iter().map(|d| d.dialog_id.clone()).collect();
    ids.shuffle(&mut stream_rng(cfg.seed, SPLIT_STREAM, 0));
    let n = ids.len() as f64;
    let n_train = (n * cfg.split.0).round() as usize;
    let n_valid = ((n * cfg.split.1).round() as usize).min(ids.len() - n_train);
    let test = ids.split_off(n_train + n_valid);
    let valid = ids.split_off(n_train);
    Ok(Splits { train: ids, valid, test })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}`")))
    }
}

impl Corpus {
    pub fn split_ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.splits.train,
            Split::Valid => &self.splits.valid,
            Split::Test => &self.splits.test,
        }
    }

    pub fn dialogs_in(&self, split: Split) -> Vec<&Dialog> {
        let index: HashMap<&str, &Dialog> = self.dialogs.iter().map(|d| (d.dialog_id.as_str(), d)).collect();
        self.split_ids(split).iter().filter_map(|id| index.get(id.as_str()).copied()).collect()
    }

    /// Long-term planner examples of every dialog in `split`.
    pub fn ltp_examples(&self, split: Split) -> Result<Vec<LtpExample>> {
        let mut out = Vec::new();
        for d in self.dialogs_in(split) {
            out.extend(d.ltp_examples(self.profile(&d.user_id)?)?);
        }
        Ok(out)
    }

    /// Short-term planner examples of `split` with the matching profile
    /// histories, one per example.
    pub fn stp_examples(&self, split: Split) -> Result<(Vec<StpExample>, Vec<Vec<EntityId>>)> {
        let mut examples = Vec::new();
        let mut histories = Vec::new();
        for d in self.dialogs_in(split) {
            let history: Vec<EntityId> = self.profile(&d.user_id)?.interactions.iter().map(|&(e, _)| e).collect();
            let ex = d.stp_examples()?;
            histories.extend(std::iter::repeat_n(history, ex.len()));
            examples.extend(ex);
        }
        Ok((examples, histories))
    }

    pub fn link_pairs(&self, split: Split) -> Vec<LinkPair> {
        self.dialogs_in(split).iter().flat_map(|d| d.link_pairs()).collect()
    }

    pub fn profile(&self, user_id: &str) -> Result<&UserProfile> {
        self.profiles
            .iter()
            .find(|p| p.user_id == user_id)
            .ok_or_else(|| Error::Data {
                dialog: String::new(),
                message: format!("unknown user `{user_id}`"),
            })
    }

    /// Writes the corpus plus derived per-split training files
    /// (`ltp_<split>.jsonl`, `stp_<split>.jsonl`, `linking_<split>.jsonl`).
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(PROFILES_FILE), &self.profiles)?;
        write_jsonl(&dir.join(DIALOGS_FILE), &self.dialogs)?;
        write_json(&dir.join(SPLITS_FILE), &self.splits)?;
        for split in Split::ALL {
            let mut ltp = Vec::new();
            let mut stp = Vec::new();
            let mut link = Vec::new();
            for d in self.dialogs_in(split) {
                ltp.extend(d.ltp_examples(self.profile(&d.user_id)?)?);
                stp.extend(d.stp_examples()?);
                link.extend(d.link_pairs());
            }
            write_jsonl(&dir.join(format!("ltp_{}.jsonl", split.name())), &ltp)?;
            write_jsonl(&dir.join(format!("stp_{}.jsonl", split.name())), &stp)?;
            write_jsonl(&dir.join(format!("linking_{}.jsonl", split.name())), &link)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Corpus {
            profiles: read_jsonl(&dir.join(PROFILES_FILE))?,
            dialogs: read_jsonl(&dir.join(DIALOGS_FILE))?,
            splits: read_json(&dir.join(SPLITS_FILE))?,
        })
    }
}
