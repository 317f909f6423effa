use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::UtteranceEncoder;
use crate::data::{read_json, write_json, LinkPair};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::nn::checkpoint::{load_params, save_params};
use crate::nn::params::{all_finite, zeroed};
use crate::nn::tensor::dot;
use crate::nn::{candidate_softmax, Adam};
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Default maximum number of linked entities per utterance.
    pub top_k: usize,
    pub seed: u64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            top_k: 5,
            seed: 0,
        }
    }
}

impl LinkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2 for in-batch negatives".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Finds the entities an utterance talks about: exact name matches first,
/// then encoder neighbours above a similarity threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkerModel {
    pub encoder: UtteranceEncoder,
    /// Case-folded, token-joined entity name → entity.
    lexical: HashMap<String, EntityId>,
    max_name_tokens: usize,
    /// Minimum dot-product similarity for an encoder match.
    pub tau: f64,
    pub top_k: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    vocab: Vec<String>,
    /// `None` encodes an infinite threshold.
    tau: Option<f64>,
    top_k: usize,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn lexical_index(g: &KnowledgeGraph) -> (HashMap<String, EntityId>, usize) {
    let mut index = HashMap::new();
    let mut longest = 0;
    for e in g.entities() {
        let toks = tokenize(&e.name);
        if toks.is_empty() {
            continue;
        }
        longest = longest.max(toks.len());
        index.entry(toks.join(" ")).or_insert(e.id);
    }
    (index, longest)
}

impl LinkerModel {
    pub fn new(g: &KnowledgeGraph, encoder: UtteranceEncoder, tau: f64, top_k: usize) -> Self {
        let (lexical, max_name_tokens) = lexical_index(g);
        LinkerModel {
            encoder,
            lexical,
            max_name_tokens,
            tau,
            top_k,
        }
    }

    /// Entity names found verbatim in `text`, scanning left to right and
    /// preferring the longest name at each position.
    pub fn lexical_matches(&self, text: &str) -> Vec<EntityId> {
        let toks = tokenize(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let mut matched = 0;
            for len in (1..=self.max_name_tokens.min(toks.len() - i)).rev() {
                if let Some(&e) = self.lexical.get(&toks[i..i + len].join(" ")) {
                    if !out.contains(&e) {
                        out.push(e);
                    }
                    matched = len;
                    break;
                }
            }
            i += matched.max(1);
        }
        out
    }

    /// Every entity with its similarity to `text`, best first, ties by id.
    pub fn neighbours(&self, emb: &EmbeddingTable, text: &str) -> Vec<(EntityId, f64)> {
        let z = self.encoder.encode(text);
        let mut s: Vec<(EntityId, f64)> = (0..emb.num_entities())
            .map(|i| (EntityId(i as u32), dot(&z, emb.entity_matrix().row(i))))
            .collect();
        s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_params(path, &self.encoder)?;
        write_json(
            &sidecar(path),
            &Sidecar {
                vocab: self.encoder.vocab().to_vec(),
                tau: self.tau.is_finite().then_some(self.tau),
                top_k: self.top_k,
            },
        )
    }

    pub fn load(path: &Path, g: &KnowledgeGraph, d: usize) -> Result<Self> {
        let meta: Sidecar = read_json(&sidecar(path))?;
        let n = meta.vocab.len();
        let mut enc = UtteranceEncoder::from_parts(meta.vocab, crate::nn::Tensor2::zeros(n, d), crate::nn::Tensor2::zeros(d, d));
        load_params(path, &mut enc)?;
        Ok(LinkerModel::new(g, enc, meta.tau.unwrap_or(f64::INFINITY), meta.top_k))
    }
}

/// Lexical matches (always kept, in text order) followed by encoder
/// neighbours with similarity ≥ τ, up to `top_k` entities in total.
pub fn link_entities(linker: &LinkerModel, emb: &EmbeddingTable, text: &str, top_k: usize) -> Vec<EntityId> {
    let mut out = linker.lexical_matches(text);
    if out.len() >= top_k || tokenize(text).is_empty() {
        return out;
    }
    for (e, s) in linker.neighbours(emb, text) {
        if out.len() >= top_k || s < linker.tau {
            break;
        }
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

/// Fraction of pairs whose entity is among the `k` nearest encoder neighbours.
pub fn retrieval_accuracy(linker: &LinkerModel, emb: &EmbeddingTable, pairs: &[LinkPair], k: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::domain("no linking pairs"));
    }
    let hits = pairs
        .iter()
        .filter(|p| linker.neighbours(emb, &p.utterance).iter().take(k).any(|&(e, _)| e == p.entity))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Gold entity sets per distinct utterance, in first-seen order.
fn gold_sets(pairs: &[LinkPair]) -> Vec<(String, HashSet<EntityId>)> {
    let mut order: Vec<(String, HashSet<EntityId>)> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for p in pairs {
        let i = *pos.entry(p.utterance.clone()).or_insert_with(|| {
            order.push((p.utterance.clone(), HashSet::new()));
            order.len() - 1
        });
        order[i].1.insert(p.entity);
    }
    order
}

/// The threshold maximising micro-F1 of [`link_entities`] on `valid`;
/// ties go to the larger threshold. Infinity when nothing beats lexical
/// matching alone.
pub fn choose_tau(linker: &LinkerModel, emb: &EmbeddingTable, valid: &[LinkPair], top_k: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut extra: Vec<(f64, bool)> = Vec::new();
    for (text, gold) in gold_sets(valid) {
        let lex = linker.lexical_matches(&text);
        tp += lex.iter().filter(|e| gold.contains(e)).count();
        fp += lex.iter().filter(|e| !gold.contains(e)).count();
        fn_ += gold.iter().filter(|e| !lex.contains(e)).count();
        if lex.len() < top_k && !tokenize(&text).is_empty() {
            let room = top_k - lex.len();
            extra.extend(
                linker
                    .neighbours(emb, &text)
                    .into_iter()
                    .filter(|(e, _)| !lex.contains(e))
                    .take(room)
                    .map(|(e, s)| (s, gold.contains(&e))),
            );
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    let mut best = (f1(tp, fp, fn_), f64::INFINITY);
    extra.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut i = 0;
    while i < extra.len() {
        let s = extra[i].0;
        while i < extra.len() && extra[i].0 == s {
            if extra[i].1 {
                tp += 1;
                fn_ -= 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let f = f1(tp, fp, fn_);
        if f > best.0 {
            best = (f, s);
        }
    }
    best.1
}

/// Trains the encoder with an in-batch contrastive loss (each utterance
/// against the distinct entities of its batch), then picks τ on `valid`.
///
/// Returns the linker and the mean loss of each epoch.
pub fn train_linker(
    g: &KnowledgeGraph,
    emb: &EmbeddingTable,
    pairs: &[LinkPair],
    valid: &[LinkPair],
    cfg: &LinkerConfig,
) -> Result<(LinkerModel, Vec<f64>)> {
    cfg.validate()?;
    emb.check_graph(g)?;
    if pairs.is_empty() {
        return Err(Error::domain("no linking pairs"));
    }
    for p in pairs.iter().chain(valid) {
        g.check_entity(p.entity)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab = UtteranceEncoder::build_vocab(pairs.iter().map(|p| p.utterance.as_str()));
    let mut enc = UtteranceEncoder::new(vocab, emb.dim(), &mut rng);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut cols: Vec<usize> = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let c = pairs[i].entity.index();
                if !cols.contains(&c) {
                    cols.push(c);
                }
            }
            let mut grads = zeroed(&enc);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let own = pairs[i].entity.index();
                let mut cand = vec![own];
                cand.extend(cols.iter().copied().filter(|&c| c != own));
                let (z, cache) = enc.forward(&pairs[i].utterance);
                let (loss, mut dz) = candidate_softmax(&z, emb.entity_matrix(), &cand);
                total += loss;
                dz.iter_mut().for_each(|v| *v *= scale);
                enc.backward(&cache, &dz, &mut grads);
            }
            opt.step(&mut enc, &grads);
        }
        let mean = total / pairs.len() as f64;
        if !mean.is_finite() || !all_finite(&enc) {
            return Err(Error::Training {
                epoch,
                message: "loss or parameters became non-finite".into(),
            });
        }
        history.push(mean);
    }
    let mut linker = LinkerModel::new(g, enc, f64::INFINITY, cfg.top_k);
    if !valid.is_empty() {
        linker.tau = choose_tau(&linker, emb, valid, cfg.top_k);
    }
    Ok((linker, history))
}
