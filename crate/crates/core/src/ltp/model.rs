use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sequence::{build_sequence, TimedEntitySeq, TsMode};
use crate::data::{read_json, write_json, LtpExample, UserProfile};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::nn::checkpoint::{load_params, save_params};
use crate::nn::params::{accumulate, all_finite, zeroed};
use crate::nn::{candidate_softmax, interval_matrix, Adam, Encoder, EncoderShape, EncoderTrace, Parameters, Tensor2};
use crate::rank::{argmax, rank_desc, sample_negatives};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LtpConfig {
    /// Sequence length N.
    pub max_len: usize,
    pub depth: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    /// Largest interval bucket.
    pub k_max: usize,
    pub n_neg: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub ts_mode: TsMode,
    pub seed: u64,
}

impl Default for LtpConfig {
    fn default() -> Self {
        LtpConfig {
            max_len: 50,
            depth: 4,
            n_heads: 2,
            ffn_dim: 64,
            k_max: 64,
            n_neg: 100,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 16,
            ts_mode: TsMode::Now,
            seed: 0,
        }
    }
}

impl LtpConfig {
    /// A single shallow block, enough for the 200-entity desk corpus where
    /// the deeper default overfits.
    pub fn desk() -> Self {
        LtpConfig {
            depth: 1,
            ffn_dim: 16,
            epochs: 10,
            ..LtpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 2 {
            return Err(Error::Config("max_len must be at least 2".into()));
        }
        if self.depth == 0 || self.n_heads == 0 || self.ffn_dim == 0 || self.k_max == 0 {
            return Err(Error::Config("depth, n_heads, ffn_dim and k_max must be positive".into()));
        }
        if self.batch_size == 0 || self.n_neg == 0 {
            return Err(Error::Config("batch_size and n_neg must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Stacked time-aware self-attention over a user's entity sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct LtpModel {
    pub config: LtpConfig,
    pub d: usize,
    pub encoder: Encoder,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    d: usize,
    config: LtpConfig,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Parameters for LtpModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        self.encoder.visit(prefix, f)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        self.encoder.visit_mut(prefix, f)
    }
}

impl LtpModel {
    pub fn new(d: usize, config: LtpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shape = EncoderShape {
            d,
            n_heads: config.n_heads,
            ffn_dim: config.ffn_dim,
            depth: config.depth,
        };
        let encoder = Encoder::new(shape, Some((config.k_max, config.max_len)), &mut rng)?;
        Ok(LtpModel { config, d, encoder })
    }

    /// Sequence for a profile and the conversation so far under this model's settings.
    pub fn sequence(&self, g: &KnowledgeGraph, profile: &UserProfile, convo: &[EntityId]) -> Result<TimedEntitySeq> {
        build_sequence(g, profile, convo, self.config.max_len, self.config.ts_mode)
    }

    /// Writes the parameter checkpoint to `path` and the configuration to `<path>.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        save_params(path, self)?;
        write_json(
            &sidecar(path),
            &Sidecar {
                d: self.d,
                config: self.config.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: Sidecar = read_json(&sidecar(path))?;
        let mut m = LtpModel::new(meta.d, meta.config)?;
        load_params(path, &mut m)?;
        Ok(m)
    }

    fn encode(&self, emb: &EmbeddingTable, seq: &TimedEntitySeq) -> Result<(Vec<f64>, EncoderTrace)> {
        if emb.dim() != self.d {
            return Err(Error::shape(format!("embeddings have d = {}, model expects {}", emb.dim(), self.d)));
        }
        let n = seq.len();
        if seq.num_real() == 0 {
            return Err(Error::domain("sequence has no entities"));
        }
        if n > self.config.max_len {
            return Err(Error::shape(format!("sequence length {n} exceeds N = {}", self.config.max_len)));
        }
        let mut x = Tensor2::zeros(n, self.d);
        for (i, e) in seq.entries.iter().enumerate() {
            if let Some(e) = e {
                x.row_mut(i).copy_from_slice(emb.entity(e.entity)?);
            }
        }
        let mask = seq.mask();
        let im = interval_matrix(&seq.timestamps(), &mask, self.config.k_max)?;
        let (y, trace) = self.encoder.forward(&x, &mask, Some(&im))?;
        Ok((y.row(n - 1).to_vec(), trace))
    }

    /// The user representation `z^l`: the encoder output at the last position.
    pub fn represent(&self, emb: &EmbeddingTable, seq: &TimedEntitySeq) -> Result<Vec<f64>> {
        self.encode(emb, seq).map(|(z, _)| z)
    }

    /// Loss and parameter gradient for one example whose candidate rows
    /// start with the target.
    pub fn loss_and_grad(&self, emb: &EmbeddingTable, seq: &TimedEntitySeq, candidates: &[usize], grads: &mut LtpModel) -> Result<f64> {
        let (z, trace) = self.encode(emb, seq)?;
        let (loss, dz) = candidate_softmax(&z, emb.entity_matrix(), candidates);
        let n = seq.len();
        let mut dy = Tensor2::zeros(n, self.d);
        dy.row_mut(n - 1).copy_from_slice(&dz);
        self.encoder.backward(&trace, &dy, &mut grads.encoder)?;
        Ok(loss)
    }
}

/// Dot-product relevance of every Item, aligned with `g.items()`.
pub fn ltp_score(model: &LtpModel, g: &KnowledgeGraph, emb: &EmbeddingTable, seq: &TimedEntitySeq) -> Result<Vec<f64>> {
    emb.check_graph(g)?;
    let z = model.represent(emb, seq)?;
    g.items()
        .iter()
        .map(|&e| Ok(crate::nn::tensor::dot(&z, emb.entity(e)?)))
        .collect()
}

/// The predicted target and every Item ranked best first.
pub fn ltp_predict(model: &LtpModel, g: &KnowledgeGraph, emb: &EmbeddingTable, seq: &TimedEntitySeq) -> Result<(EntityId, Vec<EntityId>)> {
    let scores = ltp_score(model, g, emb, seq)?;
    let top = argmax(g.items(), &scores).ok_or_else(|| Error::domain("graph has no items"))?;
    Ok((top, rank_desc(g.items(), &scores)))
}

/// Trains with sampled-softmax cross-entropy against `n_neg` uniform
/// negative items. Entity embeddings are read only.
///
/// Returns the model and the mean loss of each epoch.
pub fn train_ltp(g: &KnowledgeGraph, emb: &EmbeddingTable, examples: &[LtpExample], cfg: &LtpConfig) -> Result<(LtpModel, Vec<f64>)> {
    emb.check_graph(g)?;
    if examples.is_empty() {
        return Err(Error::domain("no training examples"));
    }
    let mut model = LtpModel::new(emb.dim(), cfg.clone())?;
    let items = g.items();
    let item_pos: std::collections::HashMap<EntityId, usize> = items.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut data = Vec::with_capacity(examples.len());
    for ex in examples {
        let pos = *item_pos
            .get(&ex.target)
            .ok_or_else(|| Error::domain(format!("target {} is not an item", ex.target)))?;
        let profile = UserProfile::new(ex.user_id.clone(), ex.profile.clone());
        let seq = model.sequence(g, &profile, &ex.context_entities)?;
        if seq.num_real() == 0 {
            return Err(Error::domain(format!("example for user {} has no entities", ex.user_id)));
        }
        data.push((seq, pos));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x17f0_25c3);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = zeroed(&model);
            let mut batch = zeroed(&model);
            for &i in chunk {
                let (seq, pos) = &data[i];
                let mut cand = vec![items[*pos].index()];
                cand.extend(sample_negatives(items.len(), *pos, cfg.n_neg, &mut rng).into_iter().map(|p| items[p].index()));
                total += model.loss_and_grad(emb, seq, &cand, &mut batch)?;
            }
            accumulate(&mut grads, &batch, 1.0 / chunk.len() as f64);
            opt.step(&mut model, &grads);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !all_finite(&model) {
            return Err(Error::Training {
                epoch,
                message: "loss or parameters became non-finite".into(),
            });
        }
        history.push(mean);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityKind, GraphBuilder};
    use crate::nn::grad_check;
    use crate::nn::params::{flatten, load_flat};
    use crate::nn::Block;
    use rand::Rng;

    fn small() -> LtpConfig {
        LtpConfig {
            max_len: 6,
            depth: 2,
            n_heads: 2,
            ffn_dim: 8,
            k_max: 4,
            ..LtpConfig::default()
        }
    }

    fn graph(n: usize) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        let r = b.add_relation("r").unwrap();
        let ids: Vec<_> = (0..n)
            .map(|i| b.add_entity(format!("e{i}"), if i % 4 == 3 { EntityKind::Attribute } else { EntityKind::Item }).unwrap())
            .collect();
        for w in ids.windows(2) {
            b.add_triple(w[0], r, w[1]).unwrap();
        }
        b.build()
    }

    fn unit_table(n: usize, d: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Tensor2::randn(n, d, 1.0, &mut rng);
        for i in 0..n {
            let norm = crate::nn::tensor::l2_norm(e.row(i));
            e.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingTable::new(e, Tensor2::zeros(1, d), crate::kge::NormKind::L2).unwrap()
    }

    #[test]
    fn identity_blocks_rank_the_single_item_first() {
        let g = graph(12);
        let emb = unit_table(12, 8, 1);
        let mut m = LtpModel::new(8, small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.encoder.blocks = (0..2).map(|_| Block::identity(8, 2, 8, &mut rng).unwrap()).collect();
        let p = UserProfile::new("u", vec![(EntityId(5), 10)]);
        let seq = m.sequence(&g, &p, &[]).unwrap();
        let scores = ltp_score(&m, &g, &emb, &seq).unwrap();
        assert_eq!(scores.len(), g.items().len());
        let (top, ranking) = ltp_predict(&m, &g, &emb, &seq).unwrap();
        assert_eq!(top, EntityId(5));
        let mut sorted = ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, g.items().to_vec());
        assert!(!ranking.contains(&EntityId(3)));
    }

    #[test]
    fn padding_and_shift_invariance() {
        let g = graph(12);
        let emb = unit_table(12, 8, 2);
        let m = LtpModel::new(8, small()).unwrap();
        let p = UserProfile::new("u", vec![(EntityId(1), 100), (EntityId(2), 160), (EntityId(4), 400)]);
        let convo = [EntityId(6), EntityId(3)];
        let short = build_sequence(&g, &p, &convo, 5, TsMode::Now).unwrap();
        let long = build_sequence(&g, &p, &convo, 6, TsMode::Now).unwrap();
        let a = m.represent(&emb, &short).unwrap();
        let b = m.represent(&emb, &long).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        let shifted = UserProfile::new("u", p.interactions.iter().map(|&(e, t)| (e, t + 12345)).collect());
        let c = ltp_score(&m, &g, &emb, &m.sequence(&g, &shifted, &convo).unwrap()).unwrap();
        let d = ltp_score(&m, &g, &emb, &m.sequence(&g, &p, &convo).unwrap()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn empty_sequence_and_dimension_errors() {
        let g = graph(8);
        let m = LtpModel::new(8, small()).unwrap();
        let seq = m.sequence(&g, &UserProfile::new("u", vec![]), &[]).unwrap();
        assert!(ltp_score(&m, &g, &unit_table(8, 8, 0), &seq).is_err());
        let seq = m.sequence(&g, &UserProfile::new("u", vec![]), &[EntityId(0)]).unwrap();
        assert!(ltp_score(&m, &g, &unit_table(8, 4, 0), &seq).is_err());
    }

    #[test]
    fn sampled_softmax_gradient_matches_differences() {
        let g = graph(12);
        let emb = unit_table(12, 8, 3);
        let m = LtpModel::new(8, small()).unwrap();
        let p = UserProfile::new("u", vec![(EntityId(1), 10), (EntityId(2), 30), (EntityId(0), 90)]);
        let seq = m.sequence(&g, &p, &[EntityId(7)]).unwrap();
        let cand = [5usize, 0, 2, 9];
        let theta = flatten(&m);
        let err = grad_check(
            |t| {
                let mut mm = m.clone();
                load_flat(&mut mm, t);
                let mut gr = zeroed(&mm);
                let l = mm.loss_and_grad(&emb, &seq, &cand, &mut gr).unwrap();
                (l, flatten(&gr))
            },
            &theta,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    fn examples(g: &KnowledgeGraph, n: usize, seed: u64) -> Vec<LtpExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = g.items();
        (0..n)
            .map(|i| {
                let len = rng.random_range(1..5);
                let profile: Vec<(EntityId, u64)> = (0..len).map(|k| (items[rng.random_range(0..items.len())], 100 * k as u64)).collect();
                let last = profile.last().unwrap().0;
                let target = items[(items.iter().position(|&e| e == last).unwrap() + 1) % items.len()];
                LtpExample {
                    user_id: format!("u{i}"),
                    profile,
                    context_entities: Vec::new(),
                    target,
                }
            })
            .collect()
    }

    #[test]
    fn loss_decreases_and_embeddings_frozen() {
        let g = graph(40);
        let emb = unit_table(40, 8, 4);
        let before = emb.clone();
        let ex = examples(&g, 500, 1);
        let cfg = LtpConfig {
            epochs: 5,
            ..small()
        };
        let (_, losses) = train_ltp(&g, &emb, &ex, &cfg).unwrap();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert_eq!(emb, before);
    }

    #[test]
    fn single_example_is_memorized_and_training_is_deterministic() {
        let g = graph(20);
        let emb = unit_table(20, 8, 5);
        let ex = examples(&g, 1, 9);
        let cfg = LtpConfig {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 1,
            ..small()
        };
        let (m, _) = train_ltp(&g, &emb, &ex, &cfg).unwrap();
        let p = UserProfile::new("u", ex[0].profile.clone());
        let (top, _) = ltp_predict(&m, &g, &emb, &m.sequence(&g, &p, &[]).unwrap()).unwrap();
        assert_eq!(top, ex[0].target);
        let (m2, _) = train_ltp(&g, &emb, &ex, &cfg).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn non_item_target_is_rejected() {
        let g = graph(8);
        let emb = unit_table(8, 8, 0);
        let mut ex = examples(&g, 2, 0);
        ex[0].target = EntityId(3);
        assert!(train_ltp(&g, &emb, &ex, &small()).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ltp.bin");
        let m = LtpModel::new(8, small()).unwrap();
        m.save(&path).unwrap();
        assert_eq!(LtpModel::load(&path).unwrap(), m);
    }
}
