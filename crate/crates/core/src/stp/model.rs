use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncodeCache, UtteranceEncoder};
use crate::data::{read_json, write_json, StpExample};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::nn::block::BlockCache;
use crate::nn::checkpoint::{load_params, save_params};
use crate::nn::params::{accumulate, all_finite, join, zeroed};
use crate::nn::tensor::dot;
use crate::nn::{candidate_softmax, Adam, Block, Encoder, EncoderShape, EncoderTrace, Parameters, Tensor2};
use crate::rank::{argmax, rank_desc, sample_negatives};

/// Which inputs reach the fusion layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StpVariant {
    #[default]
    Full,
    /// Profile entities are prepended to the conversation context.
    WithHistory,
    /// The long-term target is replaced by the zero vector.
    WithoutLongTerm,
    /// The utterance vector is replaced by the zero vector.
    WithoutLatestUtterance,
}

impl StpVariant {
    pub const ALL: [StpVariant; 4] = [
        StpVariant::Full,
        StpVariant::WithHistory,
        StpVariant::WithoutLongTerm,
        StpVariant::WithoutLatestUtterance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StpVariant::Full => "full",
            StpVariant::WithHistory => "with_history",
            StpVariant::WithoutLongTerm => "without_long_term",
            StpVariant::WithoutLatestUtterance => "without_latest_utterance",
        }
    }
}

impl std::str::FromStr for StpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StpVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StpConfig {
    /// Blocks of the context encoder.
    pub depth: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    /// Most recent context entities kept.
    pub max_ctx: usize,
    pub n_neg: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub variant: StpVariant,
    pub seed: u64,
}

impl Default for StpConfig {
    fn default() -> Self {
        StpConfig {
            depth: 1,
            n_heads: 2,
            ffn_dim: 64,
            max_ctx: 50,
            n_neg: 100,
            learning_rate: 5e-3,
            epochs: 30,
            batch_size: 16,
            variant: StpVariant::Full,
            seed: 0,
        }
    }
}

impl StpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.n_heads == 0 || self.ffn_dim == 0 || self.max_ctx == 0 {
            return Err(Error::Config("depth, n_heads, ffn_dim and max_ctx must be positive".into()));
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

/// Inputs of one short-term prediction.
#[derive(Clone, Copy, Debug)]
pub struct StpQuery<'a> {
    /// The latest user utterance.
    pub utterance: &'a str,
    /// Conversation entities in mention order.
    pub context: &'a [EntityId],
    /// Profile entities, read only by [`StpVariant::WithHistory`].
    pub history: &'a [EntityId],
    /// The long-term target.
    pub target: EntityId,
}

/// Utterance encoder, context self-attention and a fusion block over
/// `[z^w, z^e, target]` whose mean output scores every entity.
#[derive(Clone, Debug, PartialEq)]
pub struct StpModel {
    pub config: StpConfig,
    pub d: usize,
    pub utterance: UtteranceEncoder,
    pub context: Encoder,
    pub fusion: Block,
}

impl Parameters for StpModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        self.utterance.visit(&join(prefix, "utterance"), f);
        self.context.visit(&join(prefix, "context"), f);
        self.fusion.visit(&join(prefix, "fusion"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        self.utterance.visit_mut(&join(prefix, "utterance"), f);
        self.context.visit_mut(&join(prefix, "context"), f);
        self.fusion.visit_mut(&join(prefix, "fusion"), f);
    }
}

struct Trace {
    utterance: Option<EncodeCache>,
    context: Option<(EncoderTrace, usize)>,
    fusion: BlockCache,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    d: usize,
    config: StpConfig,
    vocab: Vec<String>,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl StpModel {
    pub fn new(d: usize, vocab: Vec<String>, config: StpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let utterance = UtteranceEncoder::new(vocab, d, &mut rng);
        let shape = EncoderShape {
            d,
            n_heads: config.n_heads,
            ffn_dim: config.ffn_dim,
            depth: config.depth,
        };
        let context = Encoder::new(shape, None, &mut rng)?;
        let fusion = Block::new(d, config.n_heads, config.ffn_dim, &mut rng)?;
        Ok(StpModel {
            config,
            d,
            utterance,
            context,
            fusion,
        })
    }

    pub fn variant(&self) -> StpVariant {
        self.config.variant
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_params(path, self)?;
        write_json(
            &sidecar(path),
            &Sidecar {
                d: self.d,
                config: self.config.clone(),
                vocab: self.utterance.vocab().to_vec(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: Sidecar = read_json(&sidecar(path))?;
        let mut m = StpModel::new(meta.d, meta.vocab, meta.config)?;
        load_params(path, &mut m)?;
        Ok(m)
    }

    /// Context entities seen by this variant, newest `max_ctx` kept.
    fn context_entities(&self, q: &StpQuery<'_>) -> Vec<EntityId> {
        let mut all: Vec<EntityId> = Vec::new();
        if self.variant() == StpVariant::WithHistory {
            all.extend_from_slice(q.history);
        }
        all.extend_from_slice(q.context);
        let skip = all.len().saturating_sub(self.config.max_ctx);
        all.split_off(skip)
    }

    /// The three fusion inputs `z^w`, `z^e` and the target vector.
    fn inputs(&self, emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<(Tensor2, Option<EncodeCache>, Option<(EncoderTrace, usize)>)> {
        if emb.dim() != self.d {
            return Err(Error::shape(format!("embeddings have d = {}, model expects {}", emb.dim(), self.d)));
        }
        let target = emb.entity(q.target)?.to_vec();
        let mut x = Tensor2::zeros(3, self.d);
        let mut ucache = None;
        if self.variant() != StpVariant::WithoutLatestUtterance {
            let (zw, c) = self.utterance.forward(q.utterance);
            x.row_mut(0).copy_from_slice(&zw);
            ucache = Some(c);
        }
        let ctx = self.context_entities(q);
        let mut ccache = None;
        if !ctx.is_empty() {
            let rows = ctx.iter().map(|&e| emb.entity(e).map(<[f64]>::to_vec)).collect::<Result<Vec<_>>>()?;
            let cx = Tensor2::from_rows(&rows)?;
            let n = ctx.len();
            let (y, trace) = self.context.forward(&cx, &vec![true; n], None)?;
            x.row_mut(1).copy_from_slice(y.row(n - 1));
            ccache = Some((trace, n));
        }
        if self.variant() != StpVariant::WithoutLongTerm {
            x.row_mut(2).copy_from_slice(&target);
        }
        Ok((x, ucache, ccache))
    }

    fn fuse(&self, x: &Tensor2) -> Result<(Vec<f64>, BlockCache)> {
        let (y, cache) = self.fusion.forward(None, x)?;
        let mut zs = vec![0.0; self.d];
        for i in 0..y.rows() {
            crate::nn::tensor::axpy(1.0 / y.rows() as f64, y.row(i), &mut zs);
        }
        Ok((zs, cache))
    }

    fn forward(&self, emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<(Vec<f64>, Trace)> {
        let (x, utterance, context) = self.inputs(emb, q)?;
        let (zs, fusion) = self.fuse(&x)?;
        Ok((zs, Trace { utterance, context, fusion }))
    }

    /// Fuses explicitly supplied input vectors; the scoring path of every variant.
    pub fn fuse_vectors(&self, zw: &[f64], ze: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        let x = Tensor2::from_rows(&[zw.to_vec(), ze.to_vec(), target.to_vec()])?;
        self.fuse(&x).map(|(z, _)| z)
    }

    /// The fused representation `z^s`.
    pub fn represent(&self, emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<Vec<f64>> {
        self.forward(emb, q).map(|(z, _)| z)
    }

    /// Loss and parameter gradient for one example whose candidate rows
    /// start with the gold grounding.
    pub fn loss_and_grad(&self, emb: &EmbeddingTable, q: &StpQuery<'_>, candidates: &[usize], grads: &mut StpModel) -> Result<f64> {
        let (zs, trace) = self.forward(emb, q)?;
        let (loss, dz) = candidate_softmax(&zs, emb.entity_matrix(), candidates);
        let mut dy = Tensor2::zeros(3, self.d);
        for i in 0..3 {
            crate::nn::tensor::axpy(1.0 / 3.0, &dz, dy.row_mut(i));
        }
        let dx = self.fusion.backward(None, &trace.fusion, &dy, &mut grads.fusion, None)?;
        if let Some(c) = &trace.utterance {
            self.utterance.backward(c, dx.row(0), &mut grads.utterance);
        }
        if let Some((t, n)) = &trace.context {
            let mut dctx = Tensor2::zeros(*n, self.d);
            dctx.row_mut(n - 1).copy_from_slice(dx.row(1));
            self.context.backward(t, &dctx, &mut grads.context)?;
        }
        Ok(loss)
    }
}

/// Dot-product score of every entity, indexed by entity id.
pub fn stp_score(model: &StpModel, g: &KnowledgeGraph, emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<Vec<f64>> {
    emb.check_graph(g)?;
    g.check_entity(q.target)?;
    let z = model.represent(emb, q)?;
    Ok((0..emb.num_entities()).map(|i| dot(&z, emb.entity_matrix().row(i))).collect())
}

/// The predicted grounding entity and every entity ranked best first.
pub fn stp_predict(model: &StpModel, g: &KnowledgeGraph, emb: &EmbeddingTable, q: &StpQuery<'_>) -> Result<(EntityId, Vec<EntityId>)> {
    let scores = stp_score(model, g, emb, q)?;
    let ids: Vec<EntityId> = (0..scores.len() as u32).map(EntityId).collect();
    let top = argmax(&ids, &scores).ok_or_else(|| Error::domain("graph has no entities"))?;
    Ok((top, rank_desc(&ids, &scores)))
}

/// Trains with sampled-softmax cross-entropy of the gold grounding against
/// `n_neg` uniform negative entities. Entity embeddings are read only.
///
/// `histories` is either empty or holds one profile entity list per example.
/// Returns the model and the mean loss of each epoch.
pub fn train_stp(
    g: &KnowledgeGraph,
    emb: &EmbeddingTable,
    examples: &[StpExample],
    histories: &[Vec<EntityId>],
    cfg: &StpConfig,
) -> Result<(StpModel, Vec<f64>)> {
    emb.check_graph(g)?;
    if examples.is_empty() {
        return Err(Error::domain("no training examples"));
    }
    if !histories.is_empty() && histories.len() != examples.len() {
        return Err(Error::shape("histories must be empty or match the examples"));
    }
    for ex in examples {
        g.check_entity(ex.target)?;
        g.check_entity(ex.gold_grounding)?;
        for &e in &ex.context_entities {
            g.check_entity(e)?;
        }
    }
    let vocab = UtteranceEncoder::build_vocab(examples.iter().map(|e| e.utterance.as_str()));
    let mut model = StpModel::new(emb.dim(), vocab, cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5f7a_11d9);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let n_ent = g.num_entities();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = zeroed(&model);
            for &i in chunk {
                let ex = &examples[i];
                let q = StpQuery {
                    utterance: &ex.utterance,
                    context: &ex.context_entities,
                    history: histories.get(i).map_or(&[], Vec::as_slice),
                    target: ex.target,
                };
                let gold = ex.gold_grounding.index();
                let mut cand = vec![gold];
                cand.extend(sample_negatives(n_ent, gold, cfg.n_neg, &mut rng));
                total += model.loss_and_grad(emb, &q, &cand, &mut batch)?;
            }
            let mut grads = zeroed(&model);
            accumulate(&mut grads, &batch, 1.0 / chunk.len() as f64);
            opt.step(&mut model, &grads);
        }
        let mean = total / examples.len() as f64;
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
