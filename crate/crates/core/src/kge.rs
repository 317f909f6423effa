//! TransE knowledge-graph embeddings.
//!
//! A triple is scored by `f(h, r, t) = −‖h + r − t‖` under the L1 or L2 norm
//! and trained with the margin ranking loss
//! `Σ max(0, γ − f(pos) + f(neg))` over uniformly corrupted triples.
//! Entity rows are renormalised to unit length every epoch; relation rows are
//! normalised once at initialisation.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::nn::tensor::{l2_norm, Tensor2};

pub const EMB_MAGIC: &[u8; 8] = b"LSTPEMB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    fn distance(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => l2_norm(v),
        }
    }

    /// Subgradient of the norm at `v`.
    fn gradient(self, v: &[f64], out: &mut [f64]) {
        match self {
            NormKind::L1 => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            NormKind::L2 => {
                let n = l2_norm(v);
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = if n > 0.0 { x / n } else { 0.0 };
                }
            }
        }
    }
}

/// Dense entity and relation vectors, frozen once trained.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    entities: Tensor2,
    relations: Tensor2,
    norm: NormKind,
}

impl EmbeddingTable {
    pub fn new(entities: Tensor2, relations: Tensor2, norm: NormKind) -> Result<Self> {
        if entities.cols() != relations.cols() {
            return Err(Error::shape("entity and relation vectors differ in width"));
        }
        if entities.cols() < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".into()));
        }
        if !entities.is_finite() || !relations.is_finite() {
            return Err(Error::Numeric("embedding table has non-finite entries".into()));
        }
        Ok(EmbeddingTable {
            entities,
            relations,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.entities.cols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn entity_matrix(&self) -> &Tensor2 {
        &self.entities
    }

    pub fn relation_matrix(&self) -> &Tensor2 {
        &self.relations
    }

    pub fn entity(&self, e: EntityId) -> Result<&[f64]> {
        if e.index() >= self.num_entities() {
            return Err(Error::domain(format!("entity {e} has no embedding")));
        }
        Ok(self.entities.row(e.index()))
    }

    pub fn relation(&self, r: RelationId) -> Result<&[f64]> {
        if r.index() >= self.num_relations() {
            return Err(Error::domain(format!("relation {} has no embedding", r.0)));
        }
        Ok(self.relations.row(r.index()))
    }

    /// Checks that the table covers exactly the graph's entities and relations.
    pub fn check_graph(&self, g: &KnowledgeGraph) -> Result<()> {
        if self.num_entities() != g.num_entities() || self.num_relations() != g.num_relations() {
            return Err(Error::shape(format!(
                "embeddings cover {} entities / {} relations, graph has {} / {}",
                self.num_entities(),
                self.num_relations(),
                g.num_entities(),
                g.num_relations()
            )));
        }
        Ok(())
    }

    /// Writes the binary table and its JSON sidecar (`<path>.json`).
    pub fn save(&self, path: &Path, seed: u64) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(EMB_MAGIC)?;
        for n in [self.num_entities(), self.num_relations(), self.dim()] {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for v in self.entities.data().iter().chain(self.relations.data()) {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()?;
        let meta = Sidecar {
            d: self.dim(),
            norm: self.norm,
            seed,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    /// Reads a table written by [`save`](Self::save). Returns the table and the recorded seed.
    pub fn load(path: &Path) -> Result<(Self, u64)> {
        let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != EMB_MAGIC {
            return Err(Error::Format(format!("{} is not an LSTPEMB1 file", path.display())));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let [nv, nr, d] = dims;
        if d != meta.d {
            return Err(Error::Format(format!("sidecar says d = {}, file says {d}", meta.d)));
        }
        let mut read = |n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            let mut b = [0u8; 4];
            for _ in 0..n {
                r.read_exact(&mut b)?;
                out.push(f32::from_le_bytes(b) as f64);
            }
            Ok(out)
        };
        let ent = Tensor2::from_vec(nv, d, read(nv * d)?)?;
        let rel = Tensor2::from_vec(nr, d, read(nr * d)?)?;
        Ok((EmbeddingTable::new(ent, rel, meta.norm)?, meta.seed))
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    d: usize,
    norm: NormKind,
    seed: u64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KgeConfig {
    pub d: usize,
    pub margin: f64,
    pub norm: NormKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub neg_per_pos: usize,
    pub seed: u64,
}

impl Default for KgeConfig {
    fn default() -> Self {
        KgeConfig {
            d: 32,
            margin: 1.0,
            norm: NormKind::L1,
            epochs: 300,
            batch_size: 64,
            learning_rate: 0.01,
            neg_per_pos: 1,
            seed: 0,
        }
    }
}

impl KgeConfig {
    /// Preset used by the desk-scale pipeline: the defaults with the L2 norm.
    pub fn desk() -> Self {
        KgeConfig {
            norm: NormKind::L2,
            ..KgeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config("d must be at least 2".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if self.batch_size == 0 || self.neg_per_pos == 0 {
            return Err(Error::Config("batch_size and neg_per_pos must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

fn residual(emb: &EmbeddingTable, t: &Triple, out: &mut [f64]) {
    let h = emb.entities.row(t.head.index());
    let r = emb.relations.row(t.rel.index());
    let tl = emb.entities.row(t.tail.index());
    for i in 0..out.len() {
        out[i] = h[i] + r[i] - tl[i];
    }
}

/// `−‖h + r − t‖` under the table's norm; larger is more plausible.
pub fn transe_score(emb: &EmbeddingTable, h: EntityId, r: RelationId, t: EntityId) -> Result<f64> {
    let (hv, rv, tv) = (emb.entity(h)?, emb.relation(r)?, emb.entity(t)?);
    let diff: Vec<f64> = (0..emb.dim()).map(|i| hv[i] + rv[i] - tv[i]).collect();
    Ok(-emb.norm.distance(&diff))
}

/// Margin loss over aligned positive/negative pairs, with gradients shaped
/// like the entity and relation matrices.
pub fn margin_loss(emb: &EmbeddingTable, pairs: &[(Triple, Triple)], margin: f64) -> (f64, Tensor2, Tensor2) {
    let d = emb.dim();
    let mut ge = Tensor2::zeros(emb.num_entities(), d);
    let mut gr = Tensor2::zeros(emb.num_relations(), d);
    let mut loss = 0.0;
    let (mut rp, mut rn, mut gp, mut gn) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for (pos, neg) in pairs {
        residual(emb, pos, &mut rp);
        residual(emb, neg, &mut rn);
        let l = margin + emb.norm.distance(&rp) - emb.norm.distance(&rn);
        if l <= 0.0 {
            continue;
        }
        loss += l;
        emb.norm.gradient(&rp, &mut gp);
        emb.norm.gradient(&rn, &mut gn);
        for (t, g, s) in [(pos, &gp, 1.0), (neg, &gn, -1.0)] {
            for i in 0..d {
                let v = s * g[i];
                ge.row_mut(t.head.index())[i] += v;
                gr.row_mut(t.rel.index())[i] += v;
                ge.row_mut(t.tail.index())[i] -= v;
            }
        }
    }
    (loss, ge, gr)
}

fn normalize_rows(t: &mut Tensor2) {
    for i in 0..t.rows() {
        let row = t.row_mut(i);
        let n = l2_norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
}

fn corrupt(g: &KnowledgeGraph, t: &Triple, rng: &mut ChaCha8Rng) -> Triple {
    let n = g.num_entities() as u32;
    let mut neg = *t;
    for _ in 0..10 {
        neg = *t;
        let e = EntityId(rng.random_range(0..n));
        if rng.random_bool(0.5) {
            neg.head = e;
        } else {
            neg.tail = e;
        }
        if !g.contains(&neg) {
            break;
        }
    }
    neg
}

/// Trains on every triple of `g`.
pub fn train_kge(g: &KnowledgeGraph, cfg: &KgeConfig) -> Result<EmbeddingTable> {
    train_kge_on(g, g.triples(), cfg).map(|(emb, _)| emb)
}

/// Trains on `train` (a subset of `g`'s triples); corruption avoids every
/// triple known to `g`. Returns the table and the loss of each epoch.
pub fn train_kge_on(g: &KnowledgeGraph, train: &[Triple], cfg: &KgeConfig) -> Result<(EmbeddingTable, Vec<f64>)> {
    cfg.validate()?;
    if g.num_entities() == 0 || train.is_empty() {
        return Err(Error::domain("cannot train embeddings on an empty graph"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 6.0 / (cfg.d as f64).sqrt();
    let mut init = |rows: usize| {
        let data = (0..rows * cfg.d).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor2::from_vec(rows, cfg.d, data).expect("sized")
    };
    let entities = init(g.num_entities());
    let mut relations = init(g.num_relations());
    normalize_rows(&mut relations);
    let mut emb = EmbeddingTable {
        entities,
        relations,
        norm: cfg.norm,
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        normalize_rows(&mut emb.entities);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let pairs: Vec<(Triple, Triple)> = chunk
                .iter()
                .flat_map(|&i| std::iter::repeat_n(train[i], cfg.neg_per_pos))
                .map(|t| (t, corrupt(g, &t, &mut rng)))
                .collect();
            let (loss, ge, gr) = margin_loss(&emb, &pairs, cfg.margin);
            total += loss;
            for (p, gp) in emb.entities.data_mut().iter_mut().zip(ge.data()) {
                *p -= cfg.learning_rate * gp;
            }
            for (p, gp) in emb.relations.data_mut().iter_mut().zip(gr.data()) {
                *p -= cfg.learning_rate * gp;
            }
        }
        if !total.is_finite() || !emb.entities.is_finite() || !emb.relations.is_finite() {
            return Err(Error::Training {
                epoch,
                message: "loss or parameters became non-finite".into(),
            });
        }
        losses.push(total);
    }
    normalize_rows(&mut emb.entities);
    Ok((emb, losses))
}

/// All entities outside `filter`, best tail first; ties by ascending id.
pub fn rank_tail(emb: &EmbeddingTable, h: EntityId, r: RelationId, filter: &HashSet<EntityId>) -> Result<Vec<EntityId>> {
    let (hv, rv) = (emb.entity(h)?, emb.relation(r)?);
    let q: Vec<f64> = hv.iter().zip(rv).map(|(a, b)| a + b).collect();
    let mut diff = vec![0.0; emb.dim()];
    let mut scored: Vec<(f64, EntityId)> = (0..emb.num_entities() as u32)
        .map(EntityId)
        .filter(|e| !filter.contains(e))
        .map(|e| {
            for (i, d) in diff.iter_mut().enumerate() {
                *d = q[i] - emb.entities.get(e.index(), i);
            }
            (-emb.norm.distance(&diff), e)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, e)| e).collect())
}

/// Filtered tail-prediction HIT@k over `test`: other true tails of the same
/// `(head, relation)` in `known` are removed before ranking.
pub fn filtered_tail_hits(emb: &EmbeddingTable, known: &[Triple], test: &[Triple], k: usize) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain("no test triples"));
    }
    let mut tails: HashMap<(EntityId, RelationId), HashSet<EntityId>> = HashMap::new();
    for t in known.iter().chain(test) {
        tails.entry((t.head, t.rel)).or_default().insert(t.tail);
    }
    let mut hits = 0usize;
    for t in test {
        let mut filter = tails[&(t.head, t.rel)].clone();
        filter.remove(&t.tail);
        let ranked = rank_tail(emb, t.head, t.rel, &filter)?;
        if ranked.iter().take(k).any(|&e| e == t.tail) {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Fraction of triples scoring strictly above a random corruption of themselves.
pub fn corruption_accuracy(emb: &EmbeddingTable, g: &KnowledgeGraph, triples: &[Triple], seed: u64) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::domain("no triples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0usize;
    for t in triples {
        let neg = corrupt(g, t, &mut rng);
        if transe_score(emb, t.head, t.rel, t.tail)? > transe_score(emb, neg.head, neg.rel, neg.tail)? {
            wins += 1;
        }
    }
    Ok(wins as f64 / triples.len() as f64)
}
