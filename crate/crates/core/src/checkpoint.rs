//! Fixed file layout of a trained pipeline and the run configuration
//! shared by every stage.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::{Corpus, GenConfig};
use crate::dialog::{Engine, EngineOptions};
use crate::error::{Error, Result};
use crate::eval::InteractiveConfig;
use crate::kg::KnowledgeGraph;
use crate::kge::{EmbeddingTable, KgeConfig};
use crate::ltp::{LtpConfig, LtpModel};
use crate::stp::{LinkerConfig, LinkerModel, StpConfig, StpModel, StpVariant};

pub const KG_DIR: &str = "kg";
pub const CORPUS_DIR: &str = "corpus";
pub const KGE_FILE: &str = "kge.bin";
pub const LINKER_FILE: &str = "linker.bin";
pub const LTP_FILE: &str = "ltp.bin";
pub const REPORTS_DIR: &str = "reports";

/// Per-module settings; every section is optional in the JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub kge: KgeConfig,
    pub linker: LinkerConfig,
    pub ltp: LtpConfig,
    pub stp: StpConfig,
    pub engine: EngineOptions,
    pub interactive: InteractiveConfig,
}

impl RunConfig {
    /// Desk-scale presets for every module.
    pub fn desk() -> Self {
        RunConfig {
            kge: KgeConfig::desk(),
            ltp: LtpConfig::desk(),
            ..RunConfig::default()
        }
    }

    /// Reads a JSON file; missing sections and fields keep their desk defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut base = serde_json::to_value(RunConfig::desk())?;
        let patch: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Uses `seed` for every module.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.gen.seed = seed;
        self.kge.seed = seed;
        self.linker.seed = seed;
        self.ltp.seed = seed;
        self.stp.seed = seed;
        self.interactive.seed = seed;
        self
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// A directory holding the artifacts of one pipeline run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub root: PathBuf,
}

impl Checkpoint {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Checkpoint { root: root.into() }
    }

    pub fn kg_dir(&self) -> PathBuf {
        self.root.join(KG_DIR)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join(CORPUS_DIR)
    }

    pub fn kge(&self) -> PathBuf {
        self.root.join(KGE_FILE)
    }

    pub fn linker(&self) -> PathBuf {
        self.root.join(LINKER_FILE)
    }

    pub fn ltp(&self) -> PathBuf {
        self.root.join(LTP_FILE)
    }

    /// `stp.bin` for the full model, `stp_<variant>.bin` for ablations.
    pub fn stp(&self, variant: StpVariant) -> PathBuf {
        match variant {
            StpVariant::Full => self.root.join("stp.bin"),
            v => self.root.join(format!("stp_{}.bin", v.name())),
        }
    }

    pub fn report(&self, mode: &str) -> PathBuf {
        self.root.join(REPORTS_DIR).join(format!("{mode}.json"))
    }

    fn need(path: PathBuf, stage: &str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::domain(format!("{} is missing; run `{stage}` first", path.display())))
        }
    }

    pub fn load_graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::load_dir(&Self::need(self.kg_dir(), "gen-kg")?)
    }

    pub fn load_embeddings(&self, g: &KnowledgeGraph) -> Result<EmbeddingTable> {
        let (emb, _) = EmbeddingTable::load(&Self::need(self.kge(), "train-kge")?)?;
        emb.check_graph(g)?;
        Ok(emb)
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        Corpus::load(&Self::need(self.corpus_dir(), "gen-corpus")?)
    }

    pub fn load_linker(&self, g: &KnowledgeGraph, emb: &EmbeddingTable) -> Result<LinkerModel> {
        LinkerModel::load(&Self::need(self.linker(), "train-linker")?, g, emb.dim())
    }

    pub fn load_ltp(&self) -> Result<LtpModel> {
        LtpModel::load(&Self::need(self.ltp(), "train-ltp")?)
    }

    pub fn load_stp(&self, variant: StpVariant) -> Result<StpModel> {
        StpModel::load(&Self::need(self.stp(variant), "train-stp")?)
    }

    /// The full engine: graph, embeddings, linker, LTP and the full STP.
    pub fn load_engine(&self, options: EngineOptions) -> Result<Engine> {
        let g = self.load_graph()?;
        let emb = self.load_embeddings(&g)?;
        let linker = self.load_linker(&g, &emb)?;
        let ltp = self.load_ltp()?;
        let stp = self.load_stp(StpVariant::Full)?;
        for d in [ltp.d, stp.d] {
            if d != emb.dim() {
                return Err(Error::shape(format!("model width {d} does not match embedding width {}", emb.dim())));
            }
        }
        Ok(Engine::new(Arc::new(g), Arc::new(emb), Arc::new(linker), Arc::new(ltp), Arc::new(stp))?.with_options(options))
    }
}
