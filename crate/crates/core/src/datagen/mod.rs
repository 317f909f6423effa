//! Synthetic knowledge graphs, user histories, dialog corpora and a
//! simulated user.

mod config;
mod corpus;
mod flow;
mod graph;
mod names;
mod sequel;
mod simuser;
mod target;
mod templates;

pub use config::{GenConfig, KindSpec, RelationSpec};
pub use corpus::{gen_corpus, gen_profiles, preferred_entities, Corpus, Split, DIALOGS_FILE, PROFILES_FILE, SPLITS_FILE};
pub use flow::build_flow;
pub use graph::gen_kg;
pub use sequel::{gen_sequel_corpus, SequelConfig, SequelCorpus, SEQUEL_RELATION};
pub use simuser::{simulate_user, SimulatedUser, UserReply};
pub use target::{cluster_profile, k_medoids, select_target, Cluster};
