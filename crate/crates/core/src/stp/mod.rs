//! Short-term planning: picks the next grounding entity from the latest
//! utterance, the conversation so far and the long-term target. Also hosts
//! the entity linker, which shares the utterance encoder architecture.

mod encoder;
mod linker;
mod model;

pub use encoder::{UtteranceEncoder, UNK};
pub use linker::{choose_tau, link_entities, retrieval_accuracy, train_linker, LinkerConfig, LinkerModel};
pub use model::{stp_predict, stp_score, train_stp, StpConfig, StpModel, StpQuery, StpVariant};
