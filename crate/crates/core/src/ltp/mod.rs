//! Long-term planning: predicts the item to recommend from a user's
//! timestamped history and the entities of the current conversation.

mod model;
mod sequence;

pub use model::{ltp_predict, ltp_score, train_ltp, LtpConfig, LtpModel};
pub use sequence::{build_sequence, Provenance, SeqEntry, TimedEntitySeq, TsMode};
