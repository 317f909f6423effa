//! Dense numerics: tensors, attention, transformer blocks, optimizers and
//! gradient checking.

pub mod attention;
pub mod block;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;
pub mod tensor;

pub use attention::{
    attention_backward, attention_forward, interval_matrix, self_attention, time_aware_attention, AttentionParams,
    AttentionTrace, IntervalEmbeddings, IntervalMatrix,
};
pub use block::{Block, Encoder, EncoderShape, EncoderTrace, FeedForward, LayerNorm};
pub use gradcheck::grad_check;
pub use params::{Adam, Optimizer, OptimizerKind, Parameters};
pub use tensor::{candidate_softmax, Tensor2};
