pub mod checkpoint;
pub mod data;
pub mod datagen;
pub mod dialog;
pub mod error;
pub mod eval;
pub mod kg;
pub mod kge;
pub mod ltp;
pub mod nn;
pub mod rank;
pub mod stp;
pub mod text;

pub use error::{Error, Result};
