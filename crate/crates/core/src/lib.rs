//! Log-signatures of irregular observation streams and a linear
//! controlled-flow model driven by them.

pub mod datagen;
pub mod embedding;
pub mod error;
pub mod format;
pub mod lie;
pub mod matrix;
pub mod oracle;
pub mod scan;
pub mod slice;
pub mod tensor;
pub mod testing;
pub mod train;

pub use embedding::{
    ChannelLayout, ComposeMode, ContinuousChannels, Embedder, EmbeddingConfig, Event, Knot,
    ObservationStream, QueryPartition,
};
pub use error::{Error, Result};
pub use lie::{from_lyndon, lie_bracket, to_lyndon, witt_dim, LieElement, LyndonBasis};
pub use matrix::{BlockDiag, Mat};
pub use tensor::TruncatedTensor;
