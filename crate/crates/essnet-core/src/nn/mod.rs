pub mod act;
pub mod block;
pub mod conv;
pub mod norm;

pub use block::{Block, Cache, Grads, Layer, ParamId, ParamStore};
pub use conv::PadMode;
