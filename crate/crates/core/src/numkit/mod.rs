//! Dense kernels, affine layers with manual backward passes, activations and
//! the seeded random source everything else draws from.

mod activation;
mod layer;
mod matrix;
mod rng;

pub use activation::{activation, sigmoid, Activation, Mode};
pub use layer::{AffineLayer, LayerGrad};
pub use matrix::Matrix;
pub use rng::{gumbel_from_uniform, DrawKind, RandomSource, GUMBEL_CLAMP};
