//! Minimal dense tensor math with reverse-mode gradients.
//!
//! Exactly the layers the pipeline needs: embeddings, gated 1-d
//! convolutions, masked attention with a null slot, linear maps, and the
//! losses. Everything is double precision and verified against central
//! differences by [`grad_check`].

mod checkpoint;
mod gradcheck;
mod graph;
mod mask;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use gradcheck::grad_check;
pub use graph::{attention, conv1d_glu, Gradients, Graph, Var};
pub use mask::AttentionMask;
pub use optim::{Adam, AdamConfig, Parameter};
pub use tensor::Tensor;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform Xavier/Glorot initialization for a weight shape.
pub fn xavier_uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let (fan_in, fan_out) = match shape.len() {
        2 => (shape[0], shape[1]),
        3 => (shape[0] * shape[1], shape[2]),
        _ => {
            let n: usize = shape.iter().product();
            (n, n)
        }
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    t
}
