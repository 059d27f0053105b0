//! Small dense networks: `f(x) = a(W_L … a(W_1 x + b_1) … + b_L)`.

mod activation;
mod backward;
mod bn;
pub(crate) mod forward;
mod network;
mod weights;

pub use activation::Activation;
pub use backward::{backward, backward_batch, value_and_grad, Gradients, LayerGrads};
pub use bn::{batch_stats, bn_apply, bn_distance_check, BnMode};
pub use forward::{forward, forward_with_mode, ForwardTrace};
pub use network::{init, BnParams, Layer, Network};
pub use weights::{load_weights, read_weights, save_weights, write_weights, FORMAT_VERSION, MAGIC};
