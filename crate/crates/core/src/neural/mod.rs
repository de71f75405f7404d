//! Minimal dense numerical stack: matrices, MLPs, the weighted GCN and the
//! Adam optimizer, all in double precision with manually derived
//! reverse-mode gradients.

mod adam;
mod checkpoint;
mod gcn;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gcn::{gcn_backward, gcn_forward, GcnDims, GcnGrads, GcnModel, GcnTape};
pub use mlp::{Activation, Dense, Mat, Mlp, MlpTrace};
