//! The deblurring network: refinement stages, final refinement block,
//! angle detector, the two end-to-end pipelines and the checkpoint format.

mod blocks;
mod checkpoint;
mod config;
mod init;
mod pipeline;

pub use blocks::{
    angle_detector, cascade, final_refinement, refinement_stage, resblock_forward, AngleOutput,
    THETA_FLOOR,
};
pub use checkpoint::{Checkpoint, TrainingMetadata, FORMAT_VERSION, MAGIC};
pub use config::{NetworkConfig, Variant};
pub use init::{init_params, layer_specs, param_count, LayerSpec, KERNEL};
pub use pipeline::{
    forward_ad, forward_base, forward_graph, inversion, observe, polar_to_tensor, tensor_to_polar,
    DeblurResult, GraphForward, Model,
};

#[cfg(test)]
mod tests;
