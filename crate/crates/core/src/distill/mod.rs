//! Teacher-student distillation: the frozen point-cloud encoder, dataset
//! collection with the fixed task mix, and behavior-cloning training.

mod bc;
mod dataset;
mod encoder;

pub use bc::{bc_train, BcConfig, BcResult};
pub use dataset::{
    collect_dataset, mix_counts, DatasetStats, DistillDataset, Episode, TASK_MIX,
};
pub use encoder::{FrozenEncoder, ENCODER_SEED, ENC_HIDDEN, ENC_OUT, POINT_DIM};
