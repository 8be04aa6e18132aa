//! Siamese loss stack, hand-derived gradients, Adam and the toy trainer.

mod adam;
mod backprop;
mod gradcheck;
mod losses;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use backprop::{
    flatten_grads, flatten_model, grad_total_loss, load_model, param_count, GruLayerGrads,
    ModelGrads,
};
pub use gradcheck::{check_point, gradient_check, GradCheckReport, TermReport, FD_STEP};
pub use losses::{
    contrastive, cross_entropy, global_loss, local_id, local_verif, total_loss, LossTerm,
    LossWeights, TrainPair,
};
pub use train::{train_toy, LabeledSequence, TrainConfig};
