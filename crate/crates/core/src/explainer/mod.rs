//! The globally shared edge mask: its parameterization, objective, training
//! with a frozen backbone, and the three-step strategy around it.

mod mask;
mod objective;
mod train;

pub use mask::{
    apply_mask, apply_mask_graph, load_mask, mask_from_text, mask_to_text, save_mask, EdgeMask,
};
pub use objective::{mask_losses, mask_regularizers, MaskLosses, Regularization};
pub use train::{
    recovery_auc, three_step_train, train_mask, train_mask_observed, ExplainConfig,
    MaskEpochRecord, MaskLog, MaskTarget, StepMetrics, ThreeStepOutcome, ThreeStepReport,
};
