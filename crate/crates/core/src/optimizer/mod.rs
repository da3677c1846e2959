//! Gradients, the annealed SGD training loop and the finite-difference check.

mod backward;
mod gradcheck;
mod train;

pub use backward::{anneal_mix, backward_full, classifier_ce_grad, GradientBundle};
pub use gradcheck::{
    gradient_check, gradient_check_with, relative_error, GradCheckConfig, GradCheckReport, GroupCheck, REL_ERROR_FLOOR,
};
pub use train::{lr_at, sgd_step, train, train_baseline, train_step, BaselineOutcome, TrainOutcome, TrainState};
