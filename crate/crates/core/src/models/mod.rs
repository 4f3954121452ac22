//! Differentiable binary classifiers, attack losses, saliency and training.

mod ensemble;
mod io;
mod loss;
mod network;
mod saliency;
mod train;

pub use self::ensemble::{ensemble_gradient, transformed_ensemble_gradient, SurrogateEnsemble};
pub use self::io::{decode_model, encode_model, load_model, save_model};
pub use self::loss::{
    cross_entropy, input_gradient, loss_misclassification, misclassification_gradient,
    ssim_penalty_gradient, total_loss, LossConfig,
};
pub use self::network::{softmax, Architecture, Classifier, Label, Params, NUM_CLASSES};
pub use self::saliency::{saliency_map, SaliencyMask};
pub use self::train::{evaluate_accuracy, initialize, train_detector, LabeledImage, TrainConfig, TrainReport};
