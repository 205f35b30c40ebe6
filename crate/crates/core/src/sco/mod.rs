//! Projected SGD over label-private gradient estimates.

mod data;
mod domain;
mod loss;
mod risk;
mod train;

pub use data::{
    read_feature_table, read_records, resolve_features, write_records, DataPoint, LabelStore,
    SanitizedRecord,
};
pub use domain::{project_ball, ParameterDomain};
pub use loss::{check_gradient_consistency, check_lipschitz, ConvexLoss, SoftmaxLoss};
pub use risk::{excess_risk_montecarlo, DataSampler, RiskEstimate};
pub use train::{
    learning_rate, learning_stage, non_private_learning_rate, projected_sgd_bound,
    randomize_labels, risk_upper_bound_rate, train, train_non_private, GradientStats, SgdState,
    TrainConfig, TrainResult,
};
