//! Non-variational comparison models: weighted kNN and three neural baselines.

mod knn;
mod neural;

pub use knn::{knn_predict, KnnConfig, KnnPositioner};
pub use neural::{build_baseline, BaselineDocument, BaselineKind, BaselineModel, DEFAULT_DLPM_HIDDEN};
