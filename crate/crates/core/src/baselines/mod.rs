//! Comparison methods: neighbour and low-rank imputation, total-variation
//! and fixed-Laplacian penalties on the factorization, and plain DMF.

mod fixed;
mod knn;
mod svd_impute;
mod tv;

pub use fixed::{
    group_laplacian, train_dmf, train_fixed_laplacian, train_tv, FixedLaplacians, LaplacianSource,
};
pub use knn::knn_impute;
pub use svd_impute::{svd_impute, SvdImpute};
pub use tv::{tv_value_and_grad, TvConfig};
