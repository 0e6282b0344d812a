//! Numerical kernels shared by every agent and baseline.
//!
//! The Lasso works on Gram sufficient statistics (`XᵀX`, `Xᵀy`, `yᵀy`) so an
//! agent can keep them up to date in `O(d²)` per observation and refit at any
//! time without touching the raw history.

mod lasso;
mod ridge;

pub use lasso::{
    lambda_max, lasso_fit, lasso_fit_gram, soft_threshold, CoordinateDescent, DesignMatrix, GramSystem,
    LassoConfig, LassoFit,
};
pub use ridge::RidgeState;
