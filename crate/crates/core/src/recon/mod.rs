//! Variational and learned iterative reconstruction.

pub mod exchange;
pub mod learned;
pub mod tv;

pub use exchange::{export_iterate, import_update, CommandRunner, IterateMeta, UpdateRunner};
pub use learned::{
    gradient_descent, learned_reconstruct, ExternalUpdate, GdParams, IterativeState,
    UpdateOperator, DEFAULT_ITERATES,
};
pub use tv::{
    alpha_sweep, estimate_lipschitz, log_grid, total_variation, tv_prox, tv_reconstruct,
    SweepResult, TVParams,
};
