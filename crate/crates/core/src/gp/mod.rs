//! Gaussian process regression: exact reference GP and the sparse variational model
//! used as a learned transition model.

mod csv_io;
mod dataset;
pub mod elbo;
pub mod exact;
pub mod io;
mod kernel;
mod svgp;
pub mod train;

pub use csv_io::{dataset_from_csv, dataset_load, dataset_save, dataset_to_csv};
pub use dataset::Dataset;
pub use elbo::{elbo, elbo_gradient, optimal_variational, ParamLayout};
pub use exact::{
    exact_gp_fit, exact_gp_nll, exact_gp_nll_gradient, exact_gp_predict, ExactGpPosterior,
};
pub use io::{model_from_str, model_load, model_save, model_to_string};
pub use kernel::KernelParams;
pub use svgp::{
    svgp_mean_jacobian, svgp_predict, SparseGp, SvgpModel, VariationalParams, DEFAULT_JITTER,
};
pub use train::{initial_model, svgp_train, train_from, TrainConfig, TrainReport};
