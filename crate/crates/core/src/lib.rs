//! General graph random features: random-walk estimators of power series of
//! a graph's adjacency matrix, with an exact dense oracle, a Monte Carlo graph
//! ODE solver, kernel clustering and regression, and a learnable modulation
//! function.

pub mod applications;
pub mod datasets;
pub mod dense;
pub mod error;
pub mod estimator;
pub mod generate;
pub mod graph;
pub mod modulation;
pub mod neural;
pub mod ode;
pub mod oracle;
pub mod walker;

pub use applications::{
    angular_error, clustering_error, kernel_kmeans, kernel_kmeans_restarts,
    kernel_regression_predict, kernel_regression_predict_dense, random_mask, KMeansResult,
};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use estimator::{estimate_gram, kernel_matvec, relative_frobenius_error};
pub use graph::{
    laplacian_as_operator, load_edge_list, normalized_adjacency, spectral_radius, AffineOperator,
    Graph, SpectralRadius,
};
pub use modulation::{
    closed_form_modulation, convolve, min_batch_size, rademacher_bound, symmetric_from_coeffs,
    symmetric_modulation, taylor_coeffs, CoeffSeq, KernelKind, KernelSpec, ModulationFn,
    ModulationSource,
};
pub use neural::{
    implied_coefficients, train_modulation, ModParams, NeuralModParams, TrainConfig, TrainLoss,
    TrainResult,
};
pub use ode::{simulate_exact, simulate_grf, Drive, GrfOdeConfig, OdeProblem};
pub use oracle::{exact_kernel, normalized_kernel, taylor_kernel};
pub use walker::{
    sample_feature_pair, sample_features, sample_length_features, FeatureMatrix,
    LengthFeatureTensor, WalkConfig,
};
