//! Posterior summarization for Gaussian mixing measures.
//!
//! Given Monte Carlo samples `G₁,…,G_M` of a random mixing measure, this
//! crate picks the sample minimizing the approximate posterior expected
//! loss `(1/M) Σ_m D(G_m, Ĝ)` where `D` is a sliced optimal-transport
//! distance, and derives the induced density estimate and MAP partition.
//!
//! The pieces:
//!
//! - [`linalg`]: symmetric eigendecompositions, SPD matrix log/sqrt,
//!   sphere sampling, generalized eigenvalues.
//! - [`measures`]: mixing measures, 1D pushforwards, label vectors, data
//!   matrices, and their file formats.
//! - [`ot`]: exact discrete optimal transport (network simplex), Gaussian
//!   W₂, Mixture Wasserstein, and the exact 1D quantile sweep.
//! - [`sliced`]: the three sliced metrics (`sw`, `mix_sw`, `smix_w`) with
//!   shared Monte Carlo machinery.
//! - [`partition`]: Binder / VI / one-minus-ARI losses and the
//!   partition-first greedy baseline.
//! - [`gibbs`]: blocked Gibbs sampler for the conjugate truncated-DP
//!   Gaussian mixture.
//! - [`summarize`]: the distance matrix, greedy selection, MAP partition.
//! - [`evaluate`]: density grids, TV and sliced distances on grids, the
//!   experiment tables, and the four-component simulation.
//! - [`datasets`]: the bundled Old Faithful data and test fixtures.
//!
//! With the `parallel` feature (default) the data-parallel inner loops run
//! on rayon; without it everything runs sequentially with bit-identical
//! results (see [`para`]).

pub mod datasets;
pub mod error;
pub mod evaluate;
pub mod gibbs;
pub mod linalg;
pub mod measures;
pub mod ot;
pub mod para;
pub mod partition;
pub mod sliced;
pub mod summarize;

pub use error::{Error, Result};
