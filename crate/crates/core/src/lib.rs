//! Kernel herding quadrature.
//!
//! Nodes are chosen greedily from a fixed candidate set so that the
//! equal-, line-search- or fully-corrective-weighted rule `Σ ωᵢ K(xᵢ, ·)`
//! approaches the kernel mean embedding `μ_K` of a target measure. The
//! accelerated drivers replace the single-vertex direction by a conic
//! combination of atoms built by matching pursuit or greedy cos maximization.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.
//!
//! ```
//! use std::sync::Arc;
//! use kernel_herding::bench::generate_candidates;
//! use kernel_herding::herding::{herd, Approximator, HerdingConfig, Variant};
//! use kernel_herding::kernels::{analytic_embedding, BaseMeasure};
//! use kernel_herding::{CandidatePool, KernelSpec};
//!
//! let kernel = KernelSpec::gaussian(2).unwrap();
//! let emb = analytic_embedding(&kernel, BaseMeasure::TruncatedGaussian).unwrap();
//! let pts = generate_candidates(kernel.domain(), BaseMeasure::TruncatedGaussian, 500, 7).unwrap();
//! let pool = Arc::new(CandidatePool::new(&emb, pts).unwrap());
//!
//! let cfg = HerdingConfig::new(Variant::Accelerated(Approximator::Gcos), 20);
//! let (rule, trace) = herd(&cfg, pool).unwrap();
//! assert!((rule.total_weight() - 1.0).abs() < 1e-10);
//! assert!(trace.rows.last().unwrap().mmd < trace.rows[0].mmd);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod embedding;
pub mod error;
pub mod gradapprox;
pub mod herding;
pub mod kernels;
pub mod linalg;
pub mod residual;
pub mod scalar;
pub mod simplexopt;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KernelSpec = kernels::KernelSpec<f64>;
pub type Domain = kernels::Domain<f64>;
pub type MeanEmbedding = kernels::MeanEmbedding<f64>;
pub type DiscreteMeasure = embedding::DiscreteMeasure<f64>;
pub type GramCache = embedding::GramCache<f64>;
pub type CandidatePool = residual::CandidatePool<f64>;
pub type ResidualState = residual::ResidualState<f64>;
pub type Direction = gradapprox::Direction<f64>;
pub type CosStepScalars = gradapprox::CosStepScalars<f64>;
pub type QuadraticProblem = simplexopt::QuadraticProblem<f64>;
pub type HerdingConfig = herding::HerdingConfig<f64>;
pub type IterationTrace = herding::IterationTrace<f64>;
