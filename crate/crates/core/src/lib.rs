//! Surrogate-assisted many-objective evolutionary search over a MobileNet-style
//! architecture space.
//!
//! The crate is organised bottom-up:
//!
//! - [`genome`]: the 22-integer architecture encoding, decoding and the
//!   analytic cost model (MAdds, parameters).
//! - [`operators`]: uniform crossover, discretised polynomial mutation and
//!   binary tournament mating selection.
//! - [`selection`]: domination, non-dominated sorting, Das-Dennis reference
//!   directions and reference-point survival.
//! - [`surrogate`]: Gaussian RBF regressors, the bootstrap RBF ensemble and
//!   Spearman rank correlation.
//! - [`search`]: the surrogate-driven inner evolutionary search.
//! - [`natloop`]: the outer archive / predictor / search / adaptation loop.
//! - [`evaluators`]: the evaluator contract with a synthetic supernet, analytic
//!   benchmarks and an external-process worker protocol.
//! - [`metrics`]: hypervolume, IGD and trade-off decision scores.
//! - [`bench`]: the benchmark studies (DTLZ1 selection comparison, Rosenbrock
//!   online versus offline surrogates).
//!
//! Data-parallel inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results never
//! depend on which path is compiled in.

pub mod bench;
pub mod error;
pub mod evaluators;
pub mod genome;
pub mod metrics;
pub mod natloop;
pub mod operators;
pub mod par;
pub mod rng;
pub mod search;
pub mod selection;
pub mod surrogate;

pub use error::{NatError, Result};
pub use genome::{CostModel, Genome, NetworkSpec, SearchSpaceConfig};
pub use selection::{ObjectiveVector, ReferenceDirectionSet};
