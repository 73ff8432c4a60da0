//! Score-based structure learning for bow-free acyclic path diagrams (BAPs):
//! linear Gaussian models over mixed graphs with directed edges for direct
//! effects and bidirected edges for correlated errors.

pub mod effects;
pub mod equivalence;
pub mod error;
pub mod graph;
pub mod io;
pub mod model;
pub mod ricf;
pub mod rng;
pub mod score;
pub mod search;
pub mod simulation;

pub use error::{Error, Result};
pub use graph::{GraphClass, MixedGraph, Moves, Trek};
pub use model::Parameters;
pub use ricf::{ricf, FitResult, RicfOptions, SampleCovariance};
pub use score::{ScoreCache, Scorer};
pub use search::{greedy_search, SearchConfig};
