//! Numerical laboratory for Colombeau generalized functions.
//!
//! Representative nets are sampled on a dyadic ε-grid and their asymptotics are
//! read off by log-log regression. On top of that layer sit mollifier
//! embeddings, generalized graphs, wavefront-set estimation, pullbacks by
//! c-bounded maps, a stationary-phase bound checker and two worked examples.
//!
//! The net layer is generic over [`Scalar`]; the numerical subsystems run in
//! `f64` through the aliases below.

pub mod embedding;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod microlocal;
pub mod nets;
pub mod pullback;
pub mod scalar;
pub mod statphase;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Net = nets::RepresentativeNet<f64>;
pub type Grid = nets::EpsilonGrid<f64>;
pub type NumberNet = nets::GeneralizedNumberNet<f64>;
pub type Class = nets::AsymptoticClass<f64>;
pub type NetF32 = nets::RepresentativeNet<f32>;
pub type GridF32 = nets::EpsilonGrid<f32>;
