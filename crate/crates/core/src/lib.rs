//! A moving average with internal degrees of freedom.
//!
//! Trades are accumulated into exponentially weighted polynomial moments.
//! From them the execution-flow operator `<Q_j|I|Q_k>` and the Gram matrix
//! `<Q_j|Q_k>` are assembled; the state of maximal execution flow of this
//! pencil supplies `psi^2`, an averaging weight that relocates instantly
//! when a stronger burst of trading appears, unlike a plain exponential
//! moving average.
//!
//! ```
//! use psima::{Basis, Engine, EngineConfig, Tick};
//!
//! let mut engine = Engine::new(EngineConfig::new(6, 60.0, Basis::ShiftedLegendre)).unwrap();
//! for i in 0..200 {
//!     engine.push(Tick::new(i as f64, 100.0, 10.0).unwrap()).unwrap();
//! }
//! let s = engine.evaluate().unwrap();
//! assert!((s.p_ih - 100.0).abs() < 1e-9);
//! ```

pub mod basis;
pub mod engine;
pub mod error;
pub mod gev;
pub mod indicators;
pub mod ingest;
pub mod measure;
pub mod operators;
pub mod selftest;
pub mod synth;

pub use basis::{evaluate_all, linearization, matrix_from_moments, Basis, LinearizationTable};
pub use engine::{run_series, Engine, EngineConfig, Grid, MomentPath};
pub use error::{Error, Result};
pub use gev::{rayleigh, solve_pencil, SpectralDecomposition, WaveFunction};
pub use indicators::{evaluate_at, IndicatorSample};
pub use measure::{
    omega, resample_full, x_of_t, IncrementalMoments, MeasureKind, MomentSet, MomentVector, Tick,
};
pub use operators::{flow, gram, weighted, OperatorMatrix};
