//! Conditional mean and variance of a Brownian path on [0, 1] given any
//! subset of its close, high and low.
//!
//! Everything here is `no_std` (with `alloc`) and free of global state.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod close_high;
pub mod curve;
pub mod error;
pub mod extrema;
pub mod gaussian;
pub mod hlc;
pub mod params;
pub mod quadrature;
pub mod series;
pub mod volatility;

pub use curve::{ConditionalCurve, MomentTriple};
pub use error::{Error, Result};
pub use extrema::{HighCloseStat, HighLowCloseStat};
pub use gaussian::Variance;
pub use params::{ModelParams, SeriesControl, TimeGrid};
pub use quadrature::QuadratureControl;
pub use volatility::{OhlcBar, VolEstimate, VolMethod, VolTimeMap};
