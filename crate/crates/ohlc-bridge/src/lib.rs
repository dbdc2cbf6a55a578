//! IO, Monte Carlo verification and the interpolation pipeline built on
//! [`ohlc_bridge_core`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use ohlc_bridge_core as core;

pub mod error;
pub mod fmt;
pub mod io;
pub mod mc;
pub mod pipeline;

pub use error::{Error, Result};
pub mod verify;
