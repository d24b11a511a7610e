//! Out-of-band 5G leakage into the 23.8 GHz water-vapor channel, traced
//! through radiance observations and a 3DVar analysis into a toy forecast.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assim;
pub mod config;
pub mod covariance;
pub mod error;
pub mod leakage;
pub mod ncg;
pub mod nwp;
pub mod radiance;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod selfcheck;

pub use error::{Error, Result};
