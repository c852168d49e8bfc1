//! Outlier correlation search over ±1 vectors.
//!
//! Columns are compressed into signed block aggregates of sampled
//! tensor-power coordinates; one integer matrix product over the compressed
//! matrices flags block pairs that likely contain an outlier, and only those
//! blocks are scanned exactly.

pub mod apps;
pub mod boolmat;
pub mod corrjoin;
pub mod error;
pub mod matmul;
pub mod numeric;
pub mod params;
pub mod rng;
pub mod tradeoff;
pub mod workbench;

pub use boolmat::{BooleanMatrix, Column, IndexTuple};
pub use corrjoin::{find_outliers, find_outliers_two_level, OutlierPair};
pub use error::{Error, Result};
pub use params::{Mode, Overrides, Parameters};
