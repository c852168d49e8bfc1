//! Pipelines built on the outlier search: the light bulb problem, learning
//! sparse parities with noise, and orthogonal vectors.

mod lightbulb;
mod ov;
mod parity;

pub use lightbulb::{
    lightbulb_setup, solve_lightbulb, LightbulbOptions, LightbulbOutcome, LightbulbSetup,
};
pub use ov::{
    brute_force_ov, gadget_u, gadget_v, gen_ov, ov_transform, read_ov, solve_ov, write_ov,
    OvInstance, OvOptions, OvOutcome, OvTransform,
};
pub use parity::{
    advised_examples, build_split_lists, gen_parity, read_parity, solve_parity, write_parity,
    ExampleSource, ParityExample, ParityInstance, ParityOptions, ParityOutcome, ParitySource,
    SplitLists,
};

use crate::error::{Error, Result};

/// Default square matrix multiplication exponent used to shape `delta`.
pub use crate::tradeoff::OMEGA_BEST as DEFAULT_OMEGA;

/// `delta = 9 eps / (2 omega + 3 eps)`, for `0 < eps < omega / 3`.
pub fn delta_from_epsilon(epsilon: f64, omega: f64) -> Result<f64> {
    if !(2.0..=3.0).contains(&omega) {
        return Err(Error::InvalidParameter(format!(
            "omega = {omega} must lie in [2, 3]"
        )));
    }
    if !(epsilon > 0.0 && epsilon < omega / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in (0, omega / 3)"
        )));
    }
    Ok(9.0 * epsilon / (2.0 * omega + 3.0 * epsilon))
}
