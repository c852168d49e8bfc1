//! Running-time exponents as functions of `x = log_tau(rho)`.
//!
//! `M(mu, nu)` bounds the exponent of multiplying an `n^mu x n^nu` matrix by
//! an `n^nu x n^mu` matrix. Values here are upper bounds built from the
//! square exponent `omega` and the rectangular exponent `alpha`; they are
//! reported without the `+ epsilon` slack.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OMEGA_BEST: f64 = 2.3728639;
pub const ALPHA_BEST: f64 = 0.30298;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentModel {
    pub omega: f64,
    pub alpha: f64,
}

impl ExponentModel {
    pub fn new(omega: f64, alpha: f64) -> Result<Self> {
        if !(2.0..=3.0).contains(&omega) {
            return Err(Error::InvalidParameter(format!(
                "omega = {omega} must lie in [2, 3]"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (0, 1]"
            )));
        }
        Ok(Self { omega, alpha })
    }

    /// The best known bounds.
    pub fn best_known() -> Self {
        Self {
            omega: OMEGA_BEST,
            alpha: ALPHA_BEST,
        }
    }

    /// The ideal case `omega = 2`, `alpha = 1`.
    pub fn ideal() -> Self {
        Self {
            omega: 2.0,
            alpha: 1.0,
        }
    }

    /// Non-fatal consistency problems, currently only `omega > 3 - alpha`.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.omega > 3.0 - self.alpha + 1e-12 {
            w.push(format!(
                "omega = {} exceeds 3 - alpha = {}; rectangular bounds may be inconsistent",
                self.omega,
                3.0 - self.alpha
            ));
        }
        w
    }
}

fn check_positive(mu: f64, nu: f64) -> Result<()> {
    if mu > 0.0 && nu > 0.0 && mu.is_finite() && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exponent arguments must be positive, got ({mu}, {nu})"
        )))
    }
}

/// Splitting bound: `(omega-1) mu + nu` when `mu <= nu`, else
/// `2 mu + (omega-2) nu`.
pub fn mm_exponent_coarse(mu: f64, nu: f64, model: &ExponentModel) -> Result<f64> {
    check_positive(mu, nu)?;
    Ok(if mu <= nu {
        (model.omega - 1.0) * mu + nu
    } else {
        2.0 * mu + (model.omega - 2.0) * nu
    })
}

/// Upper bound on `M(mu, nu)`. For `nu <= mu` this is `2 mu` on the plateau
/// `nu <= alpha mu` and otherwise the smaller of the splitting bound and the
/// linear interpolation between `(alpha mu, 2 mu)` and `(mu, omega mu)`.
/// For `nu > mu` only the splitting bound applies.
pub fn mm_exponent(mu: f64, nu: f64, model: &ExponentModel) -> Result<f64> {
    let coarse = mm_exponent_coarse(mu, nu, model)?;
    if nu > mu {
        return Ok(coarse);
    }
    let a = model.alpha;
    if nu <= a * mu {
        return Ok(2.0 * mu);
    }
    let interp = 2.0 * mu + (model.omega - 2.0) * mu * (nu - a * mu) / (mu - a * mu);
    Ok(coarse.min(interp))
}

/// `max(1 - gamma + M(Delta gamma, gamma), M(1 - gamma, 2 Delta gamma))`.
pub fn detection_exponent(gamma: f64, delta_cap: f64, model: &ExponentModel) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must lie in (0, 1)"
        )));
    }
    if !(delta_cap >= 1.0 && delta_cap.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta_cap} must be >= 1"
        )));
    }
    let first = 1.0 - gamma + mm_exponent(delta_cap * gamma, gamma, model)?;
    let second = mm_exponent(1.0 - gamma, 2.0 * delta_cap * gamma, model)?;
    Ok(first.max(second))
}

/// `Delta = 1 / (1 - x)`.
pub fn delta_for(log_tau_rho: f64) -> f64 {
    1.0 / (1.0 - log_tau_rho)
}

/// `gamma = 1 / (2 Delta + 1)`.
pub fn gamma_square(delta_cap: f64) -> f64 {
    1.0 / (2.0 * delta_cap + 1.0)
}

/// `gamma = alpha / (2 Delta + alpha)`.
pub fn gamma_rectangular(delta_cap: f64, alpha: f64) -> f64 {
    alpha / (2.0 * delta_cap + alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryExponents {
    pub cor1: f64,
    pub cor2: f64,
    pub valiant: f64,
    pub listing1: f64,
    pub listing2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelExponents {
    /// Square-multiplication variant, the `q n^(.)` term.
    pub cor5_list1: f64,
    /// Square-multiplication variant, the `q d n^(.)` term.
    pub cor5_list2: f64,
    /// Rectangular variant, the `q n^(.)` term.
    pub cor6_list1: f64,
    /// Rectangular variant, the `q d n^(.)` term.
    pub cor6_list2: f64,
}

fn check_log_ratio(x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "log_tau(rho) = {x} must lie in [0, 1)"
        )))
    }
}

pub fn corollary_exponents(x: f64, model: &ExponentModel) -> Result<CorollaryExponents> {
    check_log_ratio(x)?;
    let (w, a) = (model.omega, model.alpha);
    let r = a * (1.0 - x);
    Ok(CorollaryExponents {
        cor1: 2.0 * w / (3.0 - x),
        cor2: 4.0 / (2.0 + r),
        valiant: (5.0 - w) / (4.0 - w) + w * x,
        listing1: 2.0 * (1.0 - x) / (3.0 - x),
        listing2: 2.0 * r / (2.0 + r),
    })
}

pub fn two_level_exponents(x: f64, model: &ExponentModel) -> Result<TwoLevelExponents> {
    check_log_ratio(x)?;
    let (w, a) = (model.omega, model.alpha);
    let r = a * (1.0 - x);
    let sq = (3.0 - x).powi(2);
    let rect = (2.0 + r).powi(2);
    Ok(TwoLevelExponents {
        cor5_list1: 2.0 * w * (1.0 - x) / sq,
        cor5_list2: 2.0 * (1.0 - x).powi(2) / sq,
        cor6_list1: 4.0 * r / rect,
        cor6_list2: 2.0 * r * r / rect,
    })
}

pub const CSV_HEADER: &str =
    "log_tau_rho,cor1_detect,cor2_detect,valiant_detect,cor1_list,cor2_list,cor5_list,cor6_list2";

/// Evenly spaced grid `0, 1/points, ..., (points-1)/points`.
pub fn default_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / points as f64).collect()
}

/// One CSV row per grid point, six decimals.
pub fn emit_curves<W: Write>(model: &ExponentModel, grid: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for &x in grid {
        let c = corollary_exponents(x, model)?;
        let t = two_level_exponents(x, model)?;
        writeln!(
            out,
            "{x:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            c.cor1, c.cor2, c.valiant, c.listing1, c.listing2, t.cor5_list1, t.cor6_list2
        )?;
    }
    Ok(())
}
