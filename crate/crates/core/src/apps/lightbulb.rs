use serde::{Deserialize, Serialize};

use super::{delta_from_epsilon, DEFAULT_OMEGA};
use crate::boolmat::{inner_product, BooleanMatrix};
use crate::corrjoin::{search_monochromatic, OutlierPair, Refinement, SearchOptions};
use crate::error::{Error, Result};
use crate::matmul::GemmConfig;
use crate::numeric::ip_threshold;
use crate::params::{make_parameters, Overrides, Parameters};
use crate::workbench::advised_dimension;

#[derive(Clone, Debug, PartialEq)]
pub struct LightbulbOptions {
    pub epsilon: f64,
    pub omega: f64,
    pub overrides: Overrides,
    pub threshold_constant: Option<f64>,
    /// Marked blocks of at most this many columns are scanned directly.
    pub cutoff: usize,
    pub gemm: GemmConfig,
}

impl Default for LightbulbOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            omega: DEFAULT_OMEGA,
            overrides: Overrides::default(),
            threshold_constant: None,
            cutoff: 64,
            gemm: GemmConfig::default(),
        }
    }
}

/// Derived thresholds and tradeoff constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightbulbSetup {
    pub delta: f64,
    pub tau: f64,
    pub delta_cap: f64,
    pub gamma: f64,
}

/// `delta` from `epsilon`, `tau = rho^(1/delta)`, `Delta = 1/(1 - delta)`,
/// `gamma = 1/(2 Delta + 1)`.
///
/// With `rho = 1` the background threshold is taken from `(d - 2)/d`, the
/// largest correlation below a duplicate.
pub fn lightbulb_setup(rho: f64, epsilon: f64, omega: f64, d: usize) -> Result<LightbulbSetup> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} must lie in (0, 1]"
        )));
    }
    let delta = delta_from_epsilon(epsilon, omega)?;
    let base = if rho < 1.0 {
        rho
    } else {
        if d < 3 {
            return Err(Error::InvalidParameter(format!(
                "d = {d} is too small for rho = 1"
            )));
        }
        (d as f64 - 2.0) / d as f64
    };
    let delta_cap = 1.0 / (1.0 - delta);
    Ok(LightbulbSetup {
        delta,
        tau: base.powf(1.0 / delta),
        delta_cap,
        gamma: 1.0 / (2.0 * delta_cap + 1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightbulbOutcome {
    pub pair: OutlierPair,
    pub setup: LightbulbSetup,
    pub params: Parameters,
    pub marks_per_iteration: Vec<usize>,
    /// Distinct pairs listed before picking the strongest.
    pub candidates: usize,
    pub warnings: Vec<String>,
}

/// Find the pair of distinct columns with the largest `|ip| >= rho d`.
pub fn solve_lightbulb(
    data: &BooleanMatrix,
    rho: f64,
    opts: &LightbulbOptions,
    seed: u64,
) -> Result<LightbulbOutcome> {
    let (n, d) = (data.n(), data.d());
    let setup = lightbulb_setup(rho, opts.epsilon, opts.omega, d)?;
    let mut warnings = Vec::new();
    if (d as f64) < advised_dimension(n, rho) {
        warnings.push(format!(
            "d = {d} is below the advised {:.1}; the planted pair may not stand out",
            advised_dimension(n, rho)
        ));
    }
    let base_rho = rho.min(1.0 - 2.0 / d as f64).max(f64::MIN_POSITIVE);
    let mut params = make_parameters(
        n,
        d,
        base_rho,
        setup.tau,
        setup.gamma,
        setup.delta_cap,
        &opts.overrides,
    )?;
    params.rho = rho;
    if let Some(c) = opts.threshold_constant {
        params.threshold_constant = c;
    }
    params.validate()?;
    let search_opts = SearchOptions {
        gemm: opts.gemm,
        refinement: Refinement::Nested {
            exponent: setup.gamma,
            cutoff: opts.cutoff,
            max_depth: None,
        },
    };
    let report = search_monochromatic(data, &params, seed, &search_opts)?;
    let threshold = ip_threshold(rho, d);
    let best = report
        .pairs
        .iter()
        .filter(|p| p.j1 != p.j2)
        .max_by_key(|p| (p.ip.abs(), std::cmp::Reverse((p.j1, p.j2))))
        .copied()
        .ok_or(Error::NoPairFound)?;
    let ip = inner_product(data.column(best.j1), data.column(best.j2))?;
    if ip != best.ip || ip.abs() < threshold {
        return Err(Error::NoPairFound);
    }
    Ok(LightbulbOutcome {
        pair: best,
        setup,
        params,
        marks_per_iteration: report.marks_per_iteration,
        candidates: report.pairs.len(),
        warnings,
    })
}
