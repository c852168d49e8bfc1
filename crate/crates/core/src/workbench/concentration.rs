use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{is_perfect_square, isqrt};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub m: u64,
    pub s: u64,
    pub xi: f64,
    pub eta: f64,
    pub trials: usize,
    pub upper_bound: f64,
    pub lower_bound: f64,
    /// Whether `|xi|, |eta| >= s^(-1/4) ln s`, the precondition for the lower bound.
    pub lower_applies: bool,
    pub upper_violations: usize,
    pub lower_violations: usize,
}

impl ConcentrationReport {
    pub fn upper_rate(&self) -> f64 {
        self.upper_violations as f64 / self.trials.max(1) as f64
    }

    pub fn lower_rate(&self) -> f64 {
        self.lower_violations as f64 / self.trials.max(1) as f64
    }
}

/// `(upper, lower, lower_applies)` for the sampled Cartesian sum.
///
/// upper: `|xi eta| s + (|xi| + |eta|) s^(3/4) ln s + s^(1/2) (ln s)^2`
/// lower: `|xi eta| s - (|xi| + |eta|) s^(3/4) ln s + s^(1/2) (ln s)^2`
pub fn cartesian_bounds(s: u64, xi: f64, eta: f64) -> (f64, f64, bool) {
    let s = s as f64;
    let ln = s.ln();
    let main = (xi * eta).abs() * s;
    let mid = (xi.abs() + eta.abs()) * s.powf(0.75) * ln;
    let tail = s.sqrt() * ln * ln;
    let gate = s.powf(-0.25) * ln;
    (
        main + mid + tail,
        main - mid + tail,
        xi.abs() >= gate && eta.abs() >= gate,
    )
}

/// The balance closest to `xi` that a `±1` vector of length `len` can
/// realize, preferring the smaller magnitude, then the positive one, on ties.
pub fn nearest_feasible_balance(len: usize, xi: f64) -> f64 {
    let target = xi.clamp(-1.0, 1.0) * len as f64;
    let mut best = len as i64;
    let mut best_gap = f64::INFINITY;
    for sum in (-(len as i64)..=len as i64).rev().step_by(2) {
        let gap = (sum as f64 - target).abs();
        if gap < best_gap - 1e-12 || (gap <= best_gap + 1e-12 && sum.abs() < best.abs()) {
            best = sum;
            best_gap = gap;
        }
    }
    best as f64 / len as f64
}

/// Vector of length `len` with entry sum exactly `xi * len`.
fn balanced_vector(len: usize, xi: f64) -> Result<Vec<i8>> {
    if !(-1.0..=1.0).contains(&xi) {
        return Err(Error::InvalidParameter(format!(
            "balance {xi} must lie in [-1, 1]"
        )));
    }
    let negatives = (len as f64 - xi * len as f64) / 2.0;
    let rounded = negatives.round();
    if (negatives - rounded).abs() > 1e-9 {
        return Err(Error::Infeasible(format!(
            "balance {xi} needs sum {} over {len} entries of ±1",
            xi * len as f64
        )));
    }
    let negatives = rounded as usize;
    Ok((0..len)
        .map(|u| if u < negatives { -1 } else { 1 })
        .collect())
}

fn draw(len: usize, count: usize, rng: &mut rng::Rng) -> Vec<usize> {
    (0..count).map(|_| rng.gen_range(0..len)).collect()
}

/// `sum over (u, v) in s1 x s2 of x_u y_v`, factored as a product of sums.
fn product_statistic(x: &[i8], y: &[i8], s1: &[usize], s2: &[usize]) -> i64 {
    let sx: i64 = s1.iter().map(|&u| x[u] as i64).sum();
    let sy: i64 = s2.iter().map(|&v| y[v] as i64).sum();
    sx * sy
}

/// Monte Carlo check of the two-sided bound on sampled Cartesian sums.
/// Ties with a bound count as non-violations.
pub fn check_cartesian_concentration(
    m: u64,
    s: u64,
    xi: f64,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    for (name, v) in [("m", m), ("s", s)] {
        if v == 0 || !is_perfect_square(v) {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} must be a positive square"
            )));
        }
    }
    let len = isqrt(m) as usize;
    let root_s = isqrt(s) as usize;
    let x = balanced_vector(len, xi)?;
    let y = balanced_vector(len, eta)?;
    let (upper, lower, lower_applies) = cartesian_bounds(s, xi, eta);
    let (upper_violations, lower_violations) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, &[trial as u64]);
            let s1 = draw(len, root_s, &mut r);
            let s2 = draw(len, root_s, &mut r);
            let stat = product_statistic(&x, &y, &s1, &s2).abs() as f64;
            (
                (stat > upper) as usize,
                (lower_applies && stat < lower) as usize,
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ConcentrationReport {
        m,
        s,
        xi,
        eta,
        trials,
        upper_bound: upper,
        lower_bound: lower,
        lower_applies,
        upper_violations,
        lower_violations,
    })
}
