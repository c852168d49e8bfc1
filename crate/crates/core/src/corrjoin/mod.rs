//! Compress, detect and list.
//!
//! Each iteration partitions the (padded) columns into blocks of size `t`,
//! compresses every block of `A` and `B` into `s` sampled tensor-power
//! coordinates with random signs, multiplies the compressed matrices once,
//! and scans only the block pairs whose score reaches the marking threshold.
//! Listing re-checks every candidate, so output pairs always satisfy
//! `|ip| >= rho * d`.

mod compress;
mod detect;
mod mono;
mod plan;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compress::{compress, CompressedMatrix};
pub use detect::{detect, detect_with, detection_scores, list_outliers, MarkedPair};
pub use mono::{reduce_monochromatic, search_monochromatic, MonoInstance};
pub use plan::{setup_iteration, IterationPlan};

use crate::boolmat::BooleanMatrix;
use crate::error::{Error, Result};
use crate::matmul::GemmConfig;
use crate::numeric::ceil_tol;
use crate::params::Parameters;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutlierPair {
    pub j1: usize,
    pub j2: usize,
    pub ip: i64,
}

/// What to do with a marked block pair.
#[derive(Clone, Debug, PartialEq)]
pub enum Refinement {
    /// Scan all `t^2` column pairs.
    Direct,
    /// Run the detector again on the two blocks with block size
    /// `ceil(t^exponent)`, scanning directly once `t <= cutoff` or after
    /// `max_depth` nested levels.
    Nested {
        exponent: f64,
        cutoff: usize,
        max_depth: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub gemm: GemmConfig,
    pub refinement: Refinement,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            gemm: GemmConfig::default(),
            refinement: Refinement::Direct,
        }
    }
}

impl SearchOptions {
    pub fn two_level(kappa: f64) -> Self {
        Self {
            refinement: Refinement::Nested {
                exponent: kappa,
                cutoff: 1,
                max_depth: Some(1),
            },
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub pairs: Vec<OutlierPair>,
    /// Top-level marked block pairs per iteration.
    pub marks_per_iteration: Vec<usize>,
    pub n_padded: usize,
    pub seed: u64,
}

pub fn find_outliers(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    seed: u64,
) -> Result<Vec<OutlierPair>> {
    Ok(search(a, b, params, seed, &SearchOptions::default())?.pairs)
}

pub fn find_outliers_two_level(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    kappa: f64,
    seed: u64,
) -> Result<Vec<OutlierPair>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {kappa} must lie in (0, 1)"
        )));
    }
    Ok(search(a, b, params, seed, &SearchOptions::two_level(kappa))?.pairs)
}

/// Full run: `params.iterations` rounds, union of the listed pairs.
pub fn search(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    seed: u64,
    opts: &SearchOptions,
) -> Result<SearchReport> {
    params.validate()?;
    if let Refinement::Nested { exponent, .. } = opts.refinement {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nested exponent {exponent} must lie in (0, 1)"
            )));
        }
    }
    let cap = params.mark_cap.unwrap_or_else(|| a.n().max(b.n()));
    let (pairs, marks, n_padded) = search_level(a, b, params, seed, opts, 0, Some(cap))?;
    Ok(SearchReport {
        pairs: pairs.into_iter().collect(),
        marks_per_iteration: marks,
        n_padded,
        seed,
    })
}

fn pad_common(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    t: usize,
) -> Result<(BooleanMatrix, BooleanMatrix)> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            left: a.d(),
            right: b.d(),
        });
    }
    let n_padded = a.n().max(b.n()).div_ceil(t) * t;
    Ok((a.pad_to(n_padded), b.pad_to(n_padded)))
}

type LevelResult = (BTreeSet<OutlierPair>, Vec<usize>, usize);

fn search_level(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    seed: u64,
    opts: &SearchOptions,
    depth: usize,
    cap: Option<usize>,
) -> Result<LevelResult> {
    let (a, b) = pad_common(a, b, params.t)?;
    let mut pairs = BTreeSet::new();
    let mut marks_per_iteration = Vec::with_capacity(params.iterations);
    for iteration in 0..params.iterations {
        let plan = setup_iteration(
            a.n_padded(),
            a.d(),
            params,
            rng::derive(seed, &[iteration as u64]),
        )?;
        let hat_a = compress(&a, &plan, &plan.alpha)?;
        let hat_b = compress(&b, &plan, &plan.beta)?;
        let marks = detect_with(&hat_a, &hat_b, params, &opts.gemm)?;
        if let Some(cap) = cap {
            if marks.len() > cap {
                return Err(Error::MarkCapExceeded {
                    iteration,
                    marks: marks.len(),
                    cap,
                });
            }
        }
        marks_per_iteration.push(marks.len());
        pairs.extend(refine(&a, &b, params, &plan, &marks, opts, depth)?);
    }
    Ok((pairs, marks_per_iteration, a.n_padded()))
}

fn refine(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    plan: &IterationPlan,
    marks: &[MarkedPair],
    opts: &SearchOptions,
    depth: usize,
) -> Result<Vec<OutlierPair>> {
    let Refinement::Nested {
        exponent,
        cutoff,
        max_depth,
    } = opts.refinement
    else {
        return list_outliers(a, b, plan, marks, params.rho);
    };
    let t = params.t;
    let sub_t = ceil_tol((t as f64).powf(exponent)) as usize;
    if t <= cutoff || sub_t <= 1 || sub_t >= t || max_depth.is_some_and(|m| depth >= m) {
        return list_outliers(a, b, plan, marks, params.rho);
    }
    let sub_params = Parameters {
        t: sub_t,
        mark_cap: None,
        ..params.clone()
    };
    let found: Vec<Vec<OutlierPair>> = marks
        .par_iter()
        .map(|m| -> Result<Vec<OutlierPair>> {
            let cols_a: Vec<usize> = plan
                .block(m.k1)
                .iter()
                .copied()
                .filter(|&j| j < a.n())
                .collect();
            let cols_b: Vec<usize> = plan
                .block(m.k2)
                .iter()
                .copied()
                .filter(|&j| j < b.n())
                .collect();
            if cols_a.is_empty() || cols_b.is_empty() {
                return Ok(Vec::new());
            }
            let sub_a = a.select_columns(&cols_a)?;
            let sub_b = b.select_columns(&cols_b)?;
            let sub_seed = rng::derive(plan.seed, &[m.k1 as u64, m.k2 as u64]);
            let (pairs, _, _) =
                search_level(&sub_a, &sub_b, &sub_params, sub_seed, opts, depth + 1, None)?;
            Ok(pairs
                .into_iter()
                .map(|p| OutlierPair {
                    j1: cols_a[p.j1],
                    j2: cols_b[p.j2],
                    ip: p.ip,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(found.concat())
}

/// Outcome of the detection-only variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// True when some iteration marked at least one block pair.
    pub signalled: bool,
    pub marks_per_iteration: Vec<usize>,
}

/// Run setup, compression and detection only. A pair above `rho` is
/// signalled with the per-iteration probability of the full search; a
/// signal without an outlier requires background pairs above `tau`.
pub fn decide(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    params: &Parameters,
    seed: u64,
    gemm: &GemmConfig,
) -> Result<Decision> {
    params.validate()?;
    let (a, b) = pad_common(a, b, params.t)?;
    let mut marks_per_iteration = Vec::with_capacity(params.iterations);
    for iteration in 0..params.iterations {
        let plan = setup_iteration(
            a.n_padded(),
            a.d(),
            params,
            rng::derive(seed, &[iteration as u64]),
        )?;
        let hat_a = compress(&a, &plan, &plan.alpha)?;
        let hat_b = compress(&b, &plan, &plan.beta)?;
        marks_per_iteration.push(detect_with(&hat_a, &hat_b, params, gemm)?.len());
    }
    Ok(Decision {
        signalled: marks_per_iteration.iter().any(|&m| m > 0),
        marks_per_iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolmat::inner_product;

    fn oracle(a: &BooleanMatrix, b: &BooleanMatrix, rho: f64) -> Vec<OutlierPair> {
        let mut out = Vec::new();
        for j1 in 0..a.n() {
            for j2 in 0..b.n() {
                let ip = inner_product(a.column(j1), b.column(j2)).unwrap();
                if ip.abs() as f64 >= rho * a.d() as f64 {
                    out.push(OutlierPair { j1, j2, ip });
                }
            }
        }
        out
    }

    fn strong(t: usize, iterations: usize) -> Parameters {
        Parameters::explicit(0.9, 0.2, t, 2, 4096, iterations)
            .unwrap()
            .with_threshold_constant(0.5)
    }

    fn planted(n: usize, d: usize, seed: u64) -> (BooleanMatrix, BooleanMatrix) {
        let a = BooleanMatrix::random(d, n, &mut rng::stream(seed, &[1])).unwrap();
        let mut b = BooleanMatrix::random(d, n, &mut rng::stream(seed, &[2])).unwrap();
        b.copy_column_from(n / 3, &a, n / 2);
        (a, b)
    }

    #[test]
    fn finds_planted_duplicate_and_nothing_else() {
        let (a, b) = planted(64, 256, 3);
        let params = strong(4, 4);
        let got = find_outliers(&a, &b, &params, 1).unwrap();
        assert_eq!(got, oracle(&a, &b, 0.9));
        assert_eq!(
            got,
            vec![OutlierPair {
                j1: 32,
                j2: 21,
                ip: 256
            }]
        );
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let (a, b) = planted(96, 128, 4);
        let params = strong(8, 3).with_mark_cap(Some(1000));
        let run = |workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| search(&a, &b, &params, 9, &SearchOptions::default()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn uneven_sides_are_padded_together() {
        let a = BooleanMatrix::random(128, 10, &mut rng::stream(5, &[])).unwrap();
        let mut b = BooleanMatrix::random(128, 23, &mut rng::stream(6, &[])).unwrap();
        b.copy_column_from(22, &a, 9);
        let params = strong(4, 4);
        let report = search(&a, &b, &params, 2, &SearchOptions::default()).unwrap();
        assert_eq!(report.n_padded, 24);
        assert_eq!(
            report.pairs,
            vec![OutlierPair {
                j1: 9,
                j2: 22,
                ip: 128
            }]
        );
    }

    #[test]
    fn two_level_matches_single_level_on_strong_signal() {
        let (a, b) = planted(128, 256, 8);
        let params = strong(16, 3);
        let single = find_outliers(&a, &b, &params, 4).unwrap();
        let nested = find_outliers_two_level(&a, &b, &params, 0.5, 4).unwrap();
        assert_eq!(single, oracle(&a, &b, 0.9));
        assert_eq!(nested, single);
        // Unit blocks leave nothing for a second level to split.
        let unit = strong(1, 1);
        assert_eq!(
            find_outliers_two_level(&a, &b, &unit, 0.5, 4).unwrap(),
            find_outliers(&a, &b, &unit, 4).unwrap()
        );
        assert!(find_outliers_two_level(&a, &b, &params, 1.0, 4).is_err());
    }

    #[test]
    fn mark_cap_aborts() {
        let a = BooleanMatrix::from_fn(32, 16, |_, _| false).unwrap();
        let params = Parameters::explicit(0.5, 0.2, 2, 2, 64, 1)
            .unwrap()
            .with_mark_cap(Some(3));
        assert!(matches!(
            find_outliers(&a, &a, &params, 1),
            Err(Error::MarkCapExceeded { cap: 3, .. })
        ));
    }

    #[test]
    fn decision_variant() {
        let (a, b) = planted(64, 256, 3);
        let params = strong(4, 4);
        assert!(
            decide(&a, &b, &params, 1, &GemmConfig::default())
                .unwrap()
                .signalled
        );
        let c = BooleanMatrix::random(256, 64, &mut rng::stream(77, &[])).unwrap();
        assert!(
            !decide(&a, &c, &params, 1, &GemmConfig::default())
                .unwrap()
                .signalled
        );
    }
}
