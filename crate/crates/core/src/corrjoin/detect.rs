use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compress::CompressedMatrix;
use super::plan::IterationPlan;
use super::OutlierPair;
use crate::boolmat::{inner_product_unchecked, BooleanMatrix};
use crate::error::{Error, Result};
use crate::matmul::{gemm_int_with, GemmConfig, IntMatrix};
use crate::numeric::ip_threshold;
use crate::params::Parameters;

/// A block pair whose compressed score reached the marking threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarkedPair {
    pub k1: usize,
    pub k2: usize,
    pub score: i64,
}

/// The `(n/t) x (n/t)` product `hatA^T hatB`.
pub fn detection_scores(
    hat_a: &CompressedMatrix,
    hat_b: &CompressedMatrix,
    cfg: &GemmConfig,
) -> Result<IntMatrix> {
    if hat_a.rows() != hat_b.rows() {
        return Err(Error::DimensionMismatch {
            left: hat_a.rows(),
            right: hat_b.rows(),
        });
    }
    let product = gemm_int_with(hat_a.transposed(), &hat_b.transposed().transpose(), cfg)?;
    debug_assert!({
        let t = hat_a.transposed().bound().max(hat_b.transposed().bound());
        product.max_abs() <= hat_a.rows() as i64 * t * t
    });
    Ok(product)
}

pub fn detect(
    hat_a: &CompressedMatrix,
    hat_b: &CompressedMatrix,
    params: &Parameters,
) -> Result<Vec<MarkedPair>> {
    detect_with(hat_a, hat_b, params, &GemmConfig::default())
}

pub fn detect_with(
    hat_a: &CompressedMatrix,
    hat_b: &CompressedMatrix,
    params: &Parameters,
    cfg: &GemmConfig,
) -> Result<Vec<MarkedPair>> {
    let scores = detection_scores(hat_a, hat_b, cfg)?;
    Ok(marks_from_scores(&scores, params.marking_threshold()))
}

pub(crate) fn marks_from_scores(scores: &IntMatrix, threshold: f64) -> Vec<MarkedPair> {
    let mut marks = Vec::new();
    for k1 in 0..scores.rows() {
        for (k2, &v) in scores.row(k1).iter().enumerate() {
            if v.abs() as f64 >= threshold {
                marks.push(MarkedPair {
                    k1,
                    k2,
                    score: v.abs(),
                });
            }
        }
    }
    marks
}

/// Exact scan of the marked block pairs. Padding columns are skipped.
pub fn list_outliers(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    plan: &IterationPlan,
    marked: &[MarkedPair],
    rho: f64,
) -> Result<Vec<OutlierPair>> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            left: a.d(),
            right: b.d(),
        });
    }
    let threshold = ip_threshold(rho, a.d());
    let mut pairs: Vec<OutlierPair> = marked
        .par_iter()
        .flat_map_iter(|m| {
            let mut found = Vec::new();
            for &j1 in plan.block(m.k1).iter().filter(|&&j| j < a.n()) {
                for &j2 in plan.block(m.k2).iter().filter(|&&j| j < b.n()) {
                    let ip = inner_product_unchecked(a.column(j1), b.column(j2));
                    if ip.abs() >= threshold {
                        found.push(OutlierPair { j1, j2, ip });
                    }
                }
            }
            found
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolmat::partial_inner_product;
    use crate::corrjoin::compress::compress;
    use crate::corrjoin::plan::setup_iteration;
    use crate::rng;

    #[test]
    fn duplicate_pair_scores_s() {
        let a = BooleanMatrix::random(16, 4, &mut rng::stream(1, &[])).unwrap();
        let params = Parameters::explicit(0.5, 0.25, 1, 2, 25, 1).unwrap();
        let plan = setup_iteration(4, 16, &params, 2).unwrap();
        let ones = [1i8; 4];
        let (ha, hb) = (
            compress(&a, &plan, &ones).unwrap(),
            compress(&a, &plan, &ones).unwrap(),
        );
        let scores = detection_scores(&ha, &hb, &GemmConfig::default()).unwrap();
        for k in 0..4 {
            assert_eq!(scores.get(k, k), 25);
        }
        let marks = detect(&ha, &hb, &params).unwrap();
        for k in 0..4 {
            assert!(marks
                .iter()
                .any(|m| m.k1 == k && m.k2 == k && m.score == 25));
        }
    }

    #[test]
    fn padding_only_blocks_are_never_marked() {
        let a = BooleanMatrix::random(16, 2, &mut rng::stream(1, &[]))
            .unwrap()
            .pad_to(8);
        let params = Parameters::explicit(0.5, 0.25, 2, 2, 16, 1).unwrap();
        let plan = setup_iteration(8, 16, &params, 4).unwrap();
        let ha = compress(&a, &plan, &plan.alpha).unwrap();
        let hb = compress(&a, &plan, &plan.beta).unwrap();
        let marks = detect(&ha, &hb, &params).unwrap();
        let has_real = |k: usize| plan.block(k).iter().any(|&j| j < 2);
        assert!(marks.iter().all(|m| has_real(m.k1) && has_real(m.k2)));
    }

    #[test]
    fn scores_match_double_sum() {
        let a = BooleanMatrix::random(8, 12, &mut rng::stream(5, &[])).unwrap();
        let b = BooleanMatrix::random(8, 12, &mut rng::stream(6, &[])).unwrap();
        let params = Parameters::explicit(0.5, 0.25, 4, 4, 16, 1)
            .unwrap()
            .with_threshold_constant(0.5);
        let plan = setup_iteration(12, 8, &params, 7).unwrap();
        let ha = compress(&a, &plan, &plan.alpha).unwrap();
        let hb = compress(&b, &plan, &plan.beta).unwrap();
        let scores = detection_scores(&ha, &hb, &GemmConfig::default()).unwrap();
        let tuples: Vec<_> = (0..16).map(|i| plan.sample_tuple(i)).collect();
        let mut want_marks = Vec::new();
        for k1 in 0..3 {
            for k2 in 0..3 {
                let mut sum = 0i64;
                for &j1 in plan.block(k1) {
                    for &j2 in plan.block(k2) {
                        let pip =
                            partial_inner_product(a.column(j1), b.column(j2), &tuples).unwrap();
                        sum += plan.alpha[j1] as i64 * plan.beta[j2] as i64 * pip;
                    }
                }
                assert_eq!(scores.get(k1, k2), sum);
                if sum.abs() as f64 >= params.marking_threshold() {
                    want_marks.push((k1, k2));
                }
            }
        }
        let got: Vec<_> = detect(&ha, &hb, &params)
            .unwrap()
            .iter()
            .map(|m| (m.k1, m.k2))
            .collect();
        assert_eq!(got, want_marks);
    }

    #[test]
    fn listing() {
        let mut a = BooleanMatrix::random(64, 8, &mut rng::stream(9, &[])).unwrap();
        let b = a.clone();
        a.flip(0, 3);
        let params = Parameters::explicit(0.9, 0.25, 4, 2, 4, 1).unwrap();
        let plan = setup_iteration(8, 64, &params, 1).unwrap();
        assert!(list_outliers(&a, &b, &plan, &[], 0.9).unwrap().is_empty());
        let k = (0..2).find(|&k| plan.block(k).contains(&5)).unwrap();
        let got = list_outliers(
            &a,
            &b,
            &plan,
            &[MarkedPair {
                k1: k,
                k2: k,
                score: 0,
            }],
            0.9,
        )
        .unwrap();
        assert!(got.contains(&OutlierPair {
            j1: 5,
            j2: 5,
            ip: 64
        }));
        let all: Vec<MarkedPair> = (0..2)
            .flat_map(|k1| (0..2).map(move |k2| MarkedPair { k1, k2, score: 0 }))
            .collect();
        let every = list_outliers(&a, &b, &plan, &all, 0.9).unwrap();
        let oracle: Vec<OutlierPair> = (0..8)
            .flat_map(|j1| (0..8).map(move |j2| (j1, j2)))
            .map(|(j1, j2)| OutlierPair {
                j1,
                j2,
                ip: inner_product_unchecked(a.column(j1), b.column(j2)),
            })
            .filter(|p| p.ip.abs() as f64 >= 0.9 * 64.0)
            .collect();
        assert_eq!(every, oracle);
    }
}
